//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a hard criterion fails. Soft criteria (the directional
//! experiments) report their outcome without failing the run, except for the
//! parts marked hard. The experiment numbers are also written to
//! `results/directional.md` at the workspace root.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use mcgdm_core::autodiff::{Tape, Tensor};
use mcgdm_core::data::{gen_rotated_domains, gen_textured_domains, AugmentationSpec, DomainDataset};
use mcgdm_core::federation::{
    aggregate, aggregation_weights, knowledge_vote, run_da, run_dg, ClientUpdate, HyperParams, Metric, Phase,
    RunOutcome, Scenario, Sequential,
};
use mcgdm_core::gradcheck::{check_head_grad, check_local_loss, random_instance, Instance, Tolerance};
use mcgdm_core::model::ModelParams;
use mcgdm_core::objective::{cosine_sim, cross_entropy, local_loss, MatchingWeights};
use mcgdm_core::rng::{stream, Stream};
use rand::Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const ANGLES: [f64; 4] = [0.0, 25.0, 50.0, 75.0];
/// 625 per domain leaves 500 training samples after the 80/20 split.
const N_PER_DOMAIN: usize = 625;
const MOONS_NOISE: f64 = 0.1;

struct Report {
    lines: Vec<String>,
    hard_failures: Vec<&'static str>,
    results: String,
}

impl Report {
    fn record(&mut self, id: &'static str, pass: bool, hard: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        let kind = if hard { "" } else { " (soft)" };
        let line = format!("{id} {verdict}{kind}: {detail}");
        println!("{line}");
        self.lines.push(line);
        if hard && !pass {
            self.hard_failures.push(id);
        }
    }
}

fn ac1(r: &mut Report) {
    let started = Instant::now();
    let (mut rel, mut abs, mut bad) = (0.0f64, 0.0f64, None);
    for trial in 0..20 {
        let inst = random_instance(&[6, 8, 5], 4, 8, 2024, trial).unwrap();
        let d = check_local_loss(&inst, 1e-5, Tolerance::default()).unwrap();
        rel = rel.max(d.worst_relative);
        abs = abs.max(d.worst_absolute);
        if bad.is_none() {
            bad = d.violation.map(|v| (trial, v));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    r.record(
        "AC-1",
        bad.is_none() && secs < 10.0,
        true,
        format!("20 instances, worst relative {rel:.2e}, worst absolute {abs:.2e}, violation {bad:?}, {secs:.2}s"),
    );
}

fn ac2(r: &mut Report) {
    let worst = (0..50)
        .map(|t| check_head_grad(&random_instance(&[6, 8, 5], 4, 8, 77, t).unwrap()).unwrap())
        .fold(0.0, f64::max);
    r.record("AC-2", worst <= 1e-10, true, format!("50 instances, max abs diff {worst:.2e}"));
}

fn ac3(r: &mut Report) {
    let (mut intra, mut grad) = (0.0f64, 0.0f64);
    let mut over = 0;
    for trial in 0..20 {
        let mut inst = random_instance(&[6, 8, 5], 4, 8, 303, trial).unwrap();
        inst.x_aug = inst.x.clone();
        inst.snapshots.clear();
        let mut g = Vec::new();
        for lambda in [0.0, 1.0] {
            inst.weights = MatchingWeights::new(lambda);
            let mut t = Tape::new();
            let v = inst.params.register(&mut t);
            let (_, b) = local_loss(&mut t, &v, &[], &inst.x, &inst.x_aug, &inst.labels, inst.weights).unwrap();
            intra = intra.max(b.intra);
            if b.intra > 1e-12 {
                over += 1;
            }
            g.push(Instance::autodiff_gradient(&inst).unwrap());
        }
        let norm = g[0].iter().zip(&g[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        grad = grad.max(norm);
    }
    r.record(
        "AC-3",
        intra <= 1e-12 && grad <= 1e-8,
        true,
        format!(
            "20 instances, max intra {intra:.2e} (limit 1e-12, {over}/40 evaluations above), \
             max intra gradient contribution {grad:.2e} (limit 1e-8)"
        ),
    );
}

fn ac4(r: &mut Report) {
    let pair = |n1, n2| {
        let u = |d, flat: [f64; 2], n| ClientUpdate {
            domain_id: d,
            params: ModelParams::unflatten(&[1], 2, &[flat[0], flat[1], 0.0, 0.0]).unwrap(),
            n_samples: n,
        };
        vec![u(0, [1.0, 3.0], n1), u(1, [3.0, 5.0], n2)]
    };
    let close = |m: &[f64], want: [f64; 2]| (m[0] - want[0]).abs() <= 1e-12 && (m[1] - want[1]).abs() <= 1e-12;
    let equal = close(&aggregate(&pair(4, 4)).unwrap().flatten(), [2.0, 4.0]);
    let weighted = close(&aggregate(&pair(1, 3)).unwrap().flatten(), [2.5, 4.5]);

    let p = ModelParams::init(&[2, 32, 32], 2, 5).unwrap();
    let same: Vec<ClientUpdate> = (0..3).map(|i| ClientUpdate { domain_id: i, params: p.clone(), n_samples: 100 + 37 * i }).collect();
    let fixed = aggregate(&same).unwrap().flatten().iter().zip(p.flatten()).all(|(a, b)| (a - b).abs() <= 1e-12);
    let sums = [pair(1, 3), pair(7, 7), same.clone()]
        .iter()
        .map(|u| (aggregation_weights(u).unwrap().iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    r.record(
        "AC-4",
        equal && weighted && fixed && sums <= 1e-15,
        true,
        format!("[2,4] {equal}, [2.5,4.5] {weighted}, fixed point {fixed}, weight-sum error {sums:.1e}"),
    );
}

fn ac5(r: &mut Report, scratch: &Path) {
    let config = scratch.join("ac5.json");
    fs::write(
        &config,
        format!(
            r#"{{"mode": "dg",
                "data": {{"kind": "rotated_moons", "angles": [0, 25, 50, 75], "n_per_domain": {N_PER_DOMAIN}, "noise_sigma": {MOONS_NOISE}}},
                "held_out": 3, "arch": [2, 32, 32],
                "augmentation": {{"kind": "gaussian_noise", "sigma": 0.15}}}}"#
        ),
    )
    .unwrap();
    let run = |name: &str, parallel: &str| {
        let out = scratch.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_mcgdm"))
            .args(["run-dg", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .args(["--parallel-clients", parallel])
            .output()
            .unwrap()
            .status;
        assert!(status.success(), "run-dg failed");
        fs::read(out.join("metrics_seed0.csv")).unwrap()
    };
    let a = run("seq1", "false");
    let b = run("seq2", "false");
    let c = run("par", "true");
    r.record(
        "AC-5",
        a == b && a == c,
        true,
        format!("{} CSV bytes; rerun identical {}, parallel identical {}", a.len(), a == b, a == c),
    );
}

fn moons(seed: u64) -> Vec<DomainDataset> {
    gen_rotated_domains(4, &ANGLES, N_PER_DOMAIN, MOONS_NOISE, 2, seed).unwrap()
}

fn moons_scenario(domains: &[DomainDataset], seed: u64, gradient_matching: bool) -> Scenario {
    let hp = HyperParams { seed, gradient_matching, ..HyperParams::default() };
    Scenario::new(domains, 0.8, vec![2, 32, 32], AugmentationSpec::GaussianNoise { sigma: 0.15 }, hp).unwrap()
}

fn others(n: usize, skip: usize) -> Vec<usize> {
    (0..n).filter(|&d| d != skip).collect()
}

/// `dg[fold][seed]` for the full method, reused by the adaptation criterion.
fn ac6(r: &mut Report) -> Vec<Vec<RunOutcome>> {
    let started = Instant::now();
    let mut full = vec![Vec::new(); 4];
    let mut table = String::from("| held-out | MCGDM | FedAvg+aug | margin |\n|---|---|---|---|\n");
    let (mut margins, mut worst) = (Vec::new(), f64::INFINITY);
    for fold in 0..4 {
        let (mut a, mut b) = (0.0, 0.0);
        for &seed in &SEEDS {
            let d = moons(seed);
            let m = run_dg(&moons_scenario(&d, seed, true), &others(4, fold), fold, &Sequential).unwrap();
            let base = run_dg(&moons_scenario(&d, seed, false), &others(4, fold), fold, &Sequential).unwrap();
            a += 100.0 * m.headline_accuracy / SEEDS.len() as f64;
            b += 100.0 * base.headline_accuracy / SEEDS.len() as f64;
            full[fold].push(m);
        }
        writeln!(table, "| {}° | {a:.2} | {b:.2} | {:+.2} |", ANGLES[fold], a - b).unwrap();
        margins.push(a - b);
        worst = worst.min(a - b);
    }
    let mean = margins.iter().sum::<f64>() / 4.0;
    let secs = started.elapsed().as_secs_f64();
    writeln!(table, "\nMean margin over folds: {mean:+.2} points.").unwrap();
    r.results.push_str("## Leave-one-domain-out, rotated moons\n\n");
    r.results.push_str("Mean unseen-domain accuracy (%) over seeds 0-4.\n\n");
    r.results.push_str(&table);
    r.record(
        "AC-6",
        worst >= -0.5 && mean > 0.0 && secs < 120.0,
        false,
        format!("margins per fold {:?}, mean {mean:+.2} points, {secs:.1}s", margins.iter().map(|m| (m * 100.0).round() / 100.0).collect::<Vec<_>>()),
    );
    full
}

fn ac7(r: &mut Report, dg: &[Vec<RunOutcome>]) {
    let tau = 0.9;
    let mut hard_ok = true;
    let mut soft_ok = true;
    let mut table = String::from("| target | final PL precision (mean) | run_da ≥ run_dg | run_da acc | run_dg acc |\n|---|---|---|---|---|\n");
    let mut detail = Vec::new();
    for target in 0..4 {
        let (mut wins, mut precisions, mut missing) = (0, Vec::new(), 0);
        let (mut da_acc, mut dg_acc) = (0.0, 0.0);
        for (i, &seed) in SEEDS.iter().enumerate() {
            let d = moons(seed);
            let sc = moons_scenario(&d, seed, true);
            let sc = Scenario { hp: HyperParams { tau, min_votes: Some(2), ..sc.hp }, ..sc };
            let da = match run_da(&sc, &others(4, target), target, &Sequential) {
                Ok(o) => o,
                Err(e) => {
                    hard_ok = false;
                    detail.push(format!("target {target} seed {seed}: {e}"));
                    continue;
                }
            };
            // Independent vote over four differently trained models.
            let voters: Vec<ModelParams> = dg.iter().map(|f| f[i].global.clone()).collect();
            let pl = knowledge_vote(&voters, &sc.train[target].x, tau, 2).unwrap();
            hard_ok &= pl.confidences.iter().all(|&c| c >= tau) && pl.labels.iter().all(|&y| y < 2);

            let reference = &dg[target][i];
            if da.headline_accuracy >= reference.headline_accuracy {
                wins += 1;
            }
            da_acc += 100.0 * da.headline_accuracy / SEEDS.len() as f64;
            dg_acc += 100.0 * reference.headline_accuracy / SEEDS.len() as f64;
            match da.metrics.get(sc.hp.rounds, Phase::Pseudo, target, Metric::PlPrecision) {
                Some(p) => precisions.push(p),
                None => missing += 1,
            }
        }
        let precision = if precisions.is_empty() { f64::NAN } else { precisions.iter().sum::<f64>() / precisions.len() as f64 };
        let ok = precision >= 0.9 && missing == 0 && wins >= 4;
        soft_ok &= ok;
        writeln!(table, "| {}° | {precision:.3} ({} seeds with labels) | {wins}/5 | {da_acc:.2} | {dg_acc:.2} |", ANGLES[target], precisions.len()).unwrap();
        detail.push(format!("target {target}: precision {precision:.3}, wins {wins}/5"));
    }
    r.results.push_str("\n## Adaptation to an unlabeled target, rotated moons\n\n");
    r.results.push_str("tau = 0.9, min_votes = 2. Accuracy (%) of the final global model on the target test split.\n\n");
    r.results.push_str(&table);
    r.record("AC-7a", hard_ok, true, "every accepted pseudo-label has confidence >= tau".into());
    r.record("AC-7", hard_ok && soft_ok, false, detail.join("; "));
}

fn ac8(r: &mut Report) {
    let started = Instant::now();
    let arms = [
        ("gaussian noise", AugmentationSpec::GaussianNoise { sigma: 0.15 }),
        ("amplitude mix", AugmentationSpec::AmplitudeMix { eta_max: 0.5, side: 8 }),
    ];
    let mut finite = true;
    let mut acc = [[0.0; 4]; 2];
    for &seed in &SEEDS {
        let domains = gen_textured_domains(4, 8, N_PER_DOMAIN, 4, seed).unwrap();
        for (a, (_, aug)) in arms.iter().enumerate() {
            for fold in 0..4 {
                let hp = HyperParams { seed, ..HyperParams::default() };
                let sc = Scenario::new(&domains, 0.8, vec![64, 32, 32], *aug, hp).unwrap();
                match run_dg(&sc, &others(4, fold), fold, &Sequential) {
                    Ok(o) => {
                        finite &= o.metrics.select(Phase::Train, Metric::Total).all(|row| row.value.is_finite());
                        acc[a][fold] += 100.0 * o.headline_accuracy / SEEDS.len() as f64;
                    }
                    Err(_) => finite = false,
                }
            }
        }
    }
    let mean = |a: &[f64; 4]| a.iter().sum::<f64>() / 4.0;
    let gap = mean(&acc[1]) - mean(&acc[0]);
    let mut table = String::from("| held-out | gaussian noise | amplitude mix | difference |\n|---|---|---|---|\n");
    for fold in 0..4 {
        writeln!(table, "| domain {fold} | {:.2} | {:.2} | {:+.2} |", acc[0][fold], acc[1][fold], acc[1][fold] - acc[0][fold]).unwrap();
    }
    writeln!(table, "| mean | {:.2} | {:.2} | {gap:+.2} |", mean(&acc[0]), mean(&acc[1])).unwrap();
    r.results.push_str("\n## Augmentation swap, textured 8×8 domains\n\n");
    r.results.push_str("4 domains, 4 classes, arch [64, 32, 32]. Mean unseen-domain accuracy (%) over seeds 0-4.\n\n");
    r.results.push_str(&table);
    r.record("AC-8a", finite, true, "all folds of both arms finished with finite losses".into());
    r.record(
        "AC-8",
        finite && gap.abs() <= 5.0,
        false,
        format!("amplitude mix minus noise {gap:+.2} points averaged over folds ({:.1}s)", started.elapsed().as_secs_f64()),
    );
}

fn ac9(r: &mut Report) {
    let mut ce_err = 0.0f64;
    for k in [2usize, 5, 10] {
        let mut t = Tape::new();
        let z = t.constant(Tensor::zeros(&[4, k]));
        let ce = cross_entropy(&mut t, z, &[0, 1, k - 1, k / 2]).unwrap();
        ce_err = ce_err.max((t.scalar(ce) - (k as f64).ln()).abs());
    }
    let mut rng = stream(99, Stream::Instance, 0, 0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..1000 {
        let n = rng.random_range(1..16);
        let scale_u = [1.0, 1e-8, 1e-150, 1e-300, 0.0][i % 5];
        let u: Vec<f64> = (0..n).map(|_| scale_u * rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (a, b) in [(&u, &v), (&v, &v), (&u, &u)] {
            let mut t = Tape::new();
            let (a, b) = (t.constant(Tensor::vector(a.clone())), t.constant(Tensor::vector(b.clone())));
            let s = cosine_sim(&mut t, a, b).unwrap();
            lo = lo.min(t.scalar(s));
            hi = hi.max(t.scalar(s));
        }
    }
    r.record(
        "AC-9",
        ce_err <= 1e-12 && lo >= -1.0 - 1e-9 && hi <= 1.0 + 1e-9,
        true,
        format!("ln K error {ce_err:.1e}; cosine range [{lo:.12}, {hi:.12}] over 1000 pairs"),
    );
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().unwrap();
    let mut r = Report { lines: Vec::new(), hard_failures: Vec::new(), results: String::new() };
    r.results.push_str("# Directional experiments\n\nProduced by `cargo test -p mcgdm --test acceptance`.\n\n");
    ac1(&mut r);
    ac2(&mut r);
    ac3(&mut r);
    ac4(&mut r);
    ac5(&mut r, scratch.path());
    let dg = ac6(&mut r);
    ac7(&mut r, &dg);
    ac8(&mut r);
    ac9(&mut r);

    let results: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "results", "directional.md"].iter().collect();
    fs::create_dir_all(results.parent().unwrap()).unwrap();
    fs::write(&results, &r.results).unwrap();

    println!("\n{} criteria reported, hard failures: {:?}", r.lines.len(), r.hard_failures);
    if r.hard_failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
