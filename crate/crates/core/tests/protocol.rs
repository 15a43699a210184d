use mcgdm_core::autodiff::Tensor;
use mcgdm_core::data::{amplitude_mix_with, amplitude_spectrum, augment, batch_iter, gen_rotated_domains, gen_textured_domains, AugmentationSpec};
use mcgdm_core::federation::{aggregate, aggregation_weights, evaluate, knowledge_vote, run_dg, ClientUpdate, HyperParams, Metric, Phase, Scenario, Sequential};
use mcgdm_core::model::ModelParams;
use mcgdm_core::rng::{stream, Stream};
use proptest::prelude::*;
use rand::Rng;

fn update(domain_id: usize, arch: &[usize], flat: Vec<f64>, n: usize) -> ClientUpdate {
    ClientUpdate {
        domain_id,
        params: ModelParams::unflatten(arch, 2, &flat).unwrap(),
        n_samples: n,
    }
}

#[test]
fn batched_logits_match_row_by_row() {
    let p = ModelParams::init(&[3, 7, 5], 4, 9).unwrap();
    let mut rng = stream(1, Stream::Instance, 0, 0);
    let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let batch = p.logits(&Tensor::from_rows(&rows).unwrap()).unwrap();
    for (i, r) in rows.iter().enumerate() {
        let single = p.logits(&Tensor::from_rows(&[r]).unwrap()).unwrap();
        for (a, b) in batch.row(i).iter().zip(single.row(0)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn weighted_mean_of_two_clients() {
    // Arch [1] with K=2 has 4 parameters; the examples use two of them.
    let arch = [1];
    let a = update(0, &arch, vec![1.0, 3.0, 0.0, 0.0], 5);
    let b = update(1, &arch, vec![3.0, 5.0, 0.0, 0.0], 5);
    let m = aggregate(&[a.clone(), b.clone()]).unwrap().flatten();
    assert!((m[0] - 2.0).abs() <= 1e-12 && (m[1] - 4.0).abs() <= 1e-12);

    let a = ClientUpdate { n_samples: 1, ..a };
    let b = ClientUpdate { n_samples: 3, ..b };
    let m = aggregate(&[a, b]).unwrap().flatten();
    assert!((m[0] - 2.5).abs() <= 1e-12 && (m[1] - 4.5).abs() <= 1e-12);
}

#[test]
fn aggregate_matches_coordinatewise_recomputation() {
    let arch = [3, 4];
    let updates: Vec<ClientUpdate> = (0..4)
        .map(|i| ClientUpdate {
            domain_id: i,
            params: ModelParams::init(&arch, 2, 100 + i as u64).unwrap(),
            n_samples: 17 + 13 * i,
        })
        .collect();
    let weights = aggregation_weights(&updates).unwrap();
    assert!((weights.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
    let total: usize = updates.iter().map(|u| u.n_samples).sum();
    let flats: Vec<Vec<f64>> = updates.iter().map(|u| u.params.flatten()).collect();
    let got = aggregate(&updates).unwrap().flatten();
    for k in 0..got.len() {
        let want: f64 = updates.iter().zip(&flats).map(|(u, f)| u.n_samples as f64 / total as f64 * f[k]).sum();
        assert!((got[k] - want).abs() <= 1e-12);
    }
}

#[test]
fn identical_clients_are_a_fixed_point() {
    let p = ModelParams::init(&[2, 6], 3, 4).unwrap();
    let ups: Vec<ClientUpdate> = (0..3).map(|i| ClientUpdate { domain_id: i, params: p.clone(), n_samples: 1 + 7 * i }).collect();
    let m = aggregate(&ups).unwrap().flatten();
    for (a, b) in m.iter().zip(p.flatten()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn random_params_score_near_chance() {
    for k in [2, 3, 4] {
        let domains = gen_textured_domains(1, 8, 600, k, 2).unwrap();
        let mut mean = 0.0;
        for seed in 0..5 {
            let p = ModelParams::init(&[64, 16], k, 1000 + seed).unwrap();
            mean += evaluate(&p, &domains[0]).unwrap() / 5.0;
        }
        assert!((mean - 1.0 / k as f64).abs() <= 0.1, "K={k}: {mean}");
    }
}

#[test]
fn regenerated_domains_are_bitwise_identical() {
    let a = gen_rotated_domains(3, &[0.0, 30.0, 60.0], 100, 0.1, 2, 8).unwrap();
    let b = gen_rotated_domains(3, &[0.0, 30.0, 60.0], 100, 0.1, 2, 8).unwrap();
    assert_eq!(a, b);
    assert_eq!(gen_textured_domains(2, 8, 40, 3, 1).unwrap(), gen_textured_domains(2, 8, 40, 3, 1).unwrap());
}

#[test]
fn augmentations_keep_shape() {
    let d = &gen_textured_domains(1, 8, 24, 2, 0).unwrap()[0];
    let mut rng = stream(0, Stream::Augment, 0, 0);
    for spec in [
        AugmentationSpec::Identity,
        AugmentationSpec::GaussianNoise { sigma: 0.2 },
        AugmentationSpec::AmplitudeMix { eta_max: 0.5, side: 8 },
    ] {
        let out = augment(&d.x, &spec, &mut rng).unwrap();
        assert_eq!(out.dims(), d.x.dims());
        assert!(out.is_finite());
    }
}

#[test]
fn full_amplitude_mix_takes_partner_spectrum() {
    let mut rng = stream(3, Stream::Instance, 0, 0);
    let mut grid = || Tensor::matrix(8, 8, (0..64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let (x1, x2) = (grid(), grid());
    let out = amplitude_mix_with(&x1, &x2, 1.0).unwrap();
    let got = amplitude_spectrum(out.data(), 8).unwrap();
    let want = amplitude_spectrum(x2.data(), 8).unwrap();
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-6);
    }
}

#[test]
fn batches_cover_the_dataset() {
    let d = &gen_rotated_domains(1, &[10.0], 53, 0.1, 2, 0).unwrap()[0];
    let batches = batch_iter(d, 16, 4, 2);
    assert_eq!(batches.iter().map(|b| b.labels.len()).collect::<Vec<_>>(), [16, 16, 16, 5]);
    let mut rows: Vec<Vec<u64>> = batches
        .iter()
        .flat_map(|b| (0..b.x.rows()).map(|r| b.x.row(r).iter().map(|v| v.to_bits()).collect()).collect::<Vec<_>>())
        .collect();
    let mut all: Vec<Vec<u64>> = (0..d.len()).map(|r| d.x.row(r).iter().map(|v| v.to_bits()).collect()).collect();
    rows.sort();
    all.sort();
    assert_eq!(rows, all);
}

#[test]
fn first_round_has_no_inter_term() {
    let domains = gen_rotated_domains(3, &[0.0, 20.0, 40.0], 60, 0.1, 2, 0).unwrap();
    let hp = HyperParams { rounds: 2, lr0: 0.05, lr1: 0.01, ..HyperParams::default() };
    let sc = Scenario::new(&domains, 0.8, vec![2, 6], AugmentationSpec::GaussianNoise { sigma: 0.1 }, hp).unwrap();
    let out = run_dg(&sc, &[0, 1], 2, &Sequential).unwrap();
    for d in [0, 1] {
        assert_eq!(out.metrics.get(1, Phase::Train, d, Metric::Inter), Some(0.0));
        assert!(out.metrics.get(2, Phase::Train, d, Metric::Inter).unwrap() > 0.0);
    }
    let again = run_dg(&sc, &[0, 1], 2, &Sequential).unwrap();
    assert_eq!(out.metrics, again.metrics);
}

proptest! {
    #[test]
    fn flatten_round_trips(seed in any::<u64>(), h in 1usize..6, k in 2usize..5) {
        let arch = [3, h, 4];
        let p = ModelParams::init(&arch, k, seed).unwrap();
        let flat = p.flatten();
        prop_assert_eq!(flat.len(), ModelParams::param_count(&arch, k));
        prop_assert_eq!(ModelParams::unflatten(&arch, k, &flat).unwrap(), p);
    }

    #[test]
    fn vote_respects_threshold(seed in 0u64..1000, tau in 0.3f64..1.0, min_votes in 1usize..4) {
        let models: Vec<ModelParams> = (0..3).map(|i| ModelParams::init(&[2, 5], 3, seed * 7 + i).unwrap()).collect();
        let mut rng = stream(seed, Stream::Instance, 1, 0);
        let x = Tensor::matrix(20, 2, (0..40).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let pl = knowledge_vote(&models, &x, tau, min_votes).unwrap();
        prop_assert!(pl.n_accepted() <= 20);
        prop_assert!(pl.confidences.iter().all(|&c| c >= tau));
        prop_assert!(pl.labels.iter().all(|&y| y < 3));
        prop_assert!(pl.indices.windows(2).all(|w| w[0] < w[1]));
    }
}
