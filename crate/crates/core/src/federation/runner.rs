use alloc::format;
use alloc::vec::Vec;

use super::client::{local_train, train_cross_entropy, LocalOutcome};
use super::metrics::{Metric, MetricsTable, Phase};
use super::server::aggregate;
use super::vote::knowledge_vote;
use super::{ClientUpdate, HyperParams, RoundMessage};
use crate::autodiff::Tensor;
use crate::data::{AugmentationSpec, DomainDataset};
use crate::model::ModelParams;
use crate::{Error, Result};

/// Runs independent client tasks. Results come back in task order whatever
/// the scheduling.
pub trait ClientExecutor: Sync {
    fn run<T, F>(&self, n: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ClientExecutor for Sequential {
    fn run<T, F>(&self, n: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(task).collect()
    }
}

/// Train/test splits of every domain plus the model and training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub train: Vec<DomainDataset>,
    pub test: Vec<DomainDataset>,
    pub arch: Vec<usize>,
    pub classes: usize,
    pub aug: AugmentationSpec,
    pub hp: HyperParams,
}

impl Scenario {
    /// Splits every domain with `train_frac` (keyed by `hp.seed`).
    pub fn new(
        domains: &[DomainDataset],
        train_frac: f64,
        arch: Vec<usize>,
        aug: AugmentationSpec,
        hp: HyperParams,
    ) -> Result<Self> {
        let classes = domains
            .first()
            .ok_or_else(|| Error::Config("scenario needs at least one domain".into()))?
            .classes;
        let (train, test) = domains
            .iter()
            .map(|d| d.split(train_frac, hp.seed))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Ok(Scenario {
            train,
            test,
            arch,
            classes,
            aug,
            hp,
        })
    }

    fn check(&self, sources: &[usize], other: usize, what: &str) -> Result<()> {
        self.hp.validate()?;
        let n = self.train.len();
        if sources.is_empty() {
            return Err(Error::Config("at least one source domain is required".into()));
        }
        if other >= n {
            return Err(Error::Config(format!("{what} domain {other} is out of range (0..{n})")));
        }
        for (i, &s) in sources.iter().enumerate() {
            if s >= n {
                return Err(Error::Config(format!("source domain {s} is out of range (0..{n})")));
            }
            if s == other {
                return Err(Error::Config(format!("{what} domain {s} is also listed as a source")));
            }
            if sources[..i].contains(&s) {
                return Err(Error::Config(format!("source domain {s} is listed twice")));
            }
        }
        if self.arch.first() != Some(&self.train[0].dim()) {
            return Err(Error::Config(format!(
                "arch {:?} does not start with the input dimension {}",
                self.arch,
                self.train[0].dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub metrics: MetricsTable,
    pub global: ModelParams,
    /// Final-round accuracy on the held-out (or target) domain.
    pub headline_accuracy: f64,
    /// Mean final-round accuracy over the source test splits.
    pub source_accuracy: f64,
    /// Rounds in which the target client had no pseudo-labels.
    pub skipped_target_rounds: Vec<usize>,
}

pub(crate) fn accuracy(params: &ModelParams, x: &Tensor, labels: &[usize]) -> Result<f64> {
    let z = params.logits(x)?;
    let hits = (0..z.rows())
        .filter(|&r| {
            let row = z.row(r);
            let pred = (1..row.len()).fold(0, |best, k| if row[k] > row[best] { k } else { best });
            pred == labels[r]
        })
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Fraction of samples whose argmax logit equals the label; ties go to the
/// lowest class index.
pub fn evaluate(params: &ModelParams, dataset: &DomainDataset) -> Result<f64> {
    if params.input_dim() != dataset.dim() {
        return Err(Error::shape("evaluate", &[params.input_dim()], &[dataset.dim()]));
    }
    accuracy(params, &dataset.x, &dataset.labels)
}

fn log_train(metrics: &mut MetricsTable, round: usize, out: &LocalOutcome) {
    let d = out.update.domain_id;
    let l = &out.losses;
    for (m, v) in [
        (Metric::CeOrig, l.ce_orig),
        (Metric::CeAug, l.ce_aug),
        (Metric::Intra, l.intra),
        (Metric::Inter, l.inter),
        (Metric::Total, l.total),
    ] {
        metrics.push(round, Phase::Train, d, m, v);
    }
}

fn train_sources<E: ClientExecutor>(
    sc: &Scenario,
    sources: &[usize],
    msg: &RoundMessage,
    exec: &E,
) -> Result<Vec<LocalOutcome>> {
    msg.check()?;
    exec.run(sources.len(), |i| {
        local_train(&msg.global, &sc.train[sources[i]], &msg.heads, &sc.hp, msg.round, &sc.aug)
    })
    .into_iter()
    .collect()
}

fn eval_sources(sc: &Scenario, sources: &[usize], global: &ModelParams, round: usize, metrics: &mut MetricsTable) -> Result<f64> {
    let mut sum = 0.0;
    for &s in sources {
        let acc = evaluate(global, &sc.test[s])?;
        metrics.push(round, Phase::EvalSource, s, Metric::Accuracy, acc);
        sum += acc;
    }
    Ok(sum / sources.len() as f64)
}

/// Federated domain generalization with `held_out` as the unseen domain.
pub fn run_dg<E: ClientExecutor>(sc: &Scenario, sources: &[usize], held_out: usize, exec: &E) -> Result<RunOutcome> {
    sc.check(sources, held_out, "held-out")?;
    let mut msg = RoundMessage {
        round: 1,
        global: ModelParams::init(&sc.arch, sc.classes, sc.hp.seed)?,
        heads: Vec::new(),
    };
    let mut metrics = MetricsTable::default();
    let (mut unseen, mut src) = (0.0, 0.0);

    for round in 1..=sc.hp.rounds {
        msg.round = round;
        let outcomes = train_sources(sc, sources, &msg, exec)?;
        for o in &outcomes {
            log_train(&mut metrics, round, o);
        }
        let heads = outcomes.iter().map(|o| o.update.params.head_snapshot(o.update.domain_id, round)).collect();
        let updates: Vec<ClientUpdate> = outcomes.into_iter().map(|o| o.update).collect();
        let global = aggregate(&updates)?;

        src = eval_sources(sc, sources, &global, round, &mut metrics)?;
        unseen = evaluate(&global, &sc.test[held_out])?;
        metrics.push(round, Phase::EvalUnseen, held_out, Metric::Accuracy, unseen);

        msg = RoundMessage {
            round: round + 1,
            global,
            heads,
        };
    }

    Ok(RunOutcome {
        metrics,
        global: msg.global,
        headline_accuracy: unseen,
        source_accuracy: src,
        skipped_target_rounds: Vec::new(),
    })
}

/// Federated domain adaptation: `target`'s training split is treated as
/// unlabeled and pseudo-labeled each round by the fresh source models.
pub fn run_da<E: ClientExecutor>(sc: &Scenario, sources: &[usize], target: usize, exec: &E) -> Result<RunOutcome> {
    sc.check(sources, target, "target")?;
    let pool = &sc.train[target];
    let min_votes = sc.hp.min_votes_for(sources.len());
    let mut msg = RoundMessage {
        round: 1,
        global: ModelParams::init(&sc.arch, sc.classes, sc.hp.seed)?,
        heads: Vec::new(),
    };
    let mut metrics = MetricsTable::default();
    let mut skipped = Vec::new();
    let (mut target_acc, mut src) = (0.0, 0.0);

    for round in 1..=sc.hp.rounds {
        msg.round = round;
        let outcomes = train_sources(sc, sources, &msg, exec)?;
        for o in &outcomes {
            log_train(&mut metrics, round, o);
        }
        let heads = outcomes.iter().map(|o| o.update.params.head_snapshot(o.update.domain_id, round)).collect();
        let locals: Vec<ModelParams> = outcomes.iter().map(|o| o.update.params.clone()).collect();
        let mut updates: Vec<ClientUpdate> = outcomes.into_iter().map(|o| o.update).collect();

        let voted = knowledge_vote(&locals, &pool.x, sc.hp.tau, min_votes)?;
        if voted.confidences.iter().any(|&c| c < sc.hp.tau) {
            return Err(Error::Contract("knowledge vote accepted a label below tau".into()));
        }
        metrics.push(
            round,
            Phase::Pseudo,
            target,
            Metric::PlCoverage,
            voted.n_accepted() as f64 / pool.len() as f64,
        );
        if let Some(p) = voted.precision(&pool.labels) {
            metrics.push(round, Phase::Pseudo, target, Metric::PlPrecision, p);
        }

        if voted.n_accepted() == 0 {
            skipped.push(round);
        } else {
            let mut pseudo = pool.subset(&voted.indices);
            pseudo.labels = voted.labels.clone();
            let out = train_cross_entropy(&msg.global, &pseudo, &sc.hp, round)?;
            log_train(&mut metrics, round, &out);
            updates.push(out.update);
        }

        let global = aggregate(&updates)?;
        src = eval_sources(sc, sources, &global, round, &mut metrics)?;
        target_acc = evaluate(&global, &sc.test[target])?;
        metrics.push(round, Phase::EvalTarget, target, Metric::Accuracy, target_acc);

        msg = RoundMessage {
            round: round + 1,
            global,
            heads,
        };
    }

    Ok(RunOutcome {
        metrics,
        global: msg.global,
        headline_accuracy: target_acc,
        source_accuracy: src,
        skipped_target_rounds: skipped,
    })
}
