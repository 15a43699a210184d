//! The round protocol.
//!
//! 1. Each source client trains from the broadcast global model with the
//!    gradient-matching objective, using the previous round's local heads as
//!    frozen snapshots.
//! 2. Clients upload their models and sample counts.
//! 3. The server averages the models weighted by sample count.
//! 4. The server broadcasts the new global model plus this round's
//!    pre-aggregation local heads.
//!
//! [`run_da`] adds an unlabeled target client that fine-tunes on
//! pseudo-labels voted by the source models.

mod client;
mod metrics;
mod runner;
mod server;
mod vote;

use alloc::format;
use alloc::vec::Vec;

pub use client::{local_train, lr_at, train_cross_entropy, LocalOutcome};
pub use metrics::{Metric, MetricRow, MetricsTable, Phase};
pub use runner::{evaluate, run_da, run_dg, ClientExecutor, RunOutcome, Scenario, Sequential};
pub use server::{aggregate, aggregation_weights};
pub use vote::{knowledge_vote, PseudoLabeledSet};

use crate::model::{HeadSnapshot, ModelParams};
use crate::objective::MatchingWeights;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Intra (`λ`) versus inter (`1 − λ`) matching weight.
    pub lambda: f64,
    /// Communication rounds `E`.
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch: usize,
    /// Learning rate at the first round.
    pub lr0: f64,
    /// Learning rate at the last round.
    pub lr1: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub inter_normalize: bool,
    /// Off gives the FedAvg-with-augmentation baseline.
    pub gradient_matching: bool,
    /// Pseudo-label confidence threshold.
    pub tau: f64,
    /// `None` picks 2 votes with three or more sources and 1 otherwise.
    pub min_votes: Option<usize>,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            lambda: 0.5,
            rounds: 30,
            local_epochs: 1,
            batch: 16,
            lr0: 1e-3,
            lr1: 1e-4,
            momentum: 0.9,
            weight_decay: 5e-4,
            seed: 0,
            inter_normalize: false,
            gradient_matching: true,
            tau: 0.9,
            min_votes: None,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if self.rounds == 0 {
            return bad("rounds must be >= 1".into());
        }
        if self.local_epochs == 0 {
            return bad("local_epochs must be >= 1".into());
        }
        if self.batch == 0 {
            return bad("batch must be >= 1".into());
        }
        if !(self.lr1 >= 0.0 && self.lr0 >= self.lr1 && self.lr0.is_finite()) {
            return bad(format!("need lr0 >= lr1 >= 0, got {} and {}", self.lr0, self.lr1));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if self.min_votes == Some(0) {
            return bad("min_votes must be >= 1".into());
        }
        Ok(())
    }

    pub fn matching(&self) -> MatchingWeights {
        MatchingWeights {
            lambda: self.lambda,
            inter_normalize: self.inter_normalize,
            enabled: self.gradient_matching,
        }
    }

    pub fn min_votes_for(&self, n_sources: usize) -> usize {
        self.min_votes
            .unwrap_or(if n_sources >= 3 { 2 } else { 1 })
    }
}

/// A client's reply to the server.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub domain_id: usize,
    pub params: ModelParams,
    pub n_samples: usize,
}

/// The server's broadcast for round `round`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMessage {
    pub round: usize,
    pub global: ModelParams,
    pub heads: Vec<HeadSnapshot>,
}

impl RoundMessage {
    pub fn check(&self) -> Result<()> {
        match self.heads.iter().find(|h| !h.matches(&self.global)) {
            Some(h) => Err(Error::Contract(format!(
                "head snapshot of domain {} does not match the global head",
                h.domain_id
            ))),
            None => Ok(()),
        }
    }
}
