use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Train,
    EvalSource,
    EvalUnseen,
    EvalTarget,
    Pseudo,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::EvalSource => "eval_source",
            Phase::EvalUnseen => "eval_unseen",
            Phase::EvalTarget => "eval_target",
            Phase::Pseudo => "pseudo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Accuracy,
    CeOrig,
    CeAug,
    Intra,
    Inter,
    Total,
    PlPrecision,
    PlCoverage,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::CeOrig => "ce_orig",
            Metric::CeAug => "ce_aug",
            Metric::Intra => "intra",
            Metric::Inter => "inter",
            Metric::Total => "total",
            Metric::PlPrecision => "pl_precision",
            Metric::PlCoverage => "pl_coverage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub round: usize,
    pub phase: Phase,
    pub domain_id: usize,
    pub metric: Metric,
    pub value: f64,
}

/// Long-format per-round metrics, in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTable {
    rows: Vec<MetricRow>,
}

impl MetricsTable {
    pub fn push(&mut self, round: usize, phase: Phase, domain_id: usize, metric: Metric, value: f64) {
        self.rows.push(MetricRow {
            round,
            phase,
            domain_id,
            metric,
            value,
        });
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn select(&self, phase: Phase, metric: Metric) -> impl Iterator<Item = &MetricRow> {
        self.rows
            .iter()
            .filter(move |r| r.phase == phase && r.metric == metric)
    }

    /// Value at `round` for one `(phase, domain, metric)` series.
    pub fn get(&self, round: usize, phase: Phase, domain_id: usize, metric: Metric) -> Option<f64> {
        self.select(phase, metric)
            .find(|r| r.round == round && r.domain_id == domain_id)
            .map(|r| r.value)
    }

    pub fn last_round(&self) -> usize {
        self.rows.iter().map(|r| r.round).max().unwrap_or(0)
    }
}
