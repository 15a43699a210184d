use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape error in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("finite-difference oracle produced a non-finite value at coordinate {coordinate}")]
    Oracle { coordinate: usize },
    #[error("training diverged on domain {domain_id} at round {round}, step {step}")]
    Divergence {
        domain_id: usize,
        round: usize,
        step: usize,
    },
    #[error("numerical error: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
