use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("not enough history: need {needed} slots before slot {slot}, have {available}")]
    NotEnoughHistory {
        needed: usize,
        available: usize,
        slot: usize,
    },
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("index {index} out of range for {len} users")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("training diverged at iteration {iteration}")]
    TrainingDiverged { iteration: usize, trace: Vec<f64> },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { what, expected, got })
    }
}
