use thiserror::Error;

use crate::seq::EditAction;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid nucleotide {0:?}, expected one of A, C, G, T")]
    InvalidBase(char),

    #[error("cannot parse edit action {0:?}, expected kind@site[:token]")]
    ParseAction(String),

    #[error("edit {action} is not valid for a sequence of length {len}")]
    InvalidAction { action: EditAction, len: usize },

    #[error("invalid length bounds: need 1 <= min_len ({min}) <= max_len ({max})")]
    InvalidBounds { min: usize, max: usize },

    #[error("sequence length {len} outside [{min}, {max}]")]
    OutOfBounds { len: usize, min: usize, max: usize },

    #[error("state has no valid edit actions")]
    NoActions,

    #[error("invalid position weight matrix: {0}")]
    Pwm(String),

    #[error("splice window [{start}, {end}) does not fit a sequence of length {len}")]
    SpliceWindow { start: isize, end: isize, len: usize },

    #[error("enumeration guard exceeded: predicted {predicted} items, limit {limit}")]
    GuardExceeded { predicted: u128, limit: u128 },

    #[error("distribution is empty")]
    EmptyDistribution,

    #[error("trajectory has no steps")]
    EmptyTrajectory,

    #[error("k-mer sizes differ: {left} vs {right}")]
    KmerMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}
