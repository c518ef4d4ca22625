use std::fmt;

use serde::{Deserialize, Serialize};

/// Upper (`b_+`, `s_+`) or lower (`b_-`, `s_-`) side of a boundary pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Lower => f.write_str("lower"),
            Side::Upper => f.write_str("upper"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("the initial law must charge both sides of the origin or the origin itself (a_+ = {a_plus}, a_- = {a_minus})")]
    OriginOutsideInitialHull { a_plus: f64, a_minus: f64 },

    #[error("D.1 fails: the target law charges ({lo}, {hi}) with mass {mass}, so no zero-mass interval contains the initial support")]
    NoGap { lo: f64, hi: f64, mass: f64 },

    #[error("D.2 fails: {0}")]
    AtomAtGapEdge(String),

    #[error("{0}")]
    AssumptionsFailed(String),

    #[error("continuation region reaches the {side} lattice edge at t = {t}, but that boundary is finite; widen the grid")]
    DomainTooNarrow { side: Side, t: f64 },

    #[error("extracted {side} boundary touches the lattice edge while classified finite")]
    ClassificationConflict { side: Side },

    #[error("raw {side} boundary violates monotonicity by {violation} (> dx = {dx})")]
    MonotonicityViolation { side: Side, violation: f64, dx: f64 },

    #[error("lattice mismatch: {0}")]
    GridMismatch(String),

    #[error("tree depth {depth} exceeds the enumeration bound {max}")]
    DepthExceeded { depth: usize, max: usize },

    #[error("invalid barrier: {0}")]
    InvalidBarrier(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("spec parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
