use thiserror::Error;

use crate::border::CutWitness;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid fair shares: {0}")]
    InvalidShares(String),

    #[error("invalid bid rates: {0}")]
    InvalidRates(String),

    #[error("invalid value distribution: {0}")]
    InvalidDistribution(String),

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("agent count {0} is outside the supported range 1..=16")]
    TooManyAgents(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid allocation rule: {0}")]
    InvalidRule(String),

    #[error("interim target fails the no-waste equality: sum p_i b_i = {lhs} but 1 - prod(1 - b_i) = {rhs}")]
    BorderEquality { lhs: f64, rhs: f64 },

    #[error("no allocation rule implements the target: {0}")]
    Infeasible(CutWitness),

    #[error("subgroup stability fails for agents {subset}: {lhs} <= {rhs}")]
    Unstable {
        subset: crate::border::SubsetId,
        lhs: f64,
        rhs: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("internal error: {0}")]
    Internal(String),
}
