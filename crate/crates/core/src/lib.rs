//! Robust-equilibrium allocation rules for repeated allocation without money.
//!
//! Agents hold fair shares `alpha_i` of a repeatedly allocated item and spend
//! all-pay bid tokens to request it. When a set `S` of agents bids, the
//! mechanism picks a winner according to an allocation rule `p_i^S`. This
//! crate computes such rules by max-flow on (capacity-modified) Border flow
//! networks, certifies the inequalities that make the doubleton-capped rule
//! half-robust, and simulates the budgeted mechanism under honest,
//! deviating and colluding strategies.
//!
//! Module map:
//!
//! - [`valuations`]: value distributions and ideal utility `v*(beta)`.
//! - [`border`]: Border feasibility, flow networks and allocation-rule solving.
//! - [`robustcert`]: closed-form robustness certificates and bounds.
//! - [`mechanism`]: the budgeted round-by-round mechanism simulator.
//! - [`strategies`]: bidding behaviours and colluding adversaries.
//! - [`dmmf`]: dynamic max-min fairness and its ergodic rule construction.
//! - [`experiments`]: configs, presets and the command layer behind `brb`.

pub mod border;
pub mod dmmf;
pub mod error;
pub mod experiments;
pub mod mechanism;
pub mod rng;
pub mod robustcert;
pub mod strategies;
pub mod valuations;

pub use border::{
    AllocationRule, BidRates, BorderVerdict, CapacityBounds, CutWitness, FairShares, FlowNetwork,
    InterimTarget, SubsetId,
};
pub use error::{Error, Result};
pub use valuations::{BidProbabilityFunction, ValueDistribution};

/// Additive tolerance used for probability identities throughout the crate.
pub const TOL: f64 = 1e-9;
