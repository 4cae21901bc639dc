//! Border feasibility and allocation rules.
//!
//! Agents bid independently, agent `i` with probability `beta_i`. An
//! allocation rule fixes, for every nonempty bidder set `S`, a distribution
//! `p_i^S` over the winner. The induced interim probability `p_i` is the
//! chance agent `i` wins conditioned on bidding. Border's criterion says which
//! interim vectors are implementable; the flow network in [`flow`] turns the
//! criterion into a max-flow problem, optionally with upper bounds on
//! individual `p_i^S`.

mod flow;
mod solve;
mod types;

pub use flow::{max_flow, Dinic, FlowEdge, FlowNetwork, MaxFlow, Node, UNBOUNDED_CAPACITY};
pub use solve::{robust_border_rule, solve_allocation, symmetrize_rule, CutWitness};
pub use types::{
    all_subsets, nonempty_subsets, AllocationRule, BidRates, CapacityBounds, FairShares, InterimTarget, SubsetId,
    MAX_AGENTS,
};

use crate::error::{Error, Result};
use crate::TOL;

/// `Pr(S' = S)` for the product measure where each `i` bids w.p. `beta_i`.
pub fn subset_probability(rates: &BidRates, s: SubsetId) -> f64 {
    rates
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, b)| if s.contains(i) { *b } else { 1.0 - b })
        .product()
}

/// Probabilities of every subset, indexed by mask.
pub fn subset_probabilities(rates: &BidRates) -> Vec<f64> {
    all_subsets(rates.len()).map(|s| subset_probability(rates, s)).collect()
}

/// Probability that exactly the agents of `s` bid among everyone but `agent`.
fn opponent_probability(rates: &[f64], s: SubsetId, agent: usize) -> f64 {
    rates
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != agent)
        .map(|(j, b)| if s.contains(j) { *b } else { 1.0 - b })
        .product()
}

/// `1 - prod_{i in set} (1 - beta_i)`: chance that someone in `set` bids.
pub fn some_bidder_probability(rates: &[f64], set: SubsetId) -> f64 {
    1.0 - set.members().map(|i| 1.0 - rates[i]).product::<f64>()
}

/// Interim win probabilities induced by `rule` when opponents bid
/// independently at `rates`.
pub fn induced_interim(rule: &AllocationRule, rates: &BidRates) -> Result<InterimTarget> {
    let n = rates.len();
    if rule.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rule.n(),
        });
    }
    let r = rates.as_slice();
    let p = (0..n)
        .map(|i| {
            nonempty_subsets(n)
                .filter(|s| s.contains(i))
                .map(|s| rule.prob(s, i) * opponent_probability(r, s, i))
                .sum()
        })
        .collect();
    Ok(InterimTarget::new_unchecked(p))
}

/// Win probability of `agent`, conditioned on bidding, when the set of other
/// bidders is drawn from `opponents` (pairs of subset and probability; the
/// subsets must not contain `agent`).
pub fn induced_interim_general(rule: &AllocationRule, opponents: &[(SubsetId, f64)], agent: usize) -> Result<f64> {
    if agent >= rule.n() {
        return Err(Error::DimensionMismatch {
            expected: rule.n(),
            found: agent + 1,
        });
    }
    let mut total = 0.0;
    let mut p = 0.0;
    for &(others, weight) in opponents {
        if others.contains(agent) || others.mask() >> rule.n() != 0 {
            return Err(Error::InvalidRule(format!(
                "opponent set {others} is not a subset of the other agents"
            )));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::OutOfRange {
                name: "opponent set probability",
                value: weight,
                range: "[0, 1]",
            });
        }
        total += weight;
        p += weight * rule.prob(others.with(agent), agent);
    }
    if (total - 1.0).abs() > TOL {
        return Err(Error::InvalidRule(format!("opponent distribution sums to {total}")));
    }
    Ok(p)
}

/// The product distribution over opponent sets for `agent`.
pub fn product_opponents(rates: &BidRates, agent: usize) -> Vec<(SubsetId, f64)> {
    let r = rates.as_slice();
    all_subsets(rates.len())
        .filter(|s| !s.contains(agent))
        .map(|s| (s, opponent_probability(r, s, agent)))
        .collect()
}

/// Outcome of checking Border's criterion.
#[derive(Clone, Debug, PartialEq)]
pub enum BorderVerdict {
    Feasible,
    /// `sum_i p_i beta_i` differs from `Pr(someone bids)`.
    EqualityViolated { lhs: f64, rhs: f64 },
    /// The set `subset` demands more than the chance one of its members bids.
    Violated { subset: SubsetId, lhs: f64, rhs: f64 },
}

impl BorderVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, BorderVerdict::Feasible)
    }
}

/// Checks the no-waste equality and every subset inequality; reports the
/// most violated subset when one fails.
pub fn border_feasible(rates: &BidRates, target: &InterimTarget) -> Result<BorderVerdict> {
    let n = rates.len();
    target.check_len(n)?;
    let r = rates.as_slice();
    let p = target.as_slice();

    let lhs: f64 = (0..n).map(|i| p[i] * r[i]).sum();
    let rhs = some_bidder_probability(r, SubsetId::full(n));
    if (lhs - rhs).abs() > TOL {
        return Ok(BorderVerdict::EqualityViolated { lhs, rhs });
    }

    let mut worst: Option<(SubsetId, f64, f64)> = None;
    for s in nonempty_subsets(n) {
        let lhs: f64 = s.members().map(|i| p[i] * r[i]).sum();
        let rhs = some_bidder_probability(r, s);
        if lhs - rhs > TOL && worst.is_none_or(|(_, l, r)| lhs - rhs > l - r) {
            worst = Some((s, lhs, rhs));
        }
    }
    Ok(match worst {
        Some((subset, lhs, rhs)) => BorderVerdict::Violated { subset, lhs, rhs },
        None => BorderVerdict::Feasible,
    })
}

/// Common interim probability `1 - prod_j (1 - alpha_j)` achievable by every
/// agent at once.
pub fn worst_case_interim(shares: &FairShares) -> InterimTarget {
    let n = shares.len();
    let value = some_bidder_probability(shares.as_slice(), SubsetId::full(n));
    InterimTarget::new_unchecked(vec![value; n])
}

/// Bid rates `gamma * alpha_i`.
pub fn proportional_rates(shares: &FairShares, gamma: f64) -> Result<BidRates> {
    let max_share = shares.as_slice().iter().cloned().fold(0.0, f64::max);
    if gamma <= 0.0 || gamma * max_share > 1.0 + 1e-12 {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
            range: "(0, min_i 1/alpha_i]",
        });
    }
    BidRates::new(shares.as_slice().iter().map(|a| (gamma * a).min(1.0)).collect())
}

/// Common interim probability `(1 - prod_j (1 - gamma alpha_j)) / gamma` for
/// bid rates scaled by `gamma`.
pub fn proportional_interim(shares: &FairShares, gamma: f64) -> Result<InterimTarget> {
    let rates = proportional_rates(shares, gamma)?;
    let value = some_bidder_probability(rates.as_slice(), SubsetId::full(rates.len())) / gamma;
    Ok(InterimTarget::new_unchecked(vec![value; shares.len()]))
}

/// `a_I = (1 - prod_{i in I}(1 - alpha_i)) / sum_{i in I} alpha_i`.
pub fn border_monotone_ratio(rates: &[f64], set: SubsetId) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidRule("ratio undefined for the empty set".into()));
    }
    let sum: f64 = set.members().map(|i| rates[i]).sum();
    Ok(some_bidder_probability(rates, set) / sum)
}

/// Margin `1 - LHS` of the bounded Border inequality for agent set `set`,
/// evaluated at the subset family that maximizes the left side: every `S`
/// meeting `set` whose bounded members cannot absorb all of `S`'s mass.
///
/// Nonnegative margins for every `set` (together with the no-waste equality)
/// are equivalent to existence of a rule obeying `bounds`.
pub fn generalized_border_condition(
    rates: &BidRates,
    target: &InterimTarget,
    bounds: &CapacityBounds,
    set: SubsetId,
) -> Result<f64> {
    let n = rates.len();
    target.check_len(n)?;
    let r = rates.as_slice();
    let p = target.as_slice();

    let mut lhs: f64 = set.members().map(|i| p[i] * r[i]).sum();
    lhs += set.members().map(|i| 1.0 - r[i]).product::<f64>();
    for s in nonempty_subsets(n) {
        let meet = s.intersect(set);
        if meet.is_empty() {
            continue;
        }
        let absorbed: f64 = meet.members().map(|i| bounds.get(s, i).unwrap_or(f64::INFINITY)).sum();
        let slack = 1.0 - absorbed;
        if slack > 0.0 {
            lhs += subset_probability(rates, s) * slack;
        }
    }
    Ok(1.0 - lhs)
}
