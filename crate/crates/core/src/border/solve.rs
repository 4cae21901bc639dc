use std::collections::HashMap;
use std::fmt;

use super::flow::{max_flow, FlowNetwork, Node};
use super::types::{nonempty_subsets, AllocationRule, BidRates, CapacityBounds, FairShares, InterimTarget, SubsetId};
use super::{subset_probabilities, worst_case_interim};
use crate::error::{Error, Result};
use crate::TOL;

/// A minimum cut showing that `agents` demand more than their bidder sets
/// can supply.
#[derive(Clone, Debug, PartialEq)]
pub struct CutWitness {
    /// Agents on the sink side of the cut.
    pub agents: SubsetId,
    /// Bidder sets on the source side that still feed `agents` through
    /// bounded edges.
    pub family: Vec<SubsetId>,
    /// `sum_{i in agents} p_i beta_i`.
    pub demand: f64,
    /// Capacity available to `agents` across the cut.
    pub supply: f64,
}

impl fmt::Display for CutWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "agents {} demand {:.12} but at most {:.12} is available",
            self.agents, self.demand, self.supply
        )?;
        if !self.family.is_empty() {
            let family: Vec<String> = self.family.iter().map(ToString::to_string).collect();
            write!(f, " (bounded sets: {})", family.join(" "))?;
        }
        Ok(())
    }
}

/// Finds a rule whose interim probabilities match `target` and which obeys
/// `bounds`, or returns the violated cut.
pub fn solve_allocation(rates: &BidRates, target: &InterimTarget, bounds: &CapacityBounds) -> Result<AllocationRule> {
    let net = FlowNetwork::build(rates, target, bounds)?;
    let flow = max_flow(&net);
    let n = rates.len();

    if net.demand() - flow.value > TOL {
        return Err(Error::Infeasible(witness(&net, &flow.source_side, rates, target, bounds)));
    }

    let pr = subset_probabilities(rates);
    let mut rows = vec![Vec::new(); 1 << n];
    for s in nonempty_subsets(n) {
        let caps: Vec<f64> = s.members().map(|i| bounds.get(s, i).unwrap_or(1.0)).collect();
        let inflow: Vec<f64> = s.members().map(|i| flow.flows[net.middle_edge(s, i)]).collect();
        rows[s.mask() as usize] = extract_row(pr[s.mask() as usize], &inflow, &caps);
    }
    let rule = AllocationRule::from_rows_unchecked(n, rows);
    rule.validate()
        .map_err(|e| Error::Internal(format!("extracted rule is invalid: {e}")))?;
    Ok(rule)
}

/// Converts middle-edge flows of one bidder set into a winner distribution,
/// topping up rounding shortfalls without exceeding `caps`.
fn extract_row(prob: f64, inflow: &[f64], caps: &[f64]) -> Vec<f64> {
    let total_in: f64 = inflow.iter().sum();
    if prob <= 0.0 || total_in <= 0.0 {
        let cap_sum: f64 = caps.iter().sum();
        return caps.iter().map(|c| c / cap_sum).collect();
    }
    let mut row: Vec<f64> = inflow.iter().zip(caps).map(|(f, c)| (f / prob).min(*c)).collect();
    let sum: f64 = row.iter().sum();
    if sum > 1.0 {
        row.iter_mut().for_each(|p| *p /= sum);
        return row;
    }
    let missing = 1.0 - sum;
    let headroom: Vec<f64> = row.iter().zip(caps).map(|(p, c)| (c - p).max(0.0)).collect();
    let room: f64 = headroom.iter().sum();
    if room > 0.0 {
        let share = (missing / room).min(1.0);
        row.iter_mut().zip(&headroom).for_each(|(p, h)| *p += h * share);
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > 0.0 && sum > 0.0 {
        row.iter_mut().for_each(|p| *p /= sum);
    }
    row
}

fn witness(
    net: &FlowNetwork,
    source_side: &[bool],
    rates: &BidRates,
    target: &InterimTarget,
    bounds: &CapacityBounds,
) -> CutWitness {
    let n = rates.len();
    let agents = SubsetId::from_agents((0..n).filter(|&i| !source_side[net.index(Node::Agent(i))]));
    let pr = subset_probabilities(rates);
    let demand = agents
        .members()
        .map(|i| target.as_slice()[i] * rates.as_slice()[i])
        .sum();
    let mut supply = 0.0;
    let mut family = Vec::new();
    for s in nonempty_subsets(n) {
        let meet = s.intersect(agents);
        if meet.is_empty() {
            continue;
        }
        if source_side[net.index(Node::Subset(s))] {
            family.push(s);
            supply += meet
                .members()
                .map(|i| bounds.get(s, i).map_or(1.0, |b| b * pr[s.mask() as usize]))
                .sum::<f64>();
        } else {
            supply += pr[s.mask() as usize];
        }
    }
    CutWitness {
        agents,
        family,
        demand,
        supply,
    }
}

/// The rule achieving `1 - prod_j (1 - alpha_j)` for every agent while
/// capping each two-way tie at `(1 + alpha_other) / 2`. Agents with equal
/// shares are treated identically.
pub fn robust_border_rule(shares: &FairShares) -> Result<AllocationRule> {
    let rates = shares.to_rates();
    let bounds = CapacityBounds::robust_doubletons(shares);
    let rule = solve_allocation(&rates, &worst_case_interim(shares), &bounds).map_err(|e| match e {
        Error::Infeasible(w) => Error::Internal(format!("robust rule must exist but the solver found a cut: {w}")),
        other => other,
    })?;
    Ok(symmetrize_rule(&rule, shares))
}

/// Averages `rule` over all permutations of agents whose shares agree to
/// within `1e-12`. Row sums, interim probabilities and share-dependent
/// bounds are preserved.
pub fn symmetrize_rule(rule: &AllocationRule, shares: &FairShares) -> AllocationRule {
    let n = rule.n();
    let class = share_classes(shares.as_slice());
    if class.iter().max().is_some_and(|&c| c + 1 == n) {
        return rule.clone();
    }
    let key = |s: SubsetId, i: usize| -> u128 {
        let mut counts = [0u8; 16];
        s.members().for_each(|j| counts[class[j]] += 1);
        counts
            .iter()
            .enumerate()
            .fold(class[i] as u128, |k, (c, &m)| k | (m as u128) << (8 + 5 * c))
    };
    let mut sums: HashMap<u128, (f64, u32)> = HashMap::new();
    for s in nonempty_subsets(n) {
        for i in s.members() {
            let e = sums.entry(key(s, i)).or_default();
            e.0 += rule.prob(s, i);
            e.1 += 1;
        }
    }
    let rows = super::types::all_subsets(n)
        .map(|s| {
            s.members()
                .map(|i| {
                    let (sum, count) = sums[&key(s, i)];
                    sum / count as f64
                })
                .collect()
        })
        .collect();
    AllocationRule::from_rows_unchecked(n, rows)
}

/// Groups agents with equal shares; returns a class index per agent.
fn share_classes(shares: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| shares[a].total_cmp(&shares[b]));
    let mut class = vec![0; shares.len()];
    let mut current = 0;
    for w in 1..order.len() {
        if (shares[order[w]] - shares[order[w - 1]]).abs() > 1e-12 {
            current += 1;
        }
        class[order[w]] = current;
    }
    class
}
