//! Dynamic max-min fairness and the allocation rules it induces.
//!
//! Each round every agent bids independently with probability `beta_i` and
//! the item goes to the bidder with the fewest wins relative to its share,
//! `W_i / alpha_i`, ties broken uniformly. Recording, for every possible
//! bidder set, who would have won turns a long run into an allocation rule
//! whose interim probabilities approach `p_i = alpha_i (1 - prod(1 - beta)) /
//! beta_i`.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::border::{
    all_subsets, border_feasible, nonempty_subsets, some_bidder_probability, AllocationRule, BidRates,
    BorderVerdict, CutWitness, FairShares, InterimTarget, SubsetId,
};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream, StreamRng};

#[derive(Clone, Debug, PartialEq)]
pub struct DmmfState {
    shares: Vec<f64>,
    pub wins: Vec<u64>,
}

impl DmmfState {
    pub fn new(shares: &FairShares) -> Self {
        DmmfState {
            shares: shares.as_slice().to_vec(),
            wins: vec![0; shares.len()],
        }
    }

    /// `W_i / alpha_i`.
    pub fn normalized(&self) -> Vec<f64> {
        self.wins.iter().zip(&self.shares).map(|(&w, a)| w as f64 / a).collect()
    }

    /// `Y_i = W_i / alpha_i - sum_j W_j`; satisfies `sum_i alpha_i Y_i = 0`.
    pub fn diagnostic(&self) -> Vec<f64> {
        let total: u64 = self.wins.iter().sum();
        self.normalized().into_iter().map(|x| x - total as f64).collect()
    }

    /// All agents ordered by normalized wins, ties in random order. The
    /// winner for any bidder set is its earliest member in this order.
    fn ranking(&self, rng: &mut StreamRng) -> Vec<u8> {
        let keys: Vec<(f64, f64)> = self.normalized().into_iter().map(|x| (x, rng.random())).collect();
        let mut order: Vec<u8> = (0..self.shares.len() as u8).collect();
        order.sort_by(|&a, &b| {
            let (ka, kb) = (keys[a as usize], keys[b as usize]);
            ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
        });
        order
    }
}

fn winner_in(ranking: &[u8], s: SubsetId) -> Option<usize> {
    ranking.iter().map(|&i| i as usize).find(|&i| s.contains(i))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DmmfRun {
    pub state: DmmfState,
    pub rounds: u64,
    /// `(t, W[t])` every `thin` rounds and at the end.
    pub trace: Vec<(u64, Vec<u64>)>,
}

impl DmmfRun {
    /// `W_i[T] / T`.
    pub fn win_fractions(&self) -> Vec<f64> {
        self.state.wins.iter().map(|&w| w as f64 / self.rounds as f64).collect()
    }

    /// `t,W_0,..` rows.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t");
        (0..self.state.wins.len()).for_each(|i| {
            let _ = write!(out, ",W_{i}");
        });
        out.push('\n');
        for (t, w) in &self.trace {
            let _ = write!(out, "{t}");
            w.iter().for_each(|x| {
                let _ = write!(out, ",{x}");
            });
            out.push('\n');
        }
        out
    }
}

/// Long-run win fraction `alpha_i (1 - prod_j (1 - beta_j))`.
pub fn limiting_win_fractions(shares: &FairShares, rates: &BidRates) -> Vec<f64> {
    let any = some_bidder_probability(rates.as_slice(), SubsetId::full(rates.len()));
    shares.as_slice().iter().map(|a| a * any).collect()
}

fn check_dims(shares: &FairShares, n: usize) -> Result<()> {
    if shares.len() != n {
        return Err(Error::DimensionMismatch {
            expected: shares.len(),
            found: n,
        });
    }
    Ok(())
}

struct Chain {
    state: DmmfState,
    bidding: Vec<StreamRng>,
    ties: StreamRng,
    rates: Vec<f64>,
}

impl Chain {
    fn new(shares: &FairShares, rates: &BidRates, seed: u64) -> Self {
        Chain {
            state: DmmfState::new(shares),
            bidding: (0..shares.len()).map(|i| stream(seed, Stream::Bidding(i))).collect(),
            ties: stream(seed, Stream::TieBreak),
            rates: rates.as_slice().to_vec(),
        }
    }

    /// Plays one round and returns the ranking used.
    fn step(&mut self) -> Vec<u8> {
        let bidders = SubsetId::from_agents(
            self.bidding
                .iter_mut()
                .zip(&self.rates)
                .enumerate()
                .filter_map(|(i, (rng, b))| (rng.random::<f64>() < *b).then_some(i)),
        );
        let ranking = self.state.ranking(&mut self.ties);
        if let Some(w) = winner_in(&ranking, bidders) {
            self.state.wins[w] += 1;
        }
        ranking
    }
}

/// Simulates `horizon` rounds, keeping a snapshot every `thin` rounds
/// (`0` keeps only the final state).
pub fn run_dmmf(shares: &FairShares, rates: &BidRates, horizon: u64, seed: u64, thin: u64) -> Result<DmmfRun> {
    check_dims(shares, rates.len())?;
    let mut chain = Chain::new(shares, rates, seed);
    let mut trace = Vec::new();
    for t in 1..=horizon {
        chain.step();
        if (thin > 0 && t % thin == 0) || t == horizon {
            trace.push((t, chain.state.wins.clone()));
        }
    }
    Ok(DmmfRun {
        state: chain.state,
        rounds: horizon,
        trace,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityCheck {
    pub subset: SubsetId,
    /// `(1 - prod_{i in I}(1 - beta_i)) / sum_{i in I} alpha_i`.
    pub lhs: f64,
    /// `1 - prod_j (1 - beta_j)`.
    pub rhs: f64,
    pub stable: bool,
}

/// Strict stability condition for every proper nonempty agent set. Rates
/// are taken raw so that degenerate zero rates can be examined.
pub fn subgroup_stability(shares: &FairShares, rates: &[f64]) -> Result<Vec<StabilityCheck>> {
    let n = shares.len();
    check_dims(shares, rates.len())?;
    let a = shares.as_slice();
    let rhs = some_bidder_probability(rates, SubsetId::full(n));
    Ok(nonempty_subsets(n)
        .filter(|s| s.len() < n)
        .map(|s| {
            let lhs = some_bidder_probability(rates, s) / s.members().map(|i| a[i]).sum::<f64>();
            StabilityCheck {
                subset: s,
                lhs,
                rhs,
                stable: lhs > rhs,
            }
        })
        .collect())
}

/// Hypothetical-winner counts `counts[S][k]` for the `k`-th member of `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct DmmfRuleEstimate {
    n: usize,
    pub shares: FairShares,
    pub counts: Vec<Vec<u64>>,
    pub rounds: u64,
}

impl DmmfRuleEstimate {
    pub fn count(&self, s: SubsetId, agent: usize) -> u64 {
        if s.contains(agent) {
            self.counts[s.mask() as usize][s.rank_of(agent)]
        } else {
            0
        }
    }

    pub fn to_rule(&self) -> Result<AllocationRule> {
        let rounds = self.rounds as f64;
        AllocationRule::from_fn(self.n, |s, i| self.count(s, i) as f64 / rounds)
    }
}

/// Shares under which DMMF's long-run rule implements `target`:
/// `alpha_i = beta_i p_i / (1 - prod_j (1 - beta_j))`.
pub fn derived_shares(rates: &BidRates, target: &InterimTarget) -> Result<FairShares> {
    let r = rates.as_slice();
    let any = some_bidder_probability(r, SubsetId::full(r.len()));
    let raw: Vec<f64> = r.iter().zip(target.as_slice()).map(|(b, p)| b * p / any).collect();
    let total: f64 = raw.iter().sum();
    FairShares::new(raw.iter().map(|x| x / total).collect())
}

/// Estimates a rule implementing `target` by running DMMF for `horizon`
/// rounds. The target must be Border-feasible and the derived shares must
/// be stable.
pub fn derive_rule_via_dmmf(rates: &BidRates, target: &InterimTarget, horizon: u64, seed: u64) -> Result<DmmfRuleEstimate> {
    match border_feasible(rates, target)? {
        BorderVerdict::Feasible => {}
        BorderVerdict::EqualityViolated { lhs, rhs } => return Err(Error::BorderEquality { lhs, rhs }),
        BorderVerdict::Violated { subset, lhs, rhs } => {
            return Err(Error::Infeasible(CutWitness {
                agents: subset,
                family: Vec::new(),
                demand: lhs,
                supply: rhs,
            }))
        }
    }
    let shares = derived_shares(rates, target)?;
    if let Some(bad) = subgroup_stability(&shares, rates.as_slice())?.into_iter().find(|c| !c.stable) {
        return Err(Error::Unstable {
            subset: bad.subset,
            lhs: bad.lhs,
            rhs: bad.rhs,
        });
    }

    let n = rates.len();
    let mut chain = Chain::new(&shares, rates, seed);
    let mut rankings: HashMap<Vec<u8>, u64> = HashMap::new();
    for _ in 0..horizon {
        *rankings.entry(chain.step()).or_default() += 1;
    }

    let mut counts: Vec<Vec<u64>> = all_subsets(n).map(|s| vec![0; s.len()]).collect();
    for (ranking, times) in &rankings {
        for s in nonempty_subsets(n) {
            let w = winner_in(ranking, s).expect("nonempty subset has a winner");
            counts[s.mask() as usize][s.rank_of(w)] += times;
        }
    }
    Ok(DmmfRuleEstimate {
        n,
        shares,
        counts,
        rounds: horizon,
    })
}
