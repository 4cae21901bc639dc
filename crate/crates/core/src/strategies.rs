//! Bidding behaviours: honest threshold bidders, fixed behaviours, and
//! colluding adversaries that coordinate a set of agents.
//!
//! Strategies are immutable; all randomness comes from the stream the
//! simulator hands them, so one profile can drive many seeds in parallel.

use std::fmt::Debug;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::border::{FairShares, SubsetId};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::valuations::{ideal_bid_rule, BidProbabilityFunction, ValueDistribution};

/// What happened in a past round, visible to everyone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PublicRecord {
    pub bidders: SubsetId,
    pub winner: Option<usize>,
}

/// What a single agent knows when deciding whether to bid.
#[derive(Clone, Copy, Debug)]
pub struct Observation<'a> {
    pub agent: usize,
    /// 1-based round index.
    pub round: u64,
    pub value: f64,
    /// `None` when budgets are not enforced.
    pub tokens_remaining: Option<i64>,
    pub history: &'a [PublicRecord],
}

impl Observation<'_> {
    fn out_of_tokens(&self) -> bool {
        self.tokens_remaining.is_some_and(|t| t <= 0)
    }
}

/// What a coalition controller knows: its members' values and tokens, never
/// anyone else's current-round information.
#[derive(Clone, Debug)]
pub struct CoalitionView<'a> {
    pub round: u64,
    pub members: SubsetId,
    /// Indexed by agent; `None` for non-members.
    pub values: Vec<Option<f64>>,
    pub tokens_remaining: Vec<Option<i64>>,
    pub history: &'a [PublicRecord],
}

impl CoalitionView<'_> {
    fn can_bid(&self, agent: usize) -> bool {
        self.members.contains(agent) && !self.tokens_remaining[agent].is_some_and(|t| t <= 0)
    }
}

pub trait Strategy: Send + Sync + Debug {
    fn bid(&self, obs: &Observation<'_>, rng: &mut StreamRng) -> bool;
}

pub trait AdversaryController: Send + Sync + Debug {
    /// Bids for the whole coalition this round; must be a subset of
    /// `view.members`.
    fn bids(&self, view: &CoalitionView<'_>, rng: &mut StreamRng) -> SubsetId;
}

/// Claims the top `beta` quantile of its value distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdBidder {
    rule: BidProbabilityFunction,
}

impl ThresholdBidder {
    pub fn rule(&self) -> BidProbabilityFunction {
        self.rule
    }
}

impl Strategy for ThresholdBidder {
    fn bid(&self, obs: &Observation<'_>, rng: &mut StreamRng) -> bool {
        !obs.out_of_tokens() && self.rule.decide(obs.value, rng)
    }
}

/// The honest `beta`-aggressive strategy.
pub fn aggressive_strategy(beta: f64, dist: &ValueDistribution) -> Result<ThresholdBidder> {
    Ok(ThresholdBidder {
        rule: ideal_bid_rule(dist, beta)?,
    })
}

/// A `beta'`-aggressive deviation, over- or under-claiming relative to the
/// agent's budget.
pub fn threshold_deviation(beta_prime: f64, dist: &ValueDistribution) -> Result<ThresholdBidder> {
    aggressive_strategy(beta_prime, dist)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AlwaysBid;

impl Strategy for AlwaysBid {
    fn bid(&self, obs: &Observation<'_>, _: &mut StreamRng) -> bool {
        !obs.out_of_tokens()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NeverBid;

impl Strategy for NeverBid {
    fn bid(&self, _: &Observation<'_>, _: &mut StreamRng) -> bool {
        false
    }
}

pub fn always_bid() -> AlwaysBid {
    AlwaysBid
}

pub fn never_bid() -> NeverBid {
    NeverBid
}

/// Everyone but `target` colludes: each round nobody bids with probability
/// `alpha_target`, otherwise exactly one `j` bids with probability
/// `alpha_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TurnTakingAdversary {
    target: usize,
    shares: Vec<f64>,
}

impl TurnTakingAdversary {
    pub fn target(&self) -> usize {
        self.target
    }

    pub fn coalition(&self) -> SubsetId {
        SubsetId::full(self.shares.len()).without(self.target)
    }
}

impl AdversaryController for TurnTakingAdversary {
    fn bids(&self, view: &CoalitionView<'_>, rng: &mut StreamRng) -> SubsetId {
        let mut u: f64 = rng.random();
        for (j, a) in self.shares.iter().enumerate() {
            if j == self.target {
                continue;
            }
            if u < *a {
                return if view.can_bid(j) {
                    SubsetId::singleton(j)
                } else {
                    SubsetId::EMPTY
                };
            }
            u -= a;
        }
        SubsetId::EMPTY
    }
}

pub fn turn_taking_adversary(target: usize, shares: &FairShares) -> Result<TurnTakingAdversary> {
    let n = shares.len();
    if n < 2 {
        return Err(Error::TooManyAgents(n));
    }
    if target >= n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: target + 1,
        });
    }
    Ok(TurnTakingAdversary {
        target,
        shares: shares.as_slice().to_vec(),
    })
}

/// Opponent-set distribution produced by [`TurnTakingAdversary`] against
/// `target`: the empty set with probability `alpha_target`, `{j}` with
/// probability `alpha_j`.
pub fn turn_taking_distribution(target: usize, shares: &FairShares) -> Vec<(SubsetId, f64)> {
    let a = shares.as_slice();
    std::iter::once((SubsetId::EMPTY, a[target]))
        .chain((0..a.len()).filter(|&j| j != target).map(|j| (SubsetId::singleton(j), a[j])))
        .collect()
}

/// Who controls each agent in a run.
#[derive(Debug)]
pub struct StrategyProfile {
    n: usize,
    individual: Vec<Option<Box<dyn Strategy>>>,
    coalition: Option<(SubsetId, Box<dyn AdversaryController>)>,
}

impl StrategyProfile {
    /// Every agent plays its own strategy.
    pub fn independent(strategies: Vec<Box<dyn Strategy>>) -> Result<Self> {
        let n = strategies.len();
        if n == 0 || n > crate::border::MAX_AGENTS {
            return Err(Error::TooManyAgents(n));
        }
        Ok(StrategyProfile {
            n,
            individual: strategies.into_iter().map(Some).collect(),
            coalition: None,
        })
    }

    /// Agents in `honest` play their own strategies; `coalition` is run by
    /// `controller`. Every agent must be covered exactly once.
    pub fn with_coalition(
        n: usize,
        honest: Vec<(usize, Box<dyn Strategy>)>,
        coalition: SubsetId,
        controller: Box<dyn AdversaryController>,
    ) -> Result<Self> {
        if n == 0 || n > crate::border::MAX_AGENTS {
            return Err(Error::TooManyAgents(n));
        }
        if coalition.is_empty() || !coalition.is_subset_of(SubsetId::full(n)) {
            return Err(Error::InvalidRule(format!("coalition {coalition} is not a nonempty set of agents")));
        }
        let mut individual: Vec<Option<Box<dyn Strategy>>> = (0..n).map(|_| None).collect();
        for (i, s) in honest {
            if i >= n || coalition.contains(i) || individual[i].is_some() {
                return Err(Error::InvalidRule(format!("agent {i} is controlled more than once or does not exist")));
            }
            individual[i] = Some(s);
        }
        if let Some(i) = (0..n).find(|&i| individual[i].is_none() && !coalition.contains(i)) {
            return Err(Error::InvalidRule(format!("agent {i} has no strategy")));
        }
        Ok(StrategyProfile {
            n,
            individual,
            coalition: Some((coalition, controller)),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn strategy(&self, agent: usize) -> Option<&dyn Strategy> {
        self.individual.get(agent).and_then(|s| s.as_deref())
    }

    pub fn coalition(&self) -> Option<(SubsetId, &dyn AdversaryController)> {
        self.coalition.as_ref().map(|(s, c)| (*s, c.as_ref()))
    }
}

/// Strategy as written in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    /// Honest bidding; `beta` defaults to the agent's bid rate.
    Aggressive {
        #[serde(default)]
        beta: Option<f64>,
    },
    Threshold {
        beta: f64,
    },
    Always,
    Never,
    /// Every other agent colludes against `target`.
    TurnTaking {
        target: usize,
    },
}

impl StrategySpec {
    /// Builds an individual strategy; `None` for coalition specs.
    pub fn build(&self, default_beta: f64, dist: &ValueDistribution) -> Result<Option<Box<dyn Strategy>>> {
        Ok(match self {
            StrategySpec::Aggressive { beta } => Some(Box::new(aggressive_strategy(beta.unwrap_or(default_beta), dist)?)),
            StrategySpec::Threshold { beta } => Some(Box::new(threshold_deviation(*beta, dist)?)),
            StrategySpec::Always => Some(Box::new(always_bid())),
            StrategySpec::Never => Some(Box::new(never_bid())),
            StrategySpec::TurnTaking { .. } => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::border::{induced_interim_general, AllocationRule};
    use crate::rng::{stream, Stream};

    fn obs(value: f64, tokens: Option<i64>) -> Observation<'static> {
        Observation {
            agent: 0,
            round: 1,
            value,
            tokens_remaining: tokens,
            history: &[],
        }
    }

    #[test]
    fn aggressive_bernoulli_bids_on_high_values() {
        let dist = ValueDistribution::bernoulli(0.3).unwrap();
        let s = aggressive_strategy(0.3, &dist).unwrap();
        let mut rng = stream(1, Stream::Strategy(0));
        for _ in 0..1000 {
            assert!(s.bid(&obs(1.0, Some(5)), &mut rng));
            assert!(!s.bid(&obs(0.0, Some(5)), &mut rng));
        }
        assert!(!s.bid(&obs(1.0, Some(0)), &mut rng));
        assert!(s.bid(&obs(1.0, None), &mut rng));
    }

    #[test]
    fn aggressive_uniform_threshold() {
        let s = aggressive_strategy(0.25, &ValueDistribution::uniform01()).unwrap();
        let mut rng = stream(1, Stream::Strategy(0));
        assert!(s.bid(&obs(0.76, Some(1)), &mut rng));
        assert!(!s.bid(&obs(0.74, Some(1)), &mut rng));
    }

    fn empirical_rate(s: &dyn Strategy, dist: &ValueDistribution, rounds: usize) -> f64 {
        let mut values = stream(7, Stream::Values(0));
        let mut rng = stream(7, Stream::Strategy(0));
        let bids = (0..rounds)
            .filter(|_| s.bid(&obs(dist.sample(&mut values), None), &mut rng))
            .count();
        bids as f64 / rounds as f64
    }

    #[test]
    fn empirical_bid_rates() {
        for dist in [
            ValueDistribution::bernoulli(0.5).unwrap(),
            ValueDistribution::uniform01(),
            ValueDistribution::discrete(vec![0.0, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap(),
        ] {
            let beta = 0.4;
            let honest = aggressive_strategy(beta, &dist).unwrap();
            assert!((empirical_rate(&honest, &dist, 100_000) - beta).abs() < 0.005, "{dist}");
            let half = threshold_deviation(beta / 2.0, &dist).unwrap();
            assert!((empirical_rate(&half, &dist, 100_000) - beta / 2.0).abs() < 0.005, "{dist}");
        }
    }

    #[test]
    fn deviation_at_own_rate_is_honest() {
        let dist = ValueDistribution::bernoulli(0.6).unwrap();
        assert_eq!(threshold_deviation(0.2, &dist).unwrap(), aggressive_strategy(0.2, &dist).unwrap());
        let greedy = threshold_deviation(1.0, &dist).unwrap();
        let mut rng = stream(3, Stream::Strategy(0));
        assert!(greedy.bid(&obs(0.0, Some(1)), &mut rng));
        assert!(!greedy.bid(&obs(1.0, Some(0)), &mut rng));
    }

    #[test]
    fn fixed_strategies() {
        let mut rng = stream(0, Stream::Strategy(0));
        assert!(always_bid().bid(&obs(0.0, Some(1)), &mut rng));
        assert!(!always_bid().bid(&obs(0.0, Some(0)), &mut rng));
        assert!(!never_bid().bid(&obs(1.0, None), &mut rng));
    }

    fn view(n: usize, coalition: SubsetId, tokens: Option<i64>) -> CoalitionView<'static> {
        CoalitionView {
            round: 1,
            members: coalition,
            values: (0..n).map(|j| coalition.contains(j).then_some(0.0)).collect(),
            tokens_remaining: vec![tokens; n],
            history: &[],
        }
    }

    #[test]
    fn turn_taking_rates_and_exclusivity() {
        let shares = FairShares::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let adv = turn_taking_adversary(0, &shares).unwrap();
        let v = view(4, adv.coalition(), Some(10));
        let mut rng = stream(11, Stream::Adversary);
        let rounds = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..rounds {
            let b = adv.bids(&v, &mut rng);
            assert!(b.len() <= 1 && !b.contains(0));
            b.members().for_each(|j| counts[j] += 1);
        }
        for (count, share) in counts.iter().zip(shares.as_slice()).skip(1) {
            let rate = *count as f64 / rounds as f64;
            assert!((rate - share).abs() < 0.005);
        }
    }

    #[test]
    fn turn_taking_two_agents_and_exhaustion() {
        let shares = FairShares::new(vec![0.3, 0.7]).unwrap();
        let adv = turn_taking_adversary(0, &shares).unwrap();
        let mut rng = stream(5, Stream::Adversary);
        let dry = view(2, adv.coalition(), Some(0));
        assert!((0..100).all(|_| adv.bids(&dry, &mut rng).is_empty()));
        assert!(turn_taking_adversary(0, &FairShares::new(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn turn_taking_distribution_matches_upper_bound() {
        let n = 5;
        let shares = FairShares::symmetric(n).unwrap();
        let rule = crate::experiments::counterexample_rule(n).unwrap();
        let nu = turn_taking_distribution(0, &shares);
        let p = induced_interim_general(&rule, &nu, 0).unwrap();
        let bound = crate::robustcert::anticorrelated_upper_bound(&rule, &shares, 0).unwrap();
        assert!((p - bound).abs() < 1e-15);
        assert!((p - 0.36).abs() < 1e-15);
        let uniform = AllocationRule::uniform(n);
        let p = induced_interim_general(&uniform, &nu, 0).unwrap();
        assert!((p - 0.6).abs() < 1e-15);
    }

    #[test]
    fn profile_validation() {
        let shares = FairShares::symmetric(3).unwrap();
        let adv = || Box::new(turn_taking_adversary(0, &shares).unwrap()) as Box<dyn AdversaryController>;
        let coalition = SubsetId::pair(1, 2);
        assert!(StrategyProfile::with_coalition(3, vec![(0, Box::new(AlwaysBid))], coalition, adv()).is_ok());
        assert!(StrategyProfile::with_coalition(3, vec![], coalition, adv()).is_err());
        assert!(StrategyProfile::with_coalition(3, vec![(0, Box::new(AlwaysBid)), (1, Box::new(NeverBid))], coalition, adv()).is_err());
        assert!(StrategyProfile::independent(vec![]).is_err());
        let p = StrategyProfile::independent(vec![Box::new(AlwaysBid), Box::new(NeverBid)]).unwrap();
        assert_eq!(p.n(), 2);
        assert!(p.coalition().is_none() && p.strategy(1).is_some());
    }

    #[test]
    fn strategy_config_parsing() {
        let s: StrategySpec = serde_json::from_str(r#"{"kind":"aggressive","beta":0.333}"#).unwrap();
        assert_eq!(s, StrategySpec::Aggressive { beta: Some(0.333) });
        let s: StrategySpec = serde_json::from_str(r#"{"kind":"turn_taking","target":0}"#).unwrap();
        assert_eq!(s, StrategySpec::TurnTaking { target: 0 });
        let s: StrategySpec = serde_json::from_str(r#"{"kind":"aggressive"}"#).unwrap();
        assert!(s.build(0.5, &ValueDistribution::uniform01()).unwrap().is_some());
        assert!(serde_json::from_str::<StrategySpec>(r#"{"kind":"sneaky"}"#).is_err());
    }
}
