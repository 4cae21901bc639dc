//! Round-by-round simulator of the budgeted Border mechanism.
//!
//! Each agent receives `floor(beta_i (1 + delta_i) T)` bid tokens. In every
//! round agents privately draw values, bids are committed simultaneously,
//! blocked bids are dropped according to the budget mode, a winner is drawn
//! from the allocation rule for the remaining bidder set, and every bidder
//! pays one token whether or not it wins.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;

use crate::border::{AllocationRule, BidRates, FairShares, SubsetId};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream, StreamRng};
use crate::strategies::{CoalitionView, Observation, PublicRecord, StrategyProfile};
use crate::valuations::{ideal_utility, ValueDistribution};

/// How much headroom above `beta_i T` each budget gets.
#[derive(Clone, Debug, PartialEq)]
pub enum SlackMode {
    /// `sqrt(6 ln t / (beta_i t))`.
    Formula,
    /// A fixed `delta_i` per agent.
    Custom(Vec<f64>),
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetMode {
    /// A lifetime token budget; bids stop once it is spent.
    EndOfHorizon,
    /// A bid in round `t` is dropped once `beta_i (1 + delta_i^t) t` tokens
    /// have already been spent.
    Anytime,
    /// Budgets are tracked but never enforced. Diagnostic only.
    ExpectationOnly,
}

#[derive(Clone, Debug)]
pub struct MechanismConfig {
    pub shares: FairShares,
    pub rates: BidRates,
    pub values: Vec<ValueDistribution>,
    pub horizon: u64,
    pub slack: SlackMode,
    pub budget_mode: BudgetMode,
    pub rule: Arc<AllocationRule>,
    /// Keep every [`RoundOutcome`]; totals are always kept.
    pub record_rounds: bool,
}

impl MechanismConfig {
    /// Bid rates default to the fair shares, with formula slack and a
    /// lifetime budget.
    pub fn new(shares: FairShares, values: Vec<ValueDistribution>, rule: Arc<AllocationRule>, horizon: u64) -> Result<Self> {
        let config = MechanismConfig {
            rates: shares.to_rates(),
            shares,
            values,
            horizon,
            slack: SlackMode::Formula,
            budget_mode: BudgetMode::EndOfHorizon,
            rule,
            record_rounds: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_rates(mut self, rates: BidRates) -> Result<Self> {
        self.rates = rates;
        self.validate()?;
        Ok(self)
    }

    pub fn with_slack(mut self, slack: SlackMode) -> Result<Self> {
        self.slack = slack;
        self.validate()?;
        Ok(self)
    }

    pub fn with_budget_mode(mut self, mode: BudgetMode) -> Self {
        self.budget_mode = mode;
        self
    }

    pub fn recording(mut self, record: bool) -> Self {
        self.record_rounds = record;
        self
    }

    pub fn n(&self) -> usize {
        self.shares.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.shares.len();
        if self.horizon == 0 {
            return Err(Error::OutOfRange {
                name: "horizon",
                value: 0.0,
                range: ">= 1",
            });
        }
        for found in [self.rates.len(), self.values.len(), self.rule.n()] {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        if let SlackMode::Custom(d) = &self.slack {
            if d.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: d.len(),
                });
            }
            if let Some(x) = d.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
                return Err(Error::OutOfRange {
                    name: "slack",
                    value: *x,
                    range: "[0, inf)",
                });
            }
        }
        Ok(())
    }

    /// `delta_i` in force after `t` rounds.
    pub fn slack_at(&self, agent: usize, t: u64) -> f64 {
        match &self.slack {
            SlackMode::Formula => default_slack(self.rates.as_slice()[agent], t),
            SlackMode::Custom(d) => d[agent],
            SlackMode::Zero => 0.0,
        }
    }

    /// Lifetime budget `floor(beta_i (1 + delta_i^T) T)`.
    pub fn initial_tokens(&self, agent: usize) -> i64 {
        token_cap(self.rates.as_slice()[agent], self.slack_at(agent, self.horizon), self.horizon)
    }
}

fn token_cap(beta: f64, delta: f64, t: u64) -> i64 {
    (beta * (1.0 + delta) * t as f64 + 1e-9).floor() as i64
}

/// `sqrt(6 ln t / (beta t))`; zero for `t <= 1`.
pub fn default_slack(beta: f64, t: u64) -> f64 {
    if t <= 1 {
        return 0.0;
    }
    let t = t as f64;
    (6.0 * t.ln() / (beta * t)).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub t: u64,
    pub values: Vec<f64>,
    pub bids_submitted: SubsetId,
    pub bids_after_budget: SubsetId,
    pub winner: Option<usize>,
    /// Tokens left after this round's payments.
    pub tokens_remaining: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTrace {
    pub horizon: u64,
    pub initial_tokens: Vec<i64>,
    /// Empty unless the config asked for per-round records.
    pub outcomes: Vec<RoundOutcome>,
    pub cumulative_utility: Vec<f64>,
    pub cumulative_wins: Vec<u64>,
    /// Rounds in which each agent's bid went through.
    pub bids_placed: Vec<u64>,
    /// First round in which the agent could not bid: its lifetime budget
    /// was spent, or a submitted bid was dropped.
    pub budget_exhaustion_round: Vec<Option<u64>>,
    pub tokens_remaining: Vec<i64>,
}

impl SimulationTrace {
    pub fn n(&self) -> usize {
        self.cumulative_wins.len()
    }

    /// Wins per bid placed; `None` for agents that never bid.
    pub fn win_rate_when_bidding(&self, agent: usize) -> Option<f64> {
        let bids = self.bids_placed[agent];
        (bids > 0).then(|| self.cumulative_wins[agent] as f64 / bids as f64)
    }

    pub fn any_exhausted(&self) -> bool {
        self.budget_exhaustion_round.iter().any(Option::is_some)
    }
}

/// Runs the mechanism for `config.horizon` rounds. Identical inputs give
/// identical traces.
pub fn run(config: &MechanismConfig, profile: &StrategyProfile, seed: u64) -> Result<SimulationTrace> {
    config.validate()?;
    let n = config.n();
    if profile.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: profile.n(),
        });
    }
    let rates = config.rates.as_slice();
    let mut value_rngs: Vec<StreamRng> = (0..n).map(|i| stream(seed, Stream::Values(i))).collect();
    let mut strategy_rngs: Vec<StreamRng> = (0..n).map(|i| stream(seed, Stream::Strategy(i))).collect();
    let mut adversary_rng = stream(seed, Stream::Adversary);
    let mut winner_rng = stream(seed, Stream::Winner);

    let initial_tokens: Vec<i64> = (0..n).map(|i| config.initial_tokens(i)).collect();
    let mut tokens = initial_tokens.clone();
    let mut spent = vec![0i64; n];
    let mut utility = vec![0.0; n];
    let mut wins = vec![0u64; n];
    let mut exhausted: Vec<Option<u64>> = vec![None; n];
    let mut history: Vec<PublicRecord> = Vec::with_capacity(config.horizon as usize);
    let mut outcomes = Vec::new();
    let mut values = vec![0.0; n];
    let visible_tokens = |tokens: &[i64], i: usize| match config.budget_mode {
        BudgetMode::ExpectationOnly => None,
        _ => Some(tokens[i]),
    };

    for t in 1..=config.horizon {
        for (i, v) in values.iter_mut().enumerate() {
            *v = config.values[i].sample(&mut value_rngs[i]);
        }

        if config.budget_mode == BudgetMode::EndOfHorizon {
            for (i, e) in exhausted.iter_mut().enumerate() {
                if tokens[i] <= 0 && e.is_none() {
                    *e = Some(t);
                }
            }
        }

        let mut submitted = SubsetId::EMPTY;
        for i in 0..n {
            if let Some(strategy) = profile.strategy(i) {
                let obs = Observation {
                    agent: i,
                    round: t,
                    value: values[i],
                    tokens_remaining: visible_tokens(&tokens, i),
                    history: &history,
                };
                if strategy.bid(&obs, &mut strategy_rngs[i]) {
                    submitted = submitted.with(i);
                }
            }
        }
        if let Some((members, controller)) = profile.coalition() {
            let view = CoalitionView {
                round: t,
                members,
                values: (0..n).map(|j| members.contains(j).then_some(values[j])).collect(),
                tokens_remaining: (0..n)
                    .map(|j| if members.contains(j) { visible_tokens(&tokens, j) } else { None })
                    .collect(),
                history: &history,
            };
            submitted = SubsetId::new(submitted.mask() | controller.bids(&view, &mut adversary_rng).intersect(members).mask());
        }

        let mut admitted = submitted;
        for i in submitted.members() {
            let blocked = match config.budget_mode {
                BudgetMode::EndOfHorizon => tokens[i] <= 0,
                BudgetMode::Anytime => spent[i] as f64 >= rates[i] * (1.0 + config.slack_at(i, t)) * t as f64,
                BudgetMode::ExpectationOnly => false,
            };
            if blocked {
                admitted = admitted.without(i);
                exhausted[i].get_or_insert(t);
            }
        }

        let u: f64 = winner_rng.random();
        let winner = config.rule.pick(admitted, u);
        for i in admitted.members() {
            tokens[i] -= 1;
            spent[i] += 1;
        }
        if let Some(w) = winner {
            utility[w] += values[w];
            wins[w] += 1;
        }
        history.push(PublicRecord {
            bidders: admitted,
            winner,
        });
        if config.record_rounds {
            outcomes.push(RoundOutcome {
                t,
                values: values.clone(),
                bids_submitted: submitted,
                bids_after_budget: admitted,
                winner,
                tokens_remaining: tokens.clone(),
            });
        }
    }

    Ok(SimulationTrace {
        horizon: config.horizon,
        initial_tokens,
        outcomes,
        cumulative_utility: utility,
        cumulative_wins: wins,
        bids_placed: spent.iter().map(|&s| s as u64).collect(),
        budget_exhaustion_round: exhausted,
        tokens_remaining: tokens,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentUtility {
    pub avg_utility: f64,
    /// Average utility over `v*(alpha_i)`; `None` when `v*` is zero.
    pub ideal_fraction: Option<f64>,
}

pub fn utility_report(trace: &SimulationTrace, dists: &[ValueDistribution], shares: &FairShares) -> Result<Vec<AgentUtility>> {
    let n = trace.n();
    for found in [dists.len(), shares.len()] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    (0..n)
        .map(|i| {
            let avg_utility = trace.cumulative_utility[i] / trace.horizon as f64;
            let ideal = ideal_utility(&dists[i], shares.as_slice()[i])?;
            Ok(AgentUtility {
                avg_utility,
                ideal_fraction: (ideal > 0.0).then(|| avg_utility / ideal),
            })
        })
        .collect()
}

/// `t,winner,bidder_mask,v_0..,b_0..` with one line per recorded round.
pub fn trace_csv(trace: &SimulationTrace) -> String {
    let n = trace.n();
    let mut out = String::from("t,winner,bidder_mask");
    (0..n).for_each(|i| {
        let _ = write!(out, ",v_{i}");
    });
    (0..n).for_each(|i| {
        let _ = write!(out, ",b_{i}");
    });
    out.push('\n');
    for r in &trace.outcomes {
        let winner = r.winner.map(|w| w.to_string()).unwrap_or_default();
        let _ = write!(out, "{},{},{}", r.t, winner, r.bids_after_budget.mask());
        r.values.iter().for_each(|v| {
            let _ = write!(out, ",{v}");
        });
        r.tokens_remaining.iter().for_each(|b| {
            let _ = write!(out, ",{b}");
        });
        out.push('\n');
    }
    out
}

/// `agent,avg_utility,ideal_fraction,exhausted_at`.
pub fn summary_csv(report: &[AgentUtility], trace: &SimulationTrace) -> String {
    let mut out = String::from("agent,avg_utility,ideal_fraction,exhausted_at\n");
    for (i, r) in report.iter().enumerate() {
        let fraction = r.ideal_fraction.map(|f| format!("{f:.6}")).unwrap_or_default();
        let exhausted = trace.budget_exhaustion_round[i].map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{i},{:.6},{fraction},{exhausted}", r.avg_utility);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::border::robust_border_rule;
    use crate::strategies::{aggressive_strategy, always_bid, never_bid, Strategy};
    use proptest::prelude::*;

    fn boxed<S: Strategy + 'static>(s: S) -> Box<dyn Strategy> {
        Box::new(s)
    }

    #[test]
    fn slack_examples() {
        let t = 6f64.exp();
        let direct = (36.0 / t).sqrt();
        assert!((default_slack(1.0, t.round() as u64) - direct).abs() < 2e-4);
        assert!((default_slack(1.0, 403) - 0.2987).abs() < 1e-3);
        let direct = (6.0 * 1e5f64.ln() / 5e4).sqrt();
        assert!((default_slack(0.5, 100_000) - direct).abs() < 1e-15);
        assert!((default_slack(0.5, 100_000) - 0.03718).abs() < 5e-5);
        let grid: Vec<f64> = (3..200).map(|k| default_slack(0.3, k * 50)).collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(default_slack(0.3, 1), 0.0);
    }

    #[test]
    fn uncontested_single_agent() {
        let shares = FairShares::new(vec![1.0]).unwrap();
        let config = MechanismConfig::new(shares.clone(), vec![ValueDistribution::bernoulli(1.0).unwrap()], Arc::new(AllocationRule::uniform(1)), 100)
            .unwrap()
            .with_slack(SlackMode::Zero)
            .unwrap();
        let profile = StrategyProfile::independent(vec![boxed(always_bid())]).unwrap();
        let trace = run(&config, &profile, 1).unwrap();
        assert_eq!(trace.cumulative_wins, vec![100]);
        assert_eq!(trace.cumulative_utility, vec![100.0]);
        assert_eq!(trace.tokens_remaining, vec![0]);
        let report = utility_report(&trace, &config.values, &shares).unwrap();
        assert_eq!(report[0].ideal_fraction, Some(1.0));
    }

    #[test]
    fn silent_opponent_concedes_every_round() {
        let shares = FairShares::new(vec![0.4, 0.6]).unwrap();
        let dists = vec![ValueDistribution::uniform01(); 2];
        let config = MechanismConfig::new(shares, dists, Arc::new(AllocationRule::uniform(2)), 2000)
            .unwrap()
            .recording(true);
        let profile = StrategyProfile::independent(vec![boxed(aggressive_strategy(0.4, &ValueDistribution::uniform01()).unwrap()), boxed(never_bid())]).unwrap();
        let trace = run(&config, &profile, 9).unwrap();
        assert_eq!(trace.cumulative_wins[0], trace.bids_placed[0]);
        assert_eq!(trace.win_rate_when_bidding(0), Some(1.0));
        assert_eq!(trace.win_rate_when_bidding(1), None);
    }

    #[test]
    fn budget_caps_stop_always_bidders() {
        let shares = FairShares::symmetric(3).unwrap();
        let dists = vec![ValueDistribution::uniform01(); 3];
        let config = MechanismConfig::new(shares, dists, Arc::new(AllocationRule::uniform(3)), 3000).unwrap();
        let profile = StrategyProfile::independent(vec![boxed(always_bid()), boxed(always_bid()), boxed(always_bid())]).unwrap();
        let trace = run(&config, &profile, 2).unwrap();
        let cap = config.initial_tokens(0);
        assert!(cap < 3000 && cap > 1000);
        for i in 0..3 {
            assert_eq!(trace.bids_placed[i] as i64, cap);
            assert_eq!(trace.budget_exhaustion_round[i], Some(cap as u64 + 1));
            let share = trace.cumulative_wins[i] as f64 / cap as f64;
            assert!((share - 1.0 / 3.0).abs() < 0.03);
        }
    }

    #[test]
    fn expectation_only_never_blocks() {
        let shares = FairShares::new(vec![0.5, 0.5]).unwrap();
        let config = MechanismConfig::new(shares, vec![ValueDistribution::uniform01(); 2], Arc::new(AllocationRule::uniform(2)), 500)
            .unwrap()
            .with_budget_mode(BudgetMode::ExpectationOnly);
        let profile = StrategyProfile::independent(vec![boxed(always_bid()), boxed(always_bid())]).unwrap();
        let trace = run(&config, &profile, 4).unwrap();
        assert_eq!(trace.bids_placed, vec![500, 500]);
        assert!(!trace.any_exhausted());
        assert!(trace.tokens_remaining[0] < 0);
    }

    #[test]
    fn zero_utility_report() {
        let shares = FairShares::new(vec![0.5, 0.5]).unwrap();
        let dists = vec![ValueDistribution::bernoulli(0.5).unwrap(); 2];
        let config = MechanismConfig::new(shares.clone(), dists.clone(), Arc::new(AllocationRule::uniform(2)), 50).unwrap();
        let profile = StrategyProfile::independent(vec![boxed(never_bid()), boxed(never_bid())]).unwrap();
        let trace = run(&config, &profile, 0).unwrap();
        let report = utility_report(&trace, &dists, &shares).unwrap();
        assert!(report.iter().all(|r| r.ideal_fraction == Some(0.0)));
        let zero = vec![ValueDistribution::bernoulli(0.0).unwrap(); 2];
        assert_eq!(utility_report(&trace, &zero, &shares).unwrap()[0].ideal_fraction, None);
    }

    #[test]
    fn config_validation() {
        let shares = FairShares::symmetric(2).unwrap();
        let dists = vec![ValueDistribution::uniform01(); 2];
        let rule = Arc::new(AllocationRule::uniform(2));
        assert!(MechanismConfig::new(shares.clone(), dists.clone(), rule.clone(), 0).is_err());
        assert!(MechanismConfig::new(shares.clone(), dists[..1].to_vec(), rule.clone(), 10).is_err());
        assert!(MechanismConfig::new(shares.clone(), dists.clone(), Arc::new(AllocationRule::uniform(3)), 10).is_err());
        let c = MechanismConfig::new(shares, dists, rule, 10).unwrap();
        assert!(c.clone().with_slack(SlackMode::Custom(vec![0.1])).is_err());
        assert!(c.with_slack(SlackMode::Custom(vec![0.1, -1.0])).is_err());
    }

    #[test]
    fn csv_layout() {
        let shares = FairShares::new(vec![0.5, 0.5]).unwrap();
        let dists = vec![ValueDistribution::bernoulli(1.0).unwrap(); 2];
        let config = MechanismConfig::new(shares.clone(), dists.clone(), Arc::new(AllocationRule::uniform(2)), 3)
            .unwrap()
            .recording(true);
        let profile = StrategyProfile::independent(vec![boxed(always_bid()), boxed(never_bid())]).unwrap();
        let trace = run(&config, &profile, 0).unwrap();
        let csv = trace_csv(&trace);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,winner,bidder_mask,v_0,v_1,b_0,b_1");
        assert!(lines[1].starts_with("1,0,1,1,1,"));
        let report = utility_report(&trace, &dists, &shares).unwrap();
        let summary = summary_csv(&report, &trace);
        assert!(summary.starts_with("agent,avg_utility,ideal_fraction,exhausted_at\n0,1.000000,2.000000,"));
    }

    fn three_agent_setup(mode: BudgetMode, record: bool) -> (MechanismConfig, StrategyProfile) {
        let shares = FairShares::new(vec![0.2, 0.3, 0.5]).unwrap();
        let dists = vec![
            ValueDistribution::bernoulli(0.4).unwrap(),
            ValueDistribution::uniform01(),
            ValueDistribution::discrete(vec![0.5, 2.0], vec![0.5, 0.5]).unwrap(),
        ];
        let rule = Arc::new(robust_border_rule(&shares).unwrap());
        let profile = StrategyProfile::independent(vec![
            boxed(aggressive_strategy(0.35, &dists[0]).unwrap()),
            boxed(always_bid()),
            boxed(aggressive_strategy(0.5, &dists[2]).unwrap()),
        ])
        .unwrap();
        let config = MechanismConfig::new(shares, dists, rule, 400)
            .unwrap()
            .with_budget_mode(mode)
            .recording(record);
        (config, profile)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn trace_invariants(seed in any::<u64>(), mode in prop_oneof![Just(BudgetMode::EndOfHorizon), Just(BudgetMode::Anytime)]) {
            let (config, profile) = three_agent_setup(mode, true);
            let trace = run(&config, &profile, seed).unwrap();
            let mut tokens = trace.initial_tokens.clone();
            let mut spent = [0i64; 3];
            let mut utility = [0.0; 3];
            for r in &trace.outcomes {
                prop_assert!(r.bids_after_budget.is_subset_of(r.bids_submitted));
                match r.winner {
                    Some(w) => prop_assert!(r.bids_after_budget.contains(w)),
                    None => prop_assert!(r.bids_after_budget.is_empty()),
                }
                for i in r.bids_after_budget.members() {
                    tokens[i] -= 1;
                    spent[i] += 1;
                }
                prop_assert_eq!(&tokens, &r.tokens_remaining);
                for (i, s) in spent.iter().enumerate() {
                    prop_assert!(*s <= trace.initial_tokens[i] || mode == BudgetMode::Anytime);
                    if mode == BudgetMode::Anytime {
                        let cap = config.rates.as_slice()[i] * (1.0 + config.slack_at(i, r.t)) * r.t as f64;
                        prop_assert!((*s as f64) <= cap + 1.0);
                    }
                }
                if let Some(w) = r.winner {
                    utility[w] += r.values[w];
                }
            }
            for (u, c) in utility.iter().zip(&trace.cumulative_utility) {
                prop_assert!((u - c).abs() < 1e-9);
            }
            let rounds_with_winner = trace.outcomes.iter().filter(|r| r.winner.is_some()).count() as u64;
            prop_assert_eq!(trace.cumulative_wins.iter().sum::<u64>(), rounds_with_winner);
        }

        #[test]
        fn runs_are_deterministic(seed in any::<u64>()) {
            let (config, profile) = three_agent_setup(BudgetMode::EndOfHorizon, true);
            prop_assert_eq!(run(&config, &profile, seed).unwrap(), run(&config, &profile, seed).unwrap());
        }
    }

    #[test]
    fn values_do_not_depend_on_opponents() {
        let (config, profile) = three_agent_setup(BudgetMode::EndOfHorizon, true);
        let quiet = StrategyProfile::independent(vec![
            boxed(aggressive_strategy(0.35, &config.values[0]).unwrap()),
            boxed(never_bid()),
            boxed(never_bid()),
        ])
        .unwrap();
        let a = run(&config, &profile, 77).unwrap();
        let b = run(&config, &quiet, 77).unwrap();
        for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
            assert_same_values(x, y);
        }
    }

    fn assert_same_values(x: &RoundOutcome, y: &RoundOutcome) {
        assert_eq!(x.values, y.values);
        assert_eq!(x.bids_submitted.contains(0), y.bids_submitted.contains(0));
    }

    #[test]
    fn winner_frequencies_follow_rule() {
        let shares = FairShares::new(vec![0.2, 0.3, 0.5]).unwrap();
        let rule = Arc::new(robust_border_rule(&shares).unwrap());
        let config = MechanismConfig::new(shares, vec![ValueDistribution::uniform01(); 3], rule.clone(), 30_000)
            .unwrap()
            .with_budget_mode(BudgetMode::ExpectationOnly)
            .recording(true);
        let profile = StrategyProfile::independent(vec![boxed(always_bid()), boxed(always_bid()), boxed(always_bid())]).unwrap();
        let trace = run(&config, &profile, 5).unwrap();
        let full = SubsetId::full(3);
        let mut counts = [0f64; 3];
        trace.outcomes.iter().for_each(|r| counts[r.winner.unwrap()] += 1.0);
        let total = trace.outcomes.len() as f64;
        let chi2: f64 = (0..3)
            .filter(|&i| rule.prob(full, i) > 0.0)
            .map(|i| {
                let expected = rule.prob(full, i) * total;
                (counts[i] - expected).powi(2) / expected
            })
            .sum();
        // 99.9% quantile of chi-square with 2 degrees of freedom
        assert!(chi2 < 13.82, "chi2 = {chi2}");
    }
}
