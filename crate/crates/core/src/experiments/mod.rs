//! Named experiments, config files and the Monte-Carlo harness behind the
//! `brb` command line tool.

mod commands;
mod config;
mod report;

pub use commands::{
    cmd_bestresponse, cmd_dmmf, cmd_envelope, cmd_keylemma, cmd_robustness, cmd_simulate, cmd_solve,
    cmd_verify_border, preset, PRESETS,
};
pub use config::{
    BestResponseSpec, BoundsSpec, BudgetModeSpec, CheckMode, CheckSpec, DmmfSpec, EnvelopeSpec, ExperimentConfig,
    KeyLemmaSpec, NamedSlack, NamedTarget, OneOrMany, RuleSpec, SlackSpec, StrategiesSpec, TargetSpec,
};
pub use report::{mean_se, AgentEstimate, Artifact, Check, ExperimentReport};

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::border::{AllocationRule, FairShares, SubsetId};
use crate::error::{Error, Result};
use crate::mechanism::{run, MechanismConfig, SimulationTrace};
use crate::rng::derive_seed;
use crate::strategies::{aggressive_strategy, threshold_deviation, Strategy, StrategyProfile};
use crate::valuations::ideal_utility;

/// Failure of a CLI command, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for failures while running, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(_) => 1,
            CliError::Config(_) | CliError::Io { .. } => 2,
        }
    }
}

/// A rule that matches the robust rule's interim probabilities on
/// symmetric shares but lets agent 0 lose almost every two-way tie:
///
/// - without agent 0, uniform over the bidders;
/// - with agent 0 and any number of others but one, agent 0 wins;
/// - agent 0 against exactly one other: agent 0 wins with probability `1/n`.
pub fn counterexample_rule(n: usize) -> Result<AllocationRule> {
    if n < 3 {
        return Err(Error::InvalidRule(format!("the counterexample needs at least 3 agents, got {n}")));
    }
    let nf = n as f64;
    AllocationRule::from_fn(n, |s, i| match (s.contains(0), s.len(), i) {
        (false, len, _) => 1.0 / len as f64,
        (true, 2, 0) => 1.0 / nf,
        (true, 2, _) => 1.0 - 1.0 / nf,
        (true, _, 0) => 1.0,
        (true, _, _) => 0.0,
    })
}

/// Uniform draw from the simplex: normalized standard exponentials.
pub fn random_shares<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<FairShares> {
    let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1).max(1e-300)).collect();
    let total: f64 = w.iter().sum();
    FairShares::new(w.iter().map(|x| x / total).collect())
}

/// Runs `seeds` independent replicates in parallel; results are ordered by
/// replicate index.
pub fn monte_carlo(
    config: &MechanismConfig,
    profile: &StrategyProfile,
    seeds: u64,
    base_seed: u64,
) -> Result<Vec<SimulationTrace>> {
    (0..seeds)
        .into_par_iter()
        .map(|k| run(config, profile, derive_seed(base_seed, k)))
        .collect()
}

/// Per-seed realized `lambda_i` (average utility over `v*(alpha_i)`).
pub fn ideal_fractions(config: &MechanismConfig, traces: &[SimulationTrace], agent: usize) -> Result<Vec<f64>> {
    let ideal = ideal_utility(&config.values[agent], config.shares.as_slice()[agent])?;
    if ideal <= 0.0 {
        return Err(Error::InvalidDistribution(format!(
            "agent {agent} has zero ideal utility, so its fraction is undefined"
        )));
    }
    Ok(traces
        .iter()
        .map(|t| t.cumulative_utility[agent] / t.horizon as f64 / ideal)
        .collect())
}

/// Number of replicates in which `agent` had a bid dropped.
pub fn exhausted_seeds(traces: &[SimulationTrace], agent: usize) -> usize {
    traces
        .iter()
        .filter(|t| t.budget_exhaustion_round[agent].is_some())
        .count()
}

/// Average utility of one deviation in a best-response scan.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationRow {
    pub beta: f64,
    pub avg_utility: f64,
    pub se: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestResponseTable {
    pub agent: usize,
    pub baseline: DeviationRow,
    pub rows: Vec<DeviationRow>,
    /// Allowed approximate-equilibrium gain `5 vbar sqrt(ln T / T)`.
    pub epsilon: f64,
}

impl BestResponseTable {
    /// Largest gain of a deviation over honest play, less the allowance
    /// `epsilon + 2 SE`; nonpositive when no deviation helps.
    pub fn excess(&self, row: &DeviationRow) -> f64 {
        let se = (row.se.powi(2) + self.baseline.se.powi(2)).sqrt();
        row.avg_utility - self.baseline.avg_utility - self.epsilon - 2.0 * se
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("beta,avg_utility,se,lambda,gain_over_honest\n");
        for r in std::iter::once(&self.baseline).chain(&self.rows) {
            out.push_str(&format!(
                "{},{:.9},{:.9},{:.9},{:.9}\n",
                r.beta,
                r.avg_utility,
                r.se,
                r.lambda,
                r.avg_utility - self.baseline.avg_utility
            ));
        }
        out
    }
}

/// Replaces `agent`'s strategy by `beta'`-aggressive play for every `beta'`
/// in `grid`, everyone else bidding honestly at their rates.
pub fn best_response_scan(
    config: &MechanismConfig,
    agent: usize,
    grid: &[f64],
    seeds: u64,
    base_seed: u64,
) -> Result<BestResponseTable> {
    let n = config.n();
    if agent >= n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: agent + 1,
        });
    }
    let rates = config.rates.as_slice();
    let ideal = ideal_utility(&config.values[agent], config.shares.as_slice()[agent])?;
    let evaluate = |beta: f64, deviate: bool| -> Result<DeviationRow> {
        let strategies = (0..n)
            .map(|j| {
                let s = if j == agent && deviate {
                    threshold_deviation(beta, &config.values[j])?
                } else {
                    aggressive_strategy(rates[j], &config.values[j])?
                };
                Ok(Box::new(s) as Box<dyn Strategy>)
            })
            .collect::<Result<Vec<_>>>()?;
        let profile = StrategyProfile::independent(strategies)?;
        let traces = monte_carlo(config, &profile, seeds, base_seed)?;
        let utils: Vec<f64> = traces
            .iter()
            .map(|t| t.cumulative_utility[agent] / t.horizon as f64)
            .collect();
        let (avg_utility, se) = mean_se(&utils);
        Ok(DeviationRow {
            beta,
            avg_utility,
            se,
            lambda: if ideal > 0.0 { avg_utility / ideal } else { f64::NAN },
        })
    };
    let baseline = evaluate(rates[agent], false)?;
    let rows = grid.iter().map(|&b| evaluate(b, true)).collect::<Result<Vec<_>>>()?;
    let t = config.horizon as f64;
    let epsilon = 5.0 * config.values[agent].upper_bound() * (t.ln().max(0.0) / t).sqrt();
    Ok(BestResponseTable {
        agent,
        baseline,
        rows,
        epsilon,
    })
}

/// `p_j^{i,j}` maximized over opponents `j`: the worst two-way tie for `i`.
pub fn worst_tie_loss(rule: &AllocationRule, agent: usize) -> f64 {
    (0..rule.n())
        .filter(|&j| j != agent)
        .map(|j| rule.prob(SubsetId::pair(agent, j), j))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::border::{induced_interim, worst_case_interim};
    use crate::rng::{stream, Stream};

    #[test]
    fn counterexample_table() {
        let rule = counterexample_rule(5).unwrap();
        assert_eq!(rule.prob(SubsetId::pair(0, 1), 0), 0.2);
        assert_eq!(rule.prob(SubsetId::pair(0, 1), 1), 0.8);
        assert_eq!(rule.prob(SubsetId::from_agents([0, 1, 2]), 0), 1.0);
        assert_eq!(rule.prob(SubsetId::from_agents([0, 1, 2]), 2), 0.0);
        assert_eq!(rule.prob(SubsetId::from_agents([1, 2, 3]), 3), 1.0 / 3.0);
        assert_eq!(rule.prob(SubsetId::singleton(0), 0), 1.0);
        assert!(counterexample_rule(2).is_err());
        assert!((worst_tie_loss(&rule, 0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn counterexample_interim_matches_worst_case() {
        for n in 3..=8 {
            let shares = FairShares::symmetric(n).unwrap();
            let p = induced_interim(&counterexample_rule(n).unwrap(), &shares.to_rates()).unwrap();
            let target = worst_case_interim(&shares);
            for (a, b) in p.as_slice().iter().zip(target.as_slice()) {
                assert!((a - b).abs() < 1e-12, "n = {n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn random_shares_are_valid() {
        let mut rng = stream(3, Stream::Sampling);
        for n in 1..=16 {
            let s = random_shares(n, &mut rng).unwrap();
            assert_eq!(s.len(), n);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Run(Error::Internal("x".into())).exit_code(), 1);
    }
}
