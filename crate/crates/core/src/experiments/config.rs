//! Experiment configuration files.
//!
//! Configs are TOML (or JSON when the file name ends in `.json`). Every
//! field is optional at parse time; each command checks for what it needs.
//!
//! ```toml
//! experiment = "equilibrium"
//! theorem = "equilibrium utility approaches 1 - prod(1 - alpha)"
//! agents = 3                      # or: shares = [0.2, 0.3, 0.5]
//! horizon = 100000
//! seeds = 20
//! values = { kind = "bernoulli", q = 0.3333333333333333 }
//!
//! [rule]
//! source = "robust_border"
//!
//! [strategies]
//! default = { kind = "aggressive" }
//! adversary = { kind = "turn_taking", target = 0 }
//!
//! [check]
//! agent = 0
//! mode = "at_least"
//! expected = 0.5555555555555556
//! tolerance = 0.03
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::border::{BidRates, FairShares, InterimTarget};
use crate::mechanism::{BudgetMode, SlackMode};
use crate::strategies::StrategySpec;
use crate::valuations::ValueDistribution;

use super::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn expand(&self, n: usize, field: &str) -> Result<Vec<T>, CliError> {
        match self {
            OneOrMany::One(x) => Ok(vec![x.clone(); n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => Err(CliError::Config(format!("{field}: expected {n} entries, found {}", v.len()))),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub theorem: Option<String>,
    /// Symmetric shares `1/agents` when `shares` is absent.
    pub agents: Option<usize>,
    pub shares: Option<Vec<f64>>,
    /// Per-round bid rates; default to the shares.
    pub rates: Option<Vec<f64>>,
    pub target: Option<TargetSpec>,
    pub bounds: Option<BoundsSpec>,
    pub expect_feasible: Option<bool>,
    pub values: Option<OneOrMany<ValueDistribution>>,
    pub horizon: Option<u64>,
    pub seeds: Option<u64>,
    pub seed: Option<u64>,
    pub budget_mode: Option<BudgetModeSpec>,
    pub slack: Option<SlackSpec>,
    pub rule: Option<RuleSpec>,
    pub strategies: Option<StrategiesSpec>,
    pub check: Option<CheckSpec>,
    pub keylemma: Option<KeyLemmaSpec>,
    pub envelope: Option<EnvelopeSpec>,
    pub dmmf: Option<DmmfSpec>,
    pub best_response: Option<BestResponseSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Explicit(Vec<f64>),
    Named(NamedTarget),
    Proportional { gamma: f64 },
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NamedTarget {
    WorstCase,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BoundsSpec {
    #[default]
    None,
    RobustDoubleton,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BudgetModeSpec {
    #[default]
    EndOfHorizon,
    Anytime,
    ExpectationOnly,
}

impl From<BudgetModeSpec> for BudgetMode {
    fn from(m: BudgetModeSpec) -> Self {
        match m {
            BudgetModeSpec::EndOfHorizon => BudgetMode::EndOfHorizon,
            BudgetModeSpec::Anytime => BudgetMode::Anytime,
            BudgetModeSpec::ExpectationOnly => BudgetMode::ExpectationOnly,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SlackSpec {
    Named(NamedSlack),
    Custom(Vec<f64>),
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NamedSlack {
    Formula,
    Zero,
}

impl From<&SlackSpec> for SlackMode {
    fn from(s: &SlackSpec) -> Self {
        match s {
            SlackSpec::Named(NamedSlack::Formula) => SlackMode::Formula,
            SlackSpec::Named(NamedSlack::Zero) => SlackMode::Zero,
            SlackSpec::Custom(v) => SlackMode::Custom(v.clone()),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleSpec {
    RobustBorder,
    UnboundedBorder,
    Uniform,
    Counterexample,
    Table { path: PathBuf },
    DmmfDerived { horizon: u64 },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategiesSpec {
    /// Strategy for every agent not listed in `agents`.
    pub default: Option<StrategySpec>,
    pub agents: Option<Vec<StrategySpec>>,
    /// Coalition controller for everyone except its target.
    pub adversary: Option<StrategySpec>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    #[default]
    Near,
    AtLeast,
    AtMost,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Agent to check; all agents when absent.
    pub agent: Option<usize>,
    #[serde(default)]
    pub mode: CheckMode,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyLemmaSpec {
    /// Random share vectors to sweep in addition to any explicit shares.
    #[serde(default)]
    pub draws: u64,
    pub min_agents: Option<usize>,
    pub max_agents: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    /// Interior grid points `X = k / (points + 1)`.
    pub points: Option<usize>,
    pub max_m: Option<u32>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmmfSpec {
    pub thin: Option<u64>,
    /// Also estimate a rule for the worst-case target and round-trip it.
    #[serde(default)]
    pub derive: bool,
    pub derive_tolerance: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestResponseSpec {
    pub agent: Option<usize>,
    pub grid: Vec<f64>,
}

impl ExperimentConfig {
    pub fn parse_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn parse_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            Self::parse_json(&text)
        } else {
            Self::parse_toml(&text)
        };
        parsed.map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn name(&self) -> &str {
        self.experiment.as_deref().unwrap_or("unnamed")
    }

    pub fn shares(&self) -> Result<FairShares, CliError> {
        let shares = match (&self.shares, self.agents) {
            (Some(s), agents) => {
                if agents.is_some_and(|n| n != s.len()) {
                    return Err(CliError::Config(format!(
                        "agents = {} disagrees with {} shares",
                        agents.unwrap_or_default(),
                        s.len()
                    )));
                }
                FairShares::new(s.clone())
            }
            (None, Some(n)) => FairShares::symmetric(n),
            (None, None) => return Err(CliError::Config("missing field `shares` (or `agents`)".into())),
        };
        shares.map_err(|e| CliError::Config(format!("shares: {e}")))
    }

    pub fn rates(&self, shares: &FairShares) -> Result<BidRates, CliError> {
        match &self.rates {
            Some(r) if r.len() != shares.len() => Err(CliError::Config(format!(
                "rates: expected {} entries, found {}",
                shares.len(),
                r.len()
            ))),
            Some(r) => BidRates::new(r.clone()).map_err(|e| CliError::Config(format!("rates: {e}"))),
            None => Ok(shares.to_rates()),
        }
    }

    pub fn target(&self, shares: &FairShares) -> Result<InterimTarget, CliError> {
        let target = match self.target.as_ref().unwrap_or(&TargetSpec::Named(NamedTarget::WorstCase)) {
            TargetSpec::Explicit(p) if p.len() != shares.len() => {
                return Err(CliError::Config(format!(
                    "target: expected {} entries, found {}",
                    shares.len(),
                    p.len()
                )))
            }
            TargetSpec::Explicit(p) => InterimTarget::new(p.clone()),
            TargetSpec::Named(NamedTarget::WorstCase) => Ok(crate::border::worst_case_interim(shares)),
            TargetSpec::Proportional { gamma } => crate::border::proportional_interim(shares, *gamma),
        };
        target.map_err(|e| CliError::Config(format!("target: {e}")))
    }

    pub fn values(&self, n: usize) -> Result<Vec<ValueDistribution>, CliError> {
        self.values
            .as_ref()
            .ok_or_else(|| CliError::Config("missing field `values`".into()))?
            .expand(n, "values")
    }

    pub fn horizon(&self) -> Result<u64, CliError> {
        match self.horizon {
            Some(0) => Err(CliError::Config("horizon must be at least 1".into())),
            Some(t) => Ok(t),
            None => Err(CliError::Config("missing field `horizon`".into())),
        }
    }

    pub fn seeds(&self) -> u64 {
        self.seeds.unwrap_or(1).max(1)
    }

    pub fn strategies(&self) -> StrategiesSpec {
        self.strategies.clone().unwrap_or_default()
    }

    /// Per-agent strategy specs, before any coalition is carved out.
    pub fn individual_specs(&self, n: usize) -> Result<Vec<StrategySpec>, CliError> {
        let spec = self.strategies();
        match (&spec.agents, &spec.default) {
            (Some(list), _) if list.len() != n => Err(CliError::Config(format!(
                "strategies.agents: expected {n} entries, found {}",
                list.len()
            ))),
            (Some(list), _) => Ok(list.clone()),
            (None, Some(d)) => Ok(vec![d.clone(); n]),
            (None, None) => Ok(vec![StrategySpec::Aggressive { beta: None }; n]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_toml() {
        let cfg = ExperimentConfig::parse_toml(
            r#"
experiment = "robustness"
agents = 3
horizon = 1000
seeds = 4
values = { kind = "bernoulli", q = 0.5 }
budget_mode = "anytime"
slack = "zero"

[rule]
source = "robust_border"

[strategies]
default = { kind = "aggressive" }
adversary = { kind = "turn_taking", target = 0 }

[check]
agent = 0
mode = "at_least"
expected = 0.5
tolerance = 0.03
"#,
        )
        .unwrap();
        assert_eq!(cfg.name(), "robustness");
        assert_eq!(cfg.shares().unwrap().len(), 3);
        assert_eq!(cfg.values(3).unwrap().len(), 3);
        assert_eq!(cfg.rule, Some(RuleSpec::RobustBorder));
        assert_eq!(cfg.budget_mode, Some(BudgetModeSpec::Anytime));
        assert!(matches!(cfg.slack, Some(SlackSpec::Named(NamedSlack::Zero))));
        assert_eq!(cfg.check.unwrap().mode, CheckMode::AtLeast);
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = ExperimentConfig::parse_toml("agents = 3\nhorizon = \"long\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("horizon"), "{msg}");
        let err = ExperimentConfig::parse_toml("agnets = 3\n").unwrap_err();
        assert!(err.to_string().contains("agnets"));
        let err = ExperimentConfig::parse_json("{\n\"agents\": 3,\n\"seeds\": -1\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn targets_and_lists() {
        let cfg = ExperimentConfig::parse_toml("shares = [0.3, 0.7]\ntarget = [0.79, 0.79]\n").unwrap();
        assert_eq!(cfg.target(&cfg.shares().unwrap()).unwrap().as_slice(), &[0.79, 0.79]);
        let cfg = ExperimentConfig::parse_toml("agents = 4\ntarget = { gamma = 2.0 }\n").unwrap();
        assert!((cfg.target(&cfg.shares().unwrap()).unwrap().as_slice()[0] - 0.46875).abs() < 1e-15);
        let cfg = ExperimentConfig::parse_toml("agents = 2\ntarget = \"worst_case\"\nvalues = [{ kind = \"uniform01\" }]\n").unwrap();
        assert!(cfg.values(2).is_err());
        let cfg = ExperimentConfig::parse_toml("agents = 3\nshares = [0.5, 0.5]\n").unwrap();
        assert!(cfg.shares().is_err());
    }
}
