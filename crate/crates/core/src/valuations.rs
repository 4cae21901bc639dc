//! Value distributions and the ideal-utility benchmark.
//!
//! The ideal utility `v*(beta)` is the best per-round expected value an agent
//! could collect if she could claim the item just by asking, but only on a
//! `beta` fraction of rounds. The optimal claiming rule is a top-quantile
//! threshold, randomized at the threshold atom when the distribution has one.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    Bernoulli {
        q: f64,
    },
    #[serde(alias = "uniform")]
    Uniform01,
    /// Finitely many distinct atoms, kept sorted by ascending value.
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
}

/// A bounded, nonnegative per-round value law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub struct ValueDistribution {
    kind: DistributionKind,
    upper_bound: f64,
}

/// Wire form of a distribution: the kind, plus an optional explicit bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub kind: DistributionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<f64>,
}

impl TryFrom<DistributionSpec> for ValueDistribution {
    type Error = Error;

    fn try_from(spec: DistributionSpec) -> Result<Self> {
        let dist = match spec.kind {
            DistributionKind::Bernoulli { q } => Self::bernoulli(q)?,
            DistributionKind::Uniform01 => Self::uniform01(),
            DistributionKind::Discrete { values, probs } => Self::discrete(values, probs)?,
        };
        match spec.upper_bound {
            Some(bound) => dist.with_upper_bound(bound),
            None => Ok(dist),
        }
    }
}

impl From<ValueDistribution> for DistributionSpec {
    fn from(dist: ValueDistribution) -> Self {
        DistributionSpec {
            upper_bound: Some(dist.upper_bound),
            kind: dist.kind,
        }
    }
}

impl ValueDistribution {
    pub fn bernoulli(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::OutOfRange {
                name: "q",
                value: q,
                range: "[0, 1]",
            });
        }
        Ok(Self {
            kind: DistributionKind::Bernoulli { q },
            upper_bound: 1.0,
        })
    }

    pub fn uniform01() -> Self {
        Self {
            kind: DistributionKind::Uniform01,
            upper_bound: 1.0,
        }
    }

    /// Builds a discrete law. Repeated values are merged so that every atom
    /// value is distinct; zero-probability atoms are dropped.
    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                found: probs.len(),
            });
        }
        if values.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "atom value {v} is not a finite nonnegative number"
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidDistribution(format!("atom probability {p} not in [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "atom probabilities sum to {total}, not 1"
            )));
        }

        let mut atoms: Vec<(f64, f64)> = values.into_iter().zip(probs).filter(|&(_, p)| p > 0.0).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        let upper_bound = merged.last().map_or(0.0, |a| a.0);
        let (values, probs) = merged.into_iter().unzip();
        Ok(Self {
            kind: DistributionKind::Discrete { values, probs },
            upper_bound,
        })
    }

    /// Replaces the support bound with a looser known bound.
    pub fn with_upper_bound(mut self, bound: f64) -> Result<Self> {
        let max_value = match &self.kind {
            DistributionKind::Bernoulli { .. } | DistributionKind::Uniform01 => 1.0,
            DistributionKind::Discrete { values, .. } => values.last().copied().unwrap_or(0.0),
        };
        if !bound.is_finite() || bound < max_value {
            return Err(Error::InvalidDistribution(format!(
                "upper bound {bound} is below the largest support point {max_value}"
            )));
        }
        if matches!(self.kind, DistributionKind::Uniform01) && bound != 1.0 {
            return Err(Error::InvalidDistribution("Uniform01 has upper bound 1".into()));
        }
        self.upper_bound = bound;
        Ok(self)
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper_bound
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            DistributionKind::Bernoulli { q } => *q,
            DistributionKind::Uniform01 => 0.5,
            DistributionKind::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
        }
    }

    /// Expected claim rate `E[rho(V)]` of a bid rule.
    pub fn bid_rate(&self, rule: &BidProbabilityFunction) -> f64 {
        match &self.kind {
            DistributionKind::Bernoulli { q } => q * rule.probability(1.0) + (1.0 - q) * rule.probability(0.0),
            DistributionKind::Uniform01 => 1.0 - rule.threshold.clamp(0.0, 1.0),
            DistributionKind::Discrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| p * rule.probability(*v)).sum()
            }
        }
    }

    /// Expected claimed value `E[V rho(V)]` of a bid rule.
    pub fn claimed_value(&self, rule: &BidProbabilityFunction) -> f64 {
        match &self.kind {
            DistributionKind::Bernoulli { q } => q * rule.probability(1.0),
            DistributionKind::Uniform01 => {
                let t = rule.threshold.clamp(0.0, 1.0);
                (1.0 - t * t) / 2.0
            }
            DistributionKind::Discrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * p * rule.probability(*v)).sum()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            DistributionKind::Bernoulli { q } => {
                if rng.random::<f64>() < *q {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionKind::Uniform01 => rng.random::<f64>(),
            DistributionKind::Discrete { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("discrete law has atoms")
            }
        }
    }
}

impl fmt::Display for ValueDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DistributionKind::Bernoulli { q } => write!(f, "Bernoulli({q})"),
            DistributionKind::Uniform01 => write!(f, "Uniform[0,1]"),
            DistributionKind::Discrete { values, .. } => write!(f, "Discrete({} atoms)", values.len()),
        }
    }
}

/// A threshold claiming rule: claim always above `threshold`, with
/// probability `boundary_mass` exactly at it, never below.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidProbabilityFunction {
    pub threshold: f64,
    pub boundary_mass: f64,
}

impl BidProbabilityFunction {
    pub fn probability(&self, value: f64) -> f64 {
        if value > self.threshold {
            1.0
        } else if value == self.threshold {
            self.boundary_mass
        } else {
            0.0
        }
    }

    pub fn decide<R: Rng + ?Sized>(&self, value: f64, rng: &mut R) -> bool {
        if value > self.threshold {
            true
        } else if value == self.threshold {
            rng.random::<f64>() < self.boundary_mass
        } else {
            false
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::OutOfRange {
            name: "beta",
            value: beta,
            range: "[0, 1]",
        });
    }
    Ok(())
}

/// `v*(beta)`: the largest `E[V rho(V)]` over claiming rules with `E[rho(V)] <= beta`.
pub fn ideal_utility(dist: &ValueDistribution, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(match &dist.kind {
        DistributionKind::Bernoulli { q } => beta.min(*q),
        DistributionKind::Uniform01 => beta * (2.0 - beta) / 2.0,
        DistributionKind::Discrete { values, probs } => {
            // fractional knapsack with unit weights: fill from the top atom down
            let mut budget = beta;
            let mut total = 0.0;
            for (v, p) in values.iter().zip(probs).rev() {
                if budget <= 0.0 {
                    break;
                }
                let take = budget.min(*p);
                total += take * v;
                budget -= take;
            }
            total
        }
    })
}

/// The top-`beta`-quantile claiming rule that attains [`ideal_utility`].
pub fn ideal_bid_rule(dist: &ValueDistribution, beta: f64) -> Result<BidProbabilityFunction> {
    check_beta(beta)?;
    Ok(match &dist.kind {
        DistributionKind::Bernoulli { q } => {
            if *q >= beta && *q > 0.0 {
                BidProbabilityFunction {
                    threshold: 1.0,
                    boundary_mass: beta / q,
                }
            } else if *q < 1.0 {
                BidProbabilityFunction {
                    threshold: 0.0,
                    boundary_mass: (beta - q) / (1.0 - q),
                }
            } else {
                BidProbabilityFunction {
                    threshold: 1.0,
                    boundary_mass: beta,
                }
            }
        }
        DistributionKind::Uniform01 => BidProbabilityFunction {
            threshold: 1.0 - beta,
            boundary_mass: 0.0,
        },
        DistributionKind::Discrete { values, probs } => {
            let mut above = 0.0;
            let mut rule = BidProbabilityFunction {
                threshold: values[0],
                boundary_mass: 1.0,
            };
            for (v, p) in values.iter().zip(probs).rev() {
                if above + p >= beta {
                    rule = BidProbabilityFunction {
                        threshold: *v,
                        boundary_mass: ((beta - above) / p).clamp(0.0, 1.0),
                    };
                    break;
                }
                above += p;
            }
            rule
        }
    })
}

/// One i.i.d. draw from `dist`.
pub fn sample_value<R: Rng + ?Sized>(dist: &ValueDistribution, rng: &mut R) -> f64 {
    dist.sample(rng)
}
