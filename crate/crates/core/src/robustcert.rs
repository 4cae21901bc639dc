//! Closed-form robustness certificates.
//!
//! The central inequality says that, for any fair shares and any agent set
//! `I`, the bounded Border condition with two-way ties capped at
//! `(1 + alpha_other) / 2` still holds at the target `1 - prod (1 - alpha)`.
//! The remaining functions are the bounds that sandwich the achievable
//! robustness factor.

use std::fmt::Write as _;

use crate::border::{all_subsets, AllocationRule, FairShares, SubsetId};
use crate::error::{Error, Result};

/// Left side of the key inequality for one agent set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateReport {
    pub subset: SubsetId,
    pub lhs: f64,
    pub margin: f64,
    pub pass: bool,
}

impl CertificateReport {
    fn new(subset: SubsetId, lhs: f64) -> Self {
        CertificateReport {
            subset,
            lhs,
            margin: 1.0 - lhs,
            pass: lhs <= 1.0 + 1e-12,
        }
    }
}

/// `prod_{k != i} (1 - alpha_k)` for every `i`, without dividing.
fn products_except(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut prefix = vec![1.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * (1.0 - a[i]);
    }
    let mut out = vec![0.0; n];
    let mut suffix = 1.0;
    for i in (0..n).rev() {
        out[i] = prefix[i] * suffix;
        suffix *= 1.0 - a[i];
    }
    out
}

fn lhs_with(a: &[f64], except: &[f64], all_lose: f64, set: SubsetId) -> f64 {
    let inside: f64 = set.members().map(|i| a[i]).sum();
    let outside: f64 = (0..a.len()).filter(|&j| !set.contains(j)).map(|j| a[j]).sum();
    let none_inside: f64 = set.members().map(|i| 1.0 - a[i]).product();
    let ties: f64 = set.members().map(|i| a[i] * except[i]).sum();
    (1.0 - all_lose) * inside + none_inside + 0.5 * ties * outside
}

/// `(1 - prod_k (1 - a_k)) sum_I a + prod_I (1 - a) + 1/2 sum_{i in I} a_i
/// prod_{k != i} (1 - a_k) * sum_{j not in I} a_j`.
pub fn modified_border_lhs(shares: &FairShares, set: SubsetId) -> f64 {
    let a = shares.as_slice();
    let all_lose = a.iter().map(|x| 1.0 - x).product();
    lhs_with(a, &products_except(a), all_lose, set)
}

/// Evaluates the inequality on every agent set, ordered by mask.
pub fn key_lemma_sweep(shares: &FairShares) -> Vec<CertificateReport> {
    let a = shares.as_slice();
    let except = products_except(a);
    let all_lose = a.iter().map(|x| 1.0 - x).product();
    all_subsets(a.len())
        .map(|s| CertificateReport::new(s, lhs_with(a, &except, all_lose, s)))
        .collect()
}

pub fn sweep_csv(reports: &[CertificateReport]) -> String {
    let mut out = String::from("mask,lhs,margin\n");
    for r in reports {
        let _ = writeln!(out, "{},{:.15},{:.15e}", r.subset.mask(), r.lhs, r.margin);
    }
    out
}

fn check_envelope_args(x: f64, m: u32) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            name: "X",
            value: x,
            range: "[0, 1]",
        });
    }
    if m == 0 {
        return Err(Error::OutOfRange {
            name: "m",
            value: 0.0,
            range: "positive integers",
        });
    }
    Ok(())
}

/// `g(X) = (1 - X/m)^m (m X^2 + 2 m X + 2 m - 2 X^2 - 2 X) / (2 (m - X))`,
/// evaluated as `(1 - X/m)^(m-1) (...) / (2 m)` so that `m = 1, X = 1` is
/// finite.
pub fn envelope_g(x: f64, m: u32) -> Result<f64> {
    check_envelope_args(x, m)?;
    let mf = m as f64;
    let poly = mf * x * x + 2.0 * mf * x + 2.0 * mf - 2.0 * x * x - 2.0 * x;
    Ok((1.0 - x / mf).powi(m as i32 - 1) * poly / (2.0 * mf))
}

/// `g'(X) = -X (1 - X/m)^m (m X (m - 1) + 2 (m - X)) / (2 (m - X)^2)`.
pub fn envelope_g_derivative(x: f64, m: u32) -> Result<f64> {
    check_envelope_args(x, m)?;
    if m == 1 {
        return Ok(-x);
    }
    let mf = m as f64;
    let d = mf - x;
    Ok(-x * (1.0 - x / mf).powi(m as i32) * (mf * x * (mf - 1.0) + 2.0 * d) / (2.0 * d * d))
}

/// `f(X) = 1 - (1 - X)(1 - g(X))`, the envelope that never exceeds 1.
pub fn envelope_f(x: f64, m: u32) -> Result<f64> {
    Ok(1.0 - (1.0 - x) * (1.0 - envelope_g(x, m)?))
}

/// `X,m,f` rows for every grid point and `m`.
pub fn envelope_csv(xs: &[f64], ms: &[u32]) -> Result<String> {
    let mut out = String::from("X,m,f\n");
    for &m in ms {
        for &x in xs {
            let _ = writeln!(out, "{x},{m},{:.15}", envelope_f(x, m)?);
        }
    }
    Ok(out)
}

/// `1 - p_bar (1 - alpha_i)`: the guarantee when every tie involving the
/// agent is lost with probability at most `p_bar`.
pub fn robust_lower_bound(alpha_i: f64, p_bar: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha_i) {
        return Err(Error::OutOfRange {
            name: "alpha_i",
            value: alpha_i,
            range: "[0, 1]",
        });
    }
    if !(0.5..=1.0).contains(&p_bar) {
        return Err(Error::OutOfRange {
            name: "p_bar",
            value: p_bar,
            range: "[0.5, 1]",
        });
    }
    Ok(1.0 - p_bar * (1.0 - alpha_i))
}

/// `alpha_i + sum_{j != i} alpha_j p_i^{i,j}`: what agent `i` gets when the
/// others take turns bidding alone against it.
pub fn anticorrelated_upper_bound(rule: &AllocationRule, shares: &FairShares, agent: usize) -> Result<f64> {
    let n = shares.len();
    if rule.n() != n || agent >= n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rule.n().max(agent + 1),
        });
    }
    let a = shares.as_slice();
    Ok(a[agent]
        + (0..n)
            .filter(|&j| j != agent)
            .map(|j| a[j] * rule.prob(SubsetId::pair(agent, j), agent))
            .sum::<f64>())
}

/// `1/2 + 1/2 sum_i alpha_i^2`, the best factor any mechanism can promise.
pub fn hardness_bound(shares: &FairShares) -> f64 {
    0.5 + 0.5 * shares.as_slice().iter().map(|a| a * a).sum::<f64>()
}

/// The most a centralized allocator can guarantee every agent at once.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CentralizedBound {
    /// `1 - prod_j (1 - alpha_j)`.
    pub value: f64,
    /// Infimum over all share vectors, `1 - 1/e`.
    pub floor: f64,
}

pub fn centralized_upper_bound(shares: &FairShares) -> CentralizedBound {
    CentralizedBound {
        value: 1.0 - shares.as_slice().iter().map(|a| 1.0 - a).product::<f64>(),
        floor: 1.0 - (-1.0f64).exp(),
    }
}
