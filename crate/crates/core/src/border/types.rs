use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TOL;

/// Largest agent count for which subset tables are enumerated.
pub const MAX_AGENTS: usize = 16;

fn check_agent_count(n: usize) -> Result<()> {
    if n == 0 || n > MAX_AGENTS {
        return Err(Error::TooManyAgents(n));
    }
    Ok(())
}

/// A set of agents as a bitmask; bit `i` is agent `i` (0-based).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetId(u32);

impl SubsetId {
    pub const EMPTY: SubsetId = SubsetId(0);

    pub const fn new(mask: u32) -> Self {
        SubsetId(mask)
    }

    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_AGENTS);
        SubsetId(((1u64 << n) - 1) as u32)
    }

    pub const fn singleton(i: usize) -> Self {
        SubsetId(1 << i)
    }

    pub const fn pair(i: usize, j: usize) -> Self {
        SubsetId((1 << i) | (1 << j))
    }

    pub fn from_agents<I: IntoIterator<Item = usize>>(agents: I) -> Self {
        SubsetId(agents.into_iter().fold(0, |m, i| m | (1 << i)))
    }

    pub const fn mask(self) -> u32 {
        self.0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn contains(self, i: usize) -> bool {
        i < 32 && self.0 & (1 << i) != 0
    }

    pub const fn with(self, i: usize) -> Self {
        SubsetId(self.0 | (1 << i))
    }

    pub const fn without(self, i: usize) -> Self {
        SubsetId(self.0 & !(1 << i))
    }

    pub const fn intersect(self, other: SubsetId) -> Self {
        SubsetId(self.0 & other.0)
    }

    pub const fn is_subset_of(self, other: SubsetId) -> bool {
        self.0 & !other.0 == 0
    }

    /// Position of `i` among the members of `self` in ascending order.
    pub const fn rank_of(self, i: usize) -> usize {
        (self.0 & ((1u32 << i) - 1)).count_ones() as usize
    }

    pub fn members(self) -> impl Iterator<Item = usize> + Clone {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }
}

impl fmt::Display for SubsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

pub fn all_subsets(n: usize) -> impl Iterator<Item = SubsetId> + Clone {
    (0..(1u32 << n)).map(SubsetId)
}

pub fn nonempty_subsets(n: usize) -> impl Iterator<Item = SubsetId> + Clone {
    (1..(1u32 << n)).map(SubsetId)
}

/// Per-round bid rates `beta_i`, each in `(0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BidRates(Vec<f64>);

impl BidRates {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        check_agent_count(rates.len())?;
        if let Some(b) = rates.iter().find(|b| !(**b > 0.0 && **b <= 1.0)) {
            return Err(Error::InvalidRates(format!("rate {b} is not in (0, 1]")));
        }
        Ok(BidRates(rates))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for BidRates {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        BidRates::new(v)
    }
}

impl From<BidRates> for Vec<f64> {
    fn from(r: BidRates) -> Self {
        r.0
    }
}

/// Fair shares `alpha_i`: positive and summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FairShares(Vec<f64>);

impl FairShares {
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        check_agent_count(shares.len())?;
        if let Some(a) = shares.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(Error::InvalidShares(format!(
                "share {a} is not positive (drop zero-share agents first)"
            )));
        }
        let total: f64 = shares.iter().sum();
        if (total - 1.0).abs() > TOL {
            return Err(Error::InvalidShares(format!("shares sum to {total}, not 1")));
        }
        Ok(FairShares(shares))
    }

    /// Skips validation. Only meant for negative controls that need
    /// deliberately broken share vectors.
    pub fn new_unchecked(shares: Vec<f64>) -> Self {
        FairShares(shares)
    }

    pub fn symmetric(n: usize) -> Result<Self> {
        check_agent_count(n)?;
        Ok(FairShares(vec![1.0 / n as f64; n]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The shares used directly as per-round bid rates.
    pub fn to_rates(&self) -> BidRates {
        BidRates(self.0.clone())
    }
}

impl TryFrom<Vec<f64>> for FairShares {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        FairShares::new(v)
    }
}

impl From<FairShares> for Vec<f64> {
    fn from(s: FairShares) -> Self {
        s.0
    }
}

/// Target interim win probabilities `p_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct InterimTarget(Vec<f64>);

impl InterimTarget {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange {
                name: "interim probability",
                value: *v,
                range: "[0, 1]",
            });
        }
        Ok(InterimTarget(p))
    }

    pub(crate) fn new_unchecked(p: Vec<f64>) -> Self {
        InterimTarget(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.0.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for InterimTarget {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        InterimTarget::new(v)
    }
}

impl From<InterimTarget> for Vec<f64> {
    fn from(t: InterimTarget) -> Self {
        t.0
    }
}

/// Upper bounds `p_i^S <= bar_p`. Missing entries are unbounded.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CapacityBounds(BTreeMap<(SubsetId, usize), f64>);

impl CapacityBounds {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, s: SubsetId, agent: usize, bound: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&bound) {
            return Err(Error::OutOfRange {
                name: "capacity bound",
                value: bound,
                range: "[0, 1]",
            });
        }
        if !s.contains(agent) {
            return Err(Error::InvalidRule(format!("agent {agent} is not in {s}")));
        }
        self.0.insert((s, agent), bound);
        Ok(())
    }

    pub fn get(&self, s: SubsetId, agent: usize) -> Option<f64> {
        self.0.get(&(s, agent)).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubsetId, usize, f64)> + '_ {
        self.0.iter().map(|(&(s, i), &b)| (s, i, b))
    }

    /// Caps each two-bidder tie: in `{i, j}`, agent `j` wins with
    /// probability at most `(1 + alpha_i) / 2`.
    pub fn robust_doubletons(shares: &FairShares) -> Self {
        let a = shares.as_slice();
        let mut bounds = BTreeMap::new();
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                let pair = SubsetId::pair(i, j);
                bounds.insert((pair, j), (1.0 + a[i]) / 2.0);
                bounds.insert((pair, i), (1.0 + a[j]) / 2.0);
            }
        }
        CapacityBounds(bounds)
    }

    pub(crate) fn check_agents(&self, n: usize) -> Result<()> {
        match self.0.keys().find(|(s, _)| s.mask() >> n != 0) {
            Some((s, _)) => Err(Error::InvalidRule(format!("bound on {s} names agents beyond n = {n}"))),
            None => Ok(()),
        }
    }
}

/// Winner distributions `p_i^S` for every nonempty bidder set `S`.
///
/// Row `S` stores the probabilities of the members of `S` in ascending agent
/// order; non-members implicitly have probability zero.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationRule {
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl AllocationRule {
    /// Builds a rule from `f(S, i)` for `i` in `S`, validating every row.
    pub fn from_fn<F: FnMut(SubsetId, usize) -> f64>(n: usize, mut f: F) -> Result<Self> {
        check_agent_count(n)?;
        let rows = all_subsets(n).map(|s| s.members().map(|i| f(s, i)).collect()).collect();
        let rule = AllocationRule { n, rows };
        rule.validate()?;
        Ok(rule)
    }

    pub(crate) fn from_rows_unchecked(n: usize, rows: Vec<Vec<f64>>) -> Self {
        AllocationRule { n, rows }
    }

    /// Uniform tie-breaking `p_i^S = 1/|S|`.
    pub fn uniform(n: usize) -> Self {
        AllocationRule::from_fn(n, |s, _| 1.0 / s.len() as f64).expect("uniform rule is valid")
    }

    pub fn validate(&self) -> Result<()> {
        for s in nonempty_subsets(self.n) {
            let row = &self.rows[s.mask() as usize];
            if row.len() != s.len() {
                return Err(Error::InvalidRule(format!("row {s} has {} entries", row.len())));
            }
            if let Some(p) = row.iter().find(|p| p.is_nan() || **p < 0.0) {
                return Err(Error::InvalidRule(format!("negative probability {p} in row {s}")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > TOL {
                return Err(Error::InvalidRule(format!("row {s} sums to {total}")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `p_i^S`, zero when `i` is not in `S`.
    pub fn prob(&self, s: SubsetId, i: usize) -> f64 {
        if s.contains(i) {
            self.rows[s.mask() as usize][s.rank_of(i)]
        } else {
            0.0
        }
    }

    /// Winner distribution of `S`, aligned with `S.members()`.
    pub fn row(&self, s: SubsetId) -> &[f64] {
        &self.rows[s.mask() as usize]
    }

    /// Draws a winner of `S` given a uniform variate `u` in `[0, 1)`.
    pub fn pick(&self, s: SubsetId, u: f64) -> Option<usize> {
        if s.is_empty() {
            return None;
        }
        let mut acc = 0.0;
        let mut last = None;
        for (i, p) in s.members().zip(self.row(s)) {
            acc += p;
            if *p > 0.0 {
                last = Some(i);
            }
            if u < acc {
                return Some(i);
            }
        }
        last.or_else(|| s.members().last())
    }

    /// Text table with one `mask,agent,prob` line per member of every
    /// nonempty subset, in ascending `(mask, agent)` order.
    pub fn to_table(&self) -> String {
        let mut out = String::from("mask,agent,prob\n");
        for s in nonempty_subsets(self.n) {
            for (i, p) in s.members().zip(self.row(s)) {
                out.push_str(&format!("{},{},{}\n", s.mask(), i, format_sig12(*p)));
            }
        }
        out
    }

    /// Parses the [`to_table`](Self::to_table) format for `n` agents.
    pub fn from_table(n: usize, text: &str) -> Result<Self> {
        check_agent_count(n)?;
        let mut rows: Vec<Vec<Option<f64>>> = all_subsets(n).map(|s| vec![None; s.len()]).collect();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with("mask")) {
                continue;
            }
            let bad = |what: &str| Error::Parse(format!("line {}: {what}: {line:?}", lineno + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(bad("expected mask,agent,prob"));
            }
            let mask: u32 = fields[0].parse().map_err(|_| bad("bad mask"))?;
            let agent: usize = fields[1].parse().map_err(|_| bad("bad agent"))?;
            let prob: f64 = fields[2].parse().map_err(|_| bad("bad probability"))?;
            let s = SubsetId::new(mask);
            if mask == 0 || mask >> n != 0 || !s.contains(agent) {
                return Err(bad("agent/mask out of range"));
            }
            let slot = &mut rows[mask as usize][s.rank_of(agent)];
            if slot.is_some() {
                return Err(bad("duplicate entry"));
            }
            *slot = Some(prob);
        }
        let mut dense = Vec::with_capacity(rows.len());
        for (mask, row) in rows.into_iter().enumerate() {
            let filled: Option<Vec<f64>> = row.into_iter().collect();
            match filled {
                Some(r) => dense.push(r),
                None => {
                    return Err(Error::Parse(format!("missing entries for subset {}", SubsetId::new(mask as u32))))
                }
            }
        }
        let rule = AllocationRule { n, rows: dense };
        rule.validate()?;
        Ok(rule)
    }
}

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros trimmed.
pub(crate) fn format_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let text = if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("scientific format");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{e}")
    };
    text
}
