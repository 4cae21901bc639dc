use std::fmt::Write as _;

use super::config::CheckMode;

/// One pass/fail comparison against a theoretical value.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub label: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub mode: CheckMode,
    pub pass: bool,
}

impl Check {
    pub fn new(label: impl Into<String>, mode: CheckMode, observed: f64, expected: f64, tolerance: f64) -> Self {
        let pass = match mode {
            CheckMode::Near => (observed - expected).abs() <= tolerance,
            CheckMode::AtLeast => observed >= expected - tolerance,
            CheckMode::AtMost => observed <= expected + tolerance,
        };
        Check {
            label: label.into(),
            observed,
            expected,
            tolerance,
            mode,
            pass: pass && observed.is_finite(),
        }
    }

    pub fn near(label: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        Self::new(label, CheckMode::Near, observed, expected, tolerance)
    }

    pub fn at_least(label: impl Into<String>, observed: f64, floor: f64, tolerance: f64) -> Self {
        Self::new(label, CheckMode::AtLeast, observed, floor, tolerance)
    }

    pub fn at_most(label: impl Into<String>, observed: f64, ceiling: f64, tolerance: f64) -> Self {
        Self::new(label, CheckMode::AtMost, observed, ceiling, tolerance)
    }

    pub fn holds(label: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self::new(label, CheckMode::Near, v, 1.0, 0.0)
    }

    fn relation(&self) -> &'static str {
        match self.mode {
            CheckMode::Near => "~=",
            CheckMode::AtLeast => ">=",
            CheckMode::AtMost => "<=",
        }
    }
}

/// Mean and standard error of an estimate across seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentEstimate {
    pub agent: usize,
    pub mean: f64,
    pub se: f64,
    pub target: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub theorem: String,
    pub tolerance: String,
    pub estimates: Vec<AgentEstimate>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>, theorem: impl Into<String>, tolerance: impl Into<String>) -> Self {
        ExperimentReport {
            experiment: experiment.into(),
            theorem: theorem.into(),
            tolerance: tolerance.into(),
            ..Default::default()
        }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn artifact(&mut self, name: impl Into<String>, contents: String) {
        self.artifacts.push(Artifact {
            name: name.into(),
            contents,
        });
    }

    fn header(&self) -> String {
        format!(
            "# experiment: {}\n# theorem: {}\n# tolerance: {}\n",
            self.experiment, self.theorem, self.tolerance
        )
    }

    /// `check,observed,expected,tolerance,mode,pass` preceded by the header.
    pub fn checks_csv(&self) -> String {
        let mut out = self.header();
        out.push_str("check,observed,expected,tolerance,mode,pass\n");
        for c in &self.checks {
            let mode = match c.mode {
                CheckMode::Near => "near",
                CheckMode::AtLeast => "at_least",
                CheckMode::AtMost => "at_most",
            };
            let _ = writeln!(
                out,
                "{},{:.12},{:.12},{:e},{mode},{}",
                c.label.replace(',', ";"),
                c.observed,
                c.expected,
                c.tolerance,
                c.pass
            );
        }
        out
    }

    /// `agent,mean,se,target` preceded by the header.
    pub fn estimates_csv(&self) -> String {
        let mut out = self.header();
        out.push_str("agent,mean,se,target\n");
        for e in &self.estimates {
            let target = e.target.map(|t| format!("{t:.12}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:.12},{:.12},{target}", e.agent, e.mean, e.se);
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = self.header();
        for e in &self.estimates {
            let target = e.target.map(|t| format!(" (target {t:.6})")).unwrap_or_default();
            let _ = writeln!(out, "agent {}: {:.6} +/- {:.6}{target}", e.agent, e.mean, e.se);
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        for c in &self.checks {
            let _ = writeln!(
                out,
                "[{}] {}: {:.9} {} {:.9} (tol {:e})",
                if c.pass { "PASS" } else { "FAIL" },
                c.label,
                c.observed,
                c.relation(),
                c.expected,
                c.tolerance
            );
        }
        let _ = writeln!(out, "result: {}", if self.pass() { "PASS" } else { "FAIL" });
        out
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
