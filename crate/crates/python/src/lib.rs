//! Python bindings: shares, allocation rules, the Border solver, the
//! robustness certificates and the mechanism simulator.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use robust_border::border::{self, BidRates, CapacityBounds, InterimTarget, SubsetId};
use robust_border::error::Error;
use robust_border::experiments::{exhausted_seeds, ideal_fractions, mean_se, monte_carlo};
use robust_border::mechanism::MechanismConfig;
use robust_border::strategies::{aggressive_strategy, turn_taking_adversary, Strategy, StrategyProfile};
use robust_border::valuations::ValueDistribution;
use robust_border::{dmmf, experiments, robustcert};

create_exception!(robust_border_py, InfeasibleError, PyValueError, "No allocation rule implements the target.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Infeasible(w) => InfeasibleError::new_err(w.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "FairShares", frozen, from_py_object)]
#[derive(Clone)]
struct PyFairShares {
    inner: border::FairShares,
}

#[pymethods]
impl PyFairShares {
    #[new]
    fn new(shares: Vec<f64>) -> PyResult<Self> {
        border::FairShares::new(shares)
            .map(|inner| PyFairShares { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn symmetric(n: usize) -> PyResult<Self> {
        border::FairShares::symmetric(n)
            .map(|inner| PyFairShares { inner })
            .map_err(to_py)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.as_slice().to_vec()
    }

    /// Common interim probability `1 - prod(1 - alpha)` for every agent.
    fn worst_case_interim(&self) -> Vec<f64> {
        border::worst_case_interim(&self.inner).as_slice().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("FairShares({:?})", self.inner.as_slice())
    }
}

/// Shares given either as a `FairShares` or a plain list.
#[derive(FromPyObject)]
enum SharesArg {
    Shares(PyFairShares),
    List(Vec<f64>),
}

impl SharesArg {
    fn resolve(self) -> PyResult<border::FairShares> {
        match self {
            SharesArg::Shares(s) => Ok(s.inner),
            SharesArg::List(v) => border::FairShares::new(v).map_err(to_py),
        }
    }
}

#[pyclass(name = "AllocationRule", frozen)]
struct PyAllocationRule {
    inner: Arc<border::AllocationRule>,
}

impl PyAllocationRule {
    fn wrap(rule: border::AllocationRule) -> Self {
        PyAllocationRule { inner: Arc::new(rule) }
    }
}

#[pymethods]
impl PyAllocationRule {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Chance that `agent` wins when exactly `bidders` bid.
    fn prob(&self, bidders: Vec<usize>, agent: usize) -> PyResult<f64> {
        let n = self.inner.n();
        if bidders.iter().chain([&agent]).any(|&i| i >= n) {
            return Err(PyValueError::new_err(format!("agents must be below {n}")));
        }
        Ok(self.inner.prob(SubsetId::from_agents(bidders), agent))
    }

    /// Interim winning probabilities under independent bid rates.
    fn interim(&self, rates: Vec<f64>) -> PyResult<Vec<f64>> {
        let rates = BidRates::new(rates).map_err(to_py)?;
        border::induced_interim(&self.inner, &rates)
            .map(|p| p.as_slice().to_vec())
            .map_err(to_py)
    }

    fn to_table(&self) -> String {
        self.inner.to_table()
    }

    #[staticmethod]
    fn from_table(n: usize, text: &str) -> PyResult<Self> {
        border::AllocationRule::from_table(n, text)
            .map(Self::wrap)
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("AllocationRule(n={})", self.inner.n())
    }
}

/// The symmetrized rule with two-way ties capped at `(1 + alpha) / 2`.
#[pyfunction]
fn robust_border_rule(shares: SharesArg) -> PyResult<PyAllocationRule> {
    border::robust_border_rule(&shares.resolve()?)
        .map(PyAllocationRule::wrap)
        .map_err(to_py)
}

/// Solves for a rule implementing `target`; with `caps`, two-way ties are
/// capped by those shares. Raises `InfeasibleError` with the cut witness.
#[pyfunction]
#[pyo3(signature = (rates, target, caps=None))]
fn solve_allocation(rates: Vec<f64>, target: Vec<f64>, caps: Option<SharesArg>) -> PyResult<PyAllocationRule> {
    let rates = BidRates::new(rates).map_err(to_py)?;
    let target = InterimTarget::new(target).map_err(to_py)?;
    let bounds = match caps {
        Some(s) => CapacityBounds::robust_doubletons(&s.resolve()?),
        None => CapacityBounds::new(),
    };
    border::solve_allocation(&rates, &target, &bounds)
        .map(PyAllocationRule::wrap)
        .map_err(to_py)
}

#[pyfunction]
fn border_feasible(rates: Vec<f64>, target: Vec<f64>) -> PyResult<bool> {
    let rates = BidRates::new(rates).map_err(to_py)?;
    let target = InterimTarget::new(target).map_err(to_py)?;
    border::border_feasible(&rates, &target)
        .map(|v| v.is_feasible())
        .map_err(to_py)
}

/// `(agents, lhs, margin)` for every agent set.
#[pyfunction]
fn key_lemma_sweep(shares: SharesArg) -> PyResult<Vec<(Vec<usize>, f64, f64)>> {
    Ok(robustcert::key_lemma_sweep(&shares.resolve()?)
        .into_iter()
        .map(|r| (r.subset.members().collect(), r.lhs, r.margin))
        .collect())
}

#[pyfunction]
fn envelope_f(x: f64, m: u32) -> PyResult<f64> {
    robustcert::envelope_f(x, m).map_err(to_py)
}

#[pyfunction]
fn envelope_g(x: f64, m: u32) -> PyResult<f64> {
    robustcert::envelope_g(x, m).map_err(to_py)
}

#[pyfunction]
fn robust_lower_bound(alpha: f64, p_bar: f64) -> PyResult<f64> {
    robustcert::robust_lower_bound(alpha, p_bar).map_err(to_py)
}

#[pyfunction]
fn hardness_bound(shares: SharesArg) -> PyResult<f64> {
    Ok(robustcert::hardness_bound(&shares.resolve()?))
}

#[pyfunction]
fn centralized_upper_bound(shares: SharesArg) -> PyResult<f64> {
    Ok(robustcert::centralized_upper_bound(&shares.resolve()?).value)
}

#[pyfunction]
fn anticorrelated_upper_bound(rule: &PyAllocationRule, shares: SharesArg, agent: usize) -> PyResult<f64> {
    robustcert::anticorrelated_upper_bound(&rule.inner, &shares.resolve()?, agent).map_err(to_py)
}

/// Symmetric-share rule under which agent 0 loses most two-way ties.
#[pyfunction]
fn counterexample_rule(n: usize) -> PyResult<PyAllocationRule> {
    experiments::counterexample_rule(n)
        .map(PyAllocationRule::wrap)
        .map_err(to_py)
}

/// Runs the mechanism with Bernoulli(`q`) values and honest bidders.
/// With `adversary`, every other agent joins a coalition that takes turns
/// bidding alone against that agent. Returns per-agent `lambda` (mean
/// utility over ideal utility), its standard error and the number of seeds
/// in which the agent ran out of tokens.
#[pyfunction]
#[pyo3(signature = (shares, rule, q, horizon, seeds=1, seed=0, adversary=None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    shares: SharesArg,
    rule: &PyAllocationRule,
    q: f64,
    horizon: u64,
    seeds: u64,
    seed: u64,
    adversary: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let shares = shares.resolve()?;
    let n = shares.len();
    let values = ValueDistribution::bernoulli(q).map_err(to_py)?;
    let config = MechanismConfig::new(shares.clone(), vec![values; n], rule.inner.clone(), horizon).map_err(to_py)?;
    let honest = |i: usize| -> PyResult<Box<dyn Strategy>> {
        aggressive_strategy(config.rates.as_slice()[i], &config.values[i])
            .map(|s| Box::new(s) as Box<dyn Strategy>)
            .map_err(to_py)
    };
    let profile = match adversary {
        None => StrategyProfile::independent((0..n).map(honest).collect::<PyResult<_>>()?),
        Some(target) => {
            let controller = turn_taking_adversary(target, &shares).map_err(to_py)?;
            StrategyProfile::with_coalition(n, vec![(target, honest(target)?)], controller.coalition(), Box::new(controller))
        }
    }
    .map_err(to_py)?;

    let traces = py.detach(|| monte_carlo(&config, &profile, seeds, seed)).map_err(to_py)?;
    let mut lambda = Vec::with_capacity(n);
    let mut se = Vec::with_capacity(n);
    for i in 0..n {
        let (m, s) = mean_se(&ideal_fractions(&config, &traces, i).map_err(to_py)?);
        lambda.push(m);
        se.push(s);
    }
    let exhausted: Vec<usize> = (0..n).map(|i| exhausted_seeds(&traces, i)).collect();
    let out = PyDict::new(py);
    out.set_item("lambda", lambda)?;
    out.set_item("se", se)?;
    out.set_item("exhausted", exhausted)?;
    Ok(out)
}

/// Long-run win fractions of dynamic max-min fairness with bid rates equal
/// to the shares.
#[pyfunction]
#[pyo3(signature = (shares, horizon, seed=0))]
fn dmmf_win_fractions(py: Python<'_>, shares: SharesArg, horizon: u64, seed: u64) -> PyResult<Vec<f64>> {
    let shares = shares.resolve()?;
    let rates = shares.to_rates();
    py.detach(|| dmmf::run_dmmf(&shares, &rates, horizon, seed, 0))
        .map(|run| run.win_fractions())
        .map_err(to_py)
}

#[pymodule]
fn robust_border_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFairShares>()?;
    m.add_class::<PyAllocationRule>()?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_function(wrap_pyfunction!(robust_border_rule, m)?)?;
    m.add_function(wrap_pyfunction!(solve_allocation, m)?)?;
    m.add_function(wrap_pyfunction!(border_feasible, m)?)?;
    m.add_function(wrap_pyfunction!(key_lemma_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(envelope_f, m)?)?;
    m.add_function(wrap_pyfunction!(envelope_g, m)?)?;
    m.add_function(wrap_pyfunction!(robust_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(hardness_bound, m)?)?;
    m.add_function(wrap_pyfunction!(centralized_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(anticorrelated_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_rule, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(dmmf_win_fractions, m)?)?;
    Ok(())
}
