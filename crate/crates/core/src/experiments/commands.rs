use std::sync::Arc;

use rayon::prelude::*;

use crate::border::{
    induced_interim, nonempty_subsets, robust_border_rule, solve_allocation, AllocationRule, BidRates, BorderVerdict,
    CapacityBounds, FairShares, SubsetId,
};
use crate::dmmf::{derive_rule_via_dmmf, limiting_win_fractions, run_dmmf, subgroup_stability};
use crate::error::Error;
use crate::mechanism::{summary_csv, utility_report, BudgetMode, MechanismConfig, SlackMode};
use crate::rng::{derive_seed, stream, Stream};
use crate::robustcert::{
    anticorrelated_upper_bound, centralized_upper_bound, envelope_csv, envelope_f, envelope_g, hardness_bound,
    key_lemma_sweep, robust_lower_bound, sweep_csv,
};
use crate::strategies::{turn_taking_adversary, StrategyProfile, StrategySpec};
use crate::valuations::ideal_utility;

use super::config::{BoundsSpec, CheckMode, ExperimentConfig, RuleSpec};
use super::report::{mean_se, AgentEstimate, Check, ExperimentReport};
use super::{
    best_response_scan, counterexample_rule, exhausted_seeds, ideal_fractions, monte_carlo, random_shares,
    worst_tie_loss, CliError,
};

/// Bundled configs, one per reproduced claim.
pub const PRESETS: &[(&str, &str)] = &[
    ("solve_two_agent", include_str!("../../presets/solve_two_agent.toml")),
    ("verify_border", include_str!("../../presets/verify_border.toml")),
    ("keylemma", include_str!("../../presets/keylemma.toml")),
    ("equilibrium", include_str!("../../presets/equilibrium.toml")),
    ("robustness", include_str!("../../presets/robustness.toml")),
    ("counterexample", include_str!("../../presets/counterexample.toml")),
    ("bestresponse", include_str!("../../presets/bestresponse.toml")),
    ("dmmf", include_str!("../../presets/dmmf.toml")),
    ("envelope", include_str!("../../presets/envelope.toml")),
];

pub fn preset(name: &str) -> Result<ExperimentConfig, CliError> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!("unknown preset {name:?}; available: {}", names.join(", ")))
        })?;
    ExperimentConfig::parse_toml(text).map_err(|e| CliError::Config(format!("preset {name}: {e}")))
}

fn base_seed(cfg: &ExperimentConfig, seed: Option<u64>) -> u64 {
    seed.or(cfg.seed).unwrap_or(0)
}

fn report_for(cfg: &ExperimentConfig, default_theorem: &str, tolerance: String) -> ExperimentReport {
    ExperimentReport::new(cfg.name(), cfg.theorem.as_deref().unwrap_or(default_theorem), tolerance)
}

fn check_tolerance(cfg: &ExperimentConfig, default: f64) -> f64 {
    cfg.check.as_ref().and_then(|c| c.tolerance).unwrap_or(default)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn bounds_for(cfg: &ExperimentConfig, shares: &FairShares) -> CapacityBounds {
    match cfg.bounds.unwrap_or_default() {
        BoundsSpec::None => CapacityBounds::new(),
        BoundsSpec::RobustDoubleton => CapacityBounds::robust_doubletons(shares),
    }
}

fn rule_for(cfg: &ExperimentConfig, shares: &FairShares, rates: &BidRates, seed: u64) -> Result<AllocationRule, CliError> {
    let n = shares.len();
    let rule = match cfg.rule.as_ref().unwrap_or(&RuleSpec::RobustBorder) {
        RuleSpec::RobustBorder => robust_border_rule(shares)?,
        RuleSpec::UnboundedBorder => solve_allocation(rates, &cfg.target(shares)?, &CapacityBounds::new())?,
        RuleSpec::Uniform => AllocationRule::uniform(n),
        RuleSpec::Counterexample => counterexample_rule(n).map_err(|e| CliError::Config(format!("rule: {e}")))?,
        RuleSpec::Table { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("rule table {}: {e}", path.display())))?;
            AllocationRule::from_table(n, &text).map_err(|e| CliError::Config(format!("rule table {}: {e}", path.display())))?
        }
        RuleSpec::DmmfDerived { horizon } => derive_rule_via_dmmf(rates, &cfg.target(shares)?, *horizon, seed)?.to_rule()?,
    };
    Ok(rule)
}

struct Setup {
    config: MechanismConfig,
    profile: StrategyProfile,
    adversary_target: Option<usize>,
}

fn setup(cfg: &ExperimentConfig, seed: u64) -> Result<Setup, CliError> {
    let shares = cfg.shares()?;
    let n = shares.len();
    let rates = cfg.rates(&shares)?;
    let values = cfg.values(n)?;
    let rule = rule_for(cfg, &shares, &rates, seed)?;
    let mut config = MechanismConfig::new(shares.clone(), values.clone(), Arc::new(rule), cfg.horizon()?)
        .and_then(|c| c.with_rates(rates.clone()))
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_budget_mode(cfg.budget_mode.unwrap_or_default().into());
    if let Some(slack) = &cfg.slack {
        config = config
            .with_slack(SlackMode::from(slack))
            .map_err(|e| CliError::Config(format!("slack: {e}")))?;
    }

    let specs = cfg.individual_specs(n)?;
    let build = |i: usize| {
        specs[i]
            .build(rates.as_slice()[i], &values[i])
            .map_err(|e| CliError::Config(format!("strategy for agent {i}: {e}")))?
            .ok_or_else(|| CliError::Config(format!("strategy for agent {i}: coalition strategies go in strategies.adversary")))
    };
    let (profile, adversary_target) = match cfg.strategies().adversary {
        None => (StrategyProfile::independent((0..n).map(build).collect::<Result<_, _>>()?)?, None),
        Some(StrategySpec::TurnTaking { target }) => {
            let controller = turn_taking_adversary(target, &shares).map_err(|e| CliError::Config(format!("adversary: {e}")))?;
            let coalition = controller.coalition();
            let profile = StrategyProfile::with_coalition(n, vec![(target, build(target)?)], coalition, Box::new(controller))?;
            (profile, Some(target))
        }
        Some(other) => return Err(CliError::Config(format!("adversary: {other:?} is not a coalition strategy"))),
    };
    Ok(Setup {
        config,
        profile,
        adversary_target,
    })
}

/// Solves for a rule implementing the configured target and bounds.
pub fn cmd_solve(cfg: &ExperimentConfig, _seed: Option<u64>) -> Result<ExperimentReport, CliError> {
    let shares = cfg.shares()?;
    let rates = cfg.rates(&shares)?;
    let target = cfg.target(&shares)?;
    let bounds = bounds_for(cfg, &shares);
    let mut report = report_for(
        cfg,
        "a rule implementing the interim target exists iff the flow network saturates",
        "interim 1e-7, bounds 1e-9".into(),
    );
    let solved = match cfg.bounds.unwrap_or_default() {
        BoundsSpec::RobustDoubleton if cfg.target.is_none() && cfg.rates.is_none() => robust_border_rule(&shares),
        _ => solve_allocation(&rates, &target, &bounds),
    };
    match solved {
        Ok(rule) => {
            let p = induced_interim(&rule, &rates)?;
            report.checks.push(Check::at_most(
                "max |interim - target|",
                max_abs_diff(p.as_slice(), target.as_slice()),
                0.0,
                1e-7,
            ));
            let overshoot = bounds.iter().map(|(s, i, b)| rule.prob(s, i) - b).fold(0.0, f64::max);
            report.checks.push(Check::at_most("max bound overshoot", overshoot, 0.0, 1e-9));
            let row_error = nonempty_subsets(rule.n())
                .map(|s| (rule.row(s).iter().sum::<f64>() - 1.0).abs())
                .fold(0.0, f64::max);
            report.checks.push(Check::at_most("max |row sum - 1|", row_error, 0.0, 1e-9));
            report.artifact("rule.csv", rule.to_table());
        }
        Err(Error::Infeasible(w)) => {
            report.notes.push(format!("infeasible: {w}"));
            report.checks.push(Check::holds("target is implementable", false));
        }
        Err(e @ Error::BorderEquality { .. }) => {
            report.notes.push(e.to_string());
            report.checks.push(Check::holds("target is implementable", false));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(report)
}

/// Checks the target against Border's inequalities directly.
pub fn cmd_verify_border(cfg: &ExperimentConfig, _seed: Option<u64>) -> Result<ExperimentReport, CliError> {
    let shares = cfg.shares()?;
    let rates = cfg.rates(&shares)?;
    let target = cfg.target(&shares)?;
    let expect = cfg.expect_feasible.unwrap_or(true);
    let mut report = report_for(cfg, "Border's inequalities characterize implementable targets", "1e-9".into());
    let verdict = crate::border::border_feasible(&rates, &target)?;
    let note = match &verdict {
        BorderVerdict::Feasible => "feasible".to_string(),
        BorderVerdict::EqualityViolated { lhs, rhs } => {
            format!("total demand {lhs:.12} differs from the chance anyone bids {rhs:.12}")
        }
        BorderVerdict::Violated { subset, lhs, rhs } => {
            format!("agents {subset} demand {lhs:.12} but bid together only {rhs:.12} of the time")
        }
    };
    report.notes.push(note);
    let label = if expect { "target is feasible" } else { "target is infeasible" };
    report.checks.push(Check::holds(label, verdict.is_feasible() == expect));
    Ok(report)
}

/// Sweeps the key inequality over every agent set of explicit and random
/// share vectors.
pub fn cmd_keylemma(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<ExperimentReport, CliError> {
    let mut pool: Vec<FairShares> = Vec::new();
    if cfg.shares.is_some() || cfg.agents.is_some() {
        pool.push(cfg.shares()?);
    }
    if let Some(spec) = &cfg.keylemma {
        let lo = spec.min_agents.unwrap_or(2);
        let hi = spec.max_agents.unwrap_or(12);
        if lo < 1 || hi > crate::border::MAX_AGENTS || lo > hi {
            return Err(CliError::Config(format!("keylemma: agent range {lo}..={hi} is invalid")));
        }
        let mut rng = stream(base_seed(cfg, seed), Stream::Sampling);
        for _ in 0..spec.draws {
            let n = lo + (rand::Rng::random_range(&mut rng, 0..=(hi - lo)));
            pool.push(random_shares(n, &mut rng)?);
        }
    }
    if pool.is_empty() {
        return Err(CliError::Config("keylemma needs `shares`, `agents` or a [keylemma] section".into()));
    }

    let mut report = report_for(
        cfg,
        "capped two-way ties keep the worst-case target feasible for every agent set",
        "lhs <= 1 + 1e-12".into(),
    );
    let sweeps: Vec<_> = pool.par_iter().map(key_lemma_sweep).collect();
    let mut draws_csv = String::from("draw,n,min_margin,worst_mask\n");
    let mut failures = 0usize;
    let mut boundary_error: f64 = 0.0;
    let mut worst_margin = f64::INFINITY;
    for (k, (shares, sweep)) in pool.iter().zip(&sweeps).enumerate() {
        let worst = sweep
            .iter()
            .min_by(|a, b| a.margin.total_cmp(&b.margin))
            .expect("sweeps are nonempty");
        failures += sweep.iter().filter(|r| !r.pass).count();
        worst_margin = worst_margin.min(worst.margin);
        let full = SubsetId::full(shares.len()).mask() as usize;
        boundary_error = boundary_error.max((sweep[0].lhs - 1.0).abs()).max((sweep[full].lhs - 1.0).abs());
        draws_csv.push_str(&format!("{k},{},{:.6e},{}\n", shares.len(), worst.margin, worst.subset.mask()));
    }
    report.notes.push(format!(
        "{} share vectors, {} agent sets",
        pool.len(),
        sweeps.iter().map(Vec::len).sum::<usize>()
    ));
    report.checks.push(Check::at_most("failing agent sets", failures as f64, 0.0, 0.0));
    report.checks.push(Check::at_least("smallest margin", worst_margin, 0.0, 1e-12));
    report.checks.push(Check::at_most("|lhs - 1| on empty and full sets", boundary_error, 0.0, 1e-12));
    report.artifact("keylemma.csv", sweep_csv(&sweeps[0]));
    report.artifact("keylemma_draws.csv", draws_csv);
    Ok(report)
}

fn estimates(config: &MechanismConfig, traces: &[crate::mechanism::SimulationTrace], targets: &[Option<f64>]) -> Result<Vec<(AgentEstimate, Vec<f64>)>, CliError> {
    (0..config.n())
        .map(|i| {
            let fractions = ideal_fractions(config, traces, i)?;
            let (mean, se) = mean_se(&fractions);
            Ok((
                AgentEstimate {
                    agent: i,
                    mean,
                    se,
                    target: targets[i],
                },
                fractions,
            ))
        })
        .collect()
}

fn simulation_artifacts(report: &mut ExperimentReport, config: &MechanismConfig, traces: &[crate::mechanism::SimulationTrace]) -> Result<(), CliError> {
    let first = &traces[0];
    let summary = utility_report(first, &config.values, &config.shares)?;
    report.artifact("summary.csv", summary_csv(&summary, first));
    report.artifact("estimates.csv", report.estimates_csv());
    Ok(())
}

/// Honest play: every agent's realized fraction of its ideal utility.
pub fn cmd_simulate(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<ExperimentReport, CliError> {
    let root = base_seed(cfg, seed);
    let s = setup(cfg, root)?;
    let config = &s.config;
    let seeds = cfg.seeds();
    let tol = check_tolerance(cfg, 0.02);
    let mut report = report_for(
        cfg,
        "honest play earns each agent its interim win probability times its ideal utility",
        format!("{tol} absolute on mean ideal fraction; ceiling + 3 SE"),
    );
    let traces = monte_carlo(config, &s.profile, seeds, root)?;

    // Honest beta-aggressive agents earn v*(beta_i) p_i per round.
    let interim = induced_interim(&config.rule, &config.rates)?;
    let targets: Vec<Option<f64>> = (0..config.n())
        .map(|i| {
            let ideal = ideal_utility(&config.values[i], config.shares.as_slice()[i])?;
            let own = ideal_utility(&config.values[i], config.rates.as_slice()[i])?;
            Ok((ideal > 0.0).then(|| interim.as_slice()[i] * own / ideal))
        })
        .collect::<Result<_, Error>>()?;
    let ceiling = centralized_upper_bound(&config.shares).value;
    let checked: Vec<usize> = match cfg.check.as_ref().and_then(|c| c.agent) {
        Some(a) if a >= config.n() => return Err(CliError::Config(format!("check.agent {a} does not exist"))),
        Some(a) => vec![a],
        None => (0..config.n()).collect(),
    };
    let est = estimates(config, &traces, &targets)?;
    for (e, _) in &est {
        if !checked.contains(&e.agent) {
            continue;
        }
        let expected = cfg.check.as_ref().and_then(|c| c.expected).or(e.target);
        let mode = cfg.check.as_ref().map(|c| c.mode).unwrap_or(CheckMode::Near);
        if let Some(expected) = expected {
            report.checks.push(Check::new(format!("agent {} mean ideal fraction", e.agent), mode, e.mean, expected, tol));
        }
        if config.rates == config.shares.to_rates() {
            report.checks.push(Check::at_most(
                format!("agent {} below centralized ceiling", e.agent),
                e.mean,
                ceiling,
                3.0 * e.se,
            ));
        }
    }
    if config.budget_mode == BudgetMode::EndOfHorizon {
        let allowed = (seeds as f64 * 0.01).floor().max(1.0);
        let worst = (0..config.n()).map(|i| exhausted_seeds(&traces, i)).max().unwrap_or(0);
        report.checks.push(Check::at_most("seeds with an exhausted budget (worst agent)", worst as f64, allowed, 0.0));
    }
    report.notes.push(format!("{seeds} seeds x {} rounds", config.horizon));
    report.estimates = est.into_iter().map(|(e, _)| e).collect();
    simulation_artifacts(&mut report, config, &traces)?;
    Ok(report)
}

/// A coalition attacks one honest agent; checks the agent's guarantee.
pub fn cmd_robustness(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<ExperimentReport, CliError> {
    let root = base_seed(cfg, seed);
    let s = setup(cfg, root)?;
    let config = &s.config;
    let target = s
        .adversary_target
        .ok_or_else(|| CliError::Config("robustness needs strategies.adversary".into()))?;
    let seeds = cfg.seeds();
    let tol = check_tolerance(cfg, 0.03);
    let a = config.shares.as_slice()[target];
    let floor = robust_lower_bound(a, worst_tie_loss(&config.rule, target).max(0.5))?;
    let ceiling = anticorrelated_upper_bound(&config.rule, &config.shares, target)?;
    let mut report = report_for(
        cfg,
        "an honest agent keeps 1 - pbar (1 - alpha_i) of its ideal utility against any coalition",
        format!("{tol} absolute on mean ideal fraction"),
    );
    let traces = monte_carlo(config, &s.profile, seeds, root)?;
    let targets: Vec<Option<f64>> = (0..config.n()).map(|i| (i == target).then_some(ceiling)).collect();
    let est = estimates(config, &traces, &targets)?;
    let mine = &est[target].0;
    match cfg.check.as_ref() {
        Some(c) if c.expected.is_some() => {
            report.checks.push(Check::new(
                format!("agent {target} mean ideal fraction"),
                c.mode,
                mine.mean,
                c.expected.unwrap_or_default(),
                tol,
            ));
        }
        _ => {
            report.checks.push(Check::at_least(format!("agent {target} above robustness floor"), mine.mean, floor, tol));
            report.checks.push(Check::at_most(format!("agent {target} below turn-taking bound"), mine.mean, ceiling, tol));
        }
    }
    report.notes.push(format!(
        "floor {floor:.6}, turn-taking bound {ceiling:.6}, hardness bound {:.6}",
        hardness_bound(&config.shares)
    ));
    let rates: Vec<f64> = traces.iter().filter_map(|t| t.win_rate_when_bidding(target)).collect();
    let (rate, rate_se) = mean_se(&rates);
    report.notes.push(format!("win rate when bidding {rate:.6} +/- {rate_se:.6}"));
    report.estimates = est.into_iter().map(|(e, _)| e).collect();
    simulation_artifacts(&mut report, config, &traces)?;
    Ok(report)
}

/// Scans threshold deviations for one agent against honest opponents.
pub fn cmd_bestresponse(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<ExperimentReport, CliError> {
    let root = base_seed(cfg, seed);
    let s = setup(cfg, root)?;
    let spec = cfg
        .best_response
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [best_response] section".into()))?;
    let agent = spec.agent.unwrap_or(0);
    if agent >= s.config.n() {
        return Err(CliError::Config(format!("best_response.agent {agent} does not exist")));
    }
    if let Some(b) = spec.grid.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(CliError::Config(format!("best_response.grid: {b} is not in [0, 1]")));
    }
    let table = best_response_scan(&s.config, agent, &spec.grid, cfg.seeds(), root)?;
    let mut report = report_for(
        cfg,
        "honest play is an approximate equilibrium",
        format!("epsilon(T) = 5 vbar sqrt(ln T / T) = {:.6} plus 2 SE", table.epsilon),
    );
    for row in &table.rows {
        report.checks.push(Check::at_most(
            format!("deviation beta' = {} gain beyond allowance", row.beta),
            table.excess(row),
            0.0,
            0.0,
        ));
    }
    report.estimates.push(AgentEstimate {
        agent,
        mean: table.baseline.lambda,
        se: table.baseline.se / ideal_utility(&s.config.values[agent], s.config.shares.as_slice()[agent])?,
        target: None,
    });
    report.artifact("best_response.csv", table.csv());
    Ok(report)
}

/// Runs dynamic max-min fairness and optionally estimates a rule from it.
pub fn cmd_dmmf(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<ExperimentReport, CliError> {
    let root = base_seed(cfg, seed);
    let shares = cfg.shares()?;
    let rates = cfg.rates(&shares)?;
    let horizon = cfg.horizon()?;
    let tol = check_tolerance(cfg, 0.01);
    let spec = cfg.dmmf.clone();
    let thin = spec.as_ref().and_then(|d| d.thin).unwrap_or((horizon / 100).max(1));
    let mut report = report_for(
        cfg,
        "max-min fairness wins alpha_i (1 - prod(1 - beta)) of the rounds in the long run",
        format!("{tol} absolute on W_i / T"),
    );

    let stability = subgroup_stability(&shares, rates.as_slice())?;
    let unstable: Vec<String> = stability.iter().filter(|c| !c.stable).map(|c| c.subset.to_string()).collect();
    if !unstable.is_empty() {
        report.notes.push(format!("stability fails for {}", unstable.join(" ")));
    }
    report.checks.push(Check::holds("every proper agent set is stable", unstable.is_empty()));

    let seeds = cfg.seeds();
    let runs = (0..seeds)
        .into_par_iter()
        .map(|k| run_dmmf(&shares, &rates, horizon, derive_seed(root, k), thin))
        .collect::<Result<Vec<_>, _>>()?;
    let limit = limiting_win_fractions(&shares, &rates);
    for (i, lim) in limit.iter().enumerate() {
        let fractions: Vec<f64> = runs.iter().map(|r| r.win_fractions()[i]).collect();
        let (mean, se) = mean_se(&fractions);
        report.estimates.push(AgentEstimate {
            agent: i,
            mean,
            se,
            target: Some(*lim),
        });
        report.checks.push(Check::near(format!("agent {i} W/T"), mean, *lim, tol));
    }
    report.artifact("dmmf_trace.csv", runs[0].trace_csv());

    if spec.as_ref().is_some_and(|d| d.derive) {
        let target = cfg.target(&shares)?;
        let derive_tol = spec.as_ref().and_then(|d| d.derive_tolerance).unwrap_or(0.02);
        let estimate = derive_rule_via_dmmf(&rates, &target, horizon, root)?;
        let rule = estimate.to_rule()?;
        let p = induced_interim(&rule, &rates)?;
        report.checks.push(Check::at_most(
            "derived rule max |interim - target|",
            max_abs_diff(p.as_slice(), target.as_slice()),
            0.0,
            derive_tol,
        ));
        report.artifact("dmmf_rule.csv", rule.to_table());
    }
    Ok(report)
}

/// Tabulates the envelope function and checks its shape.
pub fn cmd_envelope(cfg: &ExperimentConfig, _seed: Option<u64>) -> Result<ExperimentReport, CliError> {
    let spec = cfg.envelope.clone();
    let points = spec.as_ref().and_then(|e| e.points).unwrap_or(99);
    let max_m = spec.as_ref().and_then(|e| e.max_m).unwrap_or(10);
    if points == 0 || max_m == 0 {
        return Err(CliError::Config("envelope: points and max_m must be positive".into()));
    }
    let xs: Vec<f64> = (1..=points).map(|k| k as f64 / (points + 1) as f64).collect();
    let ms: Vec<u32> = (1..=max_m).collect();
    let mut report = report_for(
        cfg,
        "the envelope f never exceeds 1 and g is nonincreasing",
        "f <= 1 + 1e-12, finite-difference slope of g <= 1e-6".into(),
    );

    let mut max_f = f64::NEG_INFINITY;
    let mut max_slope = f64::NEG_INFINITY;
    let mut endpoint_error: f64 = 0.0;
    let mut dips = true;
    let h = 1e-7;
    for &m in &ms {
        endpoint_error = endpoint_error
            .max((envelope_f(0.0, m)? - 1.0).abs())
            .max((envelope_f(1.0, m)? - 1.0).abs());
        let mut min_f = f64::INFINITY;
        for &x in &xs {
            let f = envelope_f(x, m)?;
            max_f = max_f.max(f);
            min_f = min_f.min(f);
            let (lo, hi) = ((x - h).max(0.0), (x + h).min(1.0));
            max_slope = max_slope.max((envelope_g(hi, m)? - envelope_g(lo, m)?) / (hi - lo));
        }
        dips &= min_f < 1.0;
    }
    report.checks.push(Check::at_most("max f on grid", max_f, 1.0, 1e-12));
    report.checks.push(Check::at_most("max finite-difference slope of g", max_slope, 0.0, 1e-6));
    report.checks.push(Check::at_most("|f - 1| at X = 0 and X = 1", endpoint_error, 0.0, 1e-12));
    report.checks.push(Check::holds("f dips below 1 inside (0, 1) for every m", dips));
    report.artifact("envelope.csv", envelope_csv(&xs, &ms)?);
    Ok(report)
}
