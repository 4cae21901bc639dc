use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robust_border::experiments::{self, CliError, ExperimentConfig, ExperimentReport};

#[derive(Parser)]
#[command(name = "brb", version, about = "Robust Border allocation rules: solver, certificates and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for an allocation rule implementing an interim target.
    Solve(Common),
    /// Check an interim target against Border's inequalities.
    VerifyBorder(Common),
    /// Sweep the key inequality over every agent set.
    Keylemma(Common),
    /// Simulate honest play and report realized utility fractions.
    Simulate(Common),
    /// Simulate a colluding coalition against one honest agent.
    Robustness(Common),
    /// Scan threshold deviations for one agent.
    Bestresponse(Common),
    /// Run dynamic max-min fairness and estimate a rule from it.
    Dmmf(Common),
    /// Tabulate the envelope function.
    Envelope(Common),
    /// List the bundled presets.
    Presets,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML, or JSON with a .json extension).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Use a bundled preset instead of a config file.
    #[arg(long)]
    preset: Option<String>,
    /// Root seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV outputs.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self, default_preset: &str) -> Result<ExperimentConfig, CliError> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path),
            (None, Some(name)) => experiments::preset(name),
            (None, None) => experiments::preset(default_preset),
        }
    }
}

type Runner = fn(&ExperimentConfig, Option<u64>) -> Result<ExperimentReport, CliError>;

fn write_outputs(dir: &Path, report: &ExperimentReport) -> Result<(), CliError> {
    let io = |path: &Path, source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let files = std::iter::once(("report.csv".to_string(), report.checks_csv()))
        .chain(report.artifacts.iter().map(|a| (a.name.clone(), a.contents.clone())));
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| io(&path, e))?;
    }
    Ok(())
}

fn execute(common: &Common, default_preset: &str, runner: Runner) -> Result<bool, CliError> {
    let cfg = common.load(default_preset)?;
    let report = runner(&cfg, common.seed)?;
    print!("{}", report.summary());
    if let Some(dir) = &common.out {
        write_outputs(dir, &report)?;
    }
    Ok(report.pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, default_preset, runner): (&Common, &str, Runner) = match &cli.command {
        Command::Solve(c) => (c, "solve_two_agent", experiments::cmd_solve),
        Command::VerifyBorder(c) => (c, "verify_border", experiments::cmd_verify_border),
        Command::Keylemma(c) => (c, "keylemma", experiments::cmd_keylemma),
        Command::Simulate(c) => (c, "equilibrium", experiments::cmd_simulate),
        Command::Robustness(c) => (c, "robustness", experiments::cmd_robustness),
        Command::Bestresponse(c) => (c, "bestresponse", experiments::cmd_bestresponse),
        Command::Dmmf(c) => (c, "dmmf", experiments::cmd_dmmf),
        Command::Envelope(c) => (c, "envelope", experiments::cmd_envelope),
        Command::Presets => {
            for (name, _) in experiments::PRESETS {
                println!("{name}");
            }
            return ExitCode::SUCCESS;
        }
    };
    match execute(common, default_preset, runner) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
