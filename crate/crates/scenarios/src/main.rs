use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use continuum_scenarios::{bundled, run, RunOptions, RunSummary, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "continuum", version, about = "Wave propagation, world bundles and measurement scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Source {
    /// Scenario file (TOML).
    #[arg(long, short, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Name of a bundled scenario.
    #[arg(long, short)]
    scenario: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ScenarioConfig> {
        match (&self.config, &self.scenario) {
            (Some(path), _) => Ok(ScenarioConfig::load(path)?),
            (None, Some(name)) => Ok(bundled::load(name)?),
            (None, None) => bail!("give --config <file> or --scenario <name>"),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory (default: runs/<name>).
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Threshold override, `metric=value`. Repeatable.
        #[arg(long = "tol", value_parser = parse_tolerance)]
        tolerances: Vec<(String, f64)>,
    },
    /// Check a scenario file without running numerics.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// List the bundled scenarios.
    List,
    /// Print the metric table of a previous run.
    Report {
        /// A summary.json file or the run directory holding it.
        path: PathBuf,
    },
}

fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected metric=value, got `{s}`"))?;
    let value: f64 = value.parse().map_err(|e| format!("bad value in `{s}`: {e}"))?;
    if !(value > 0.0 && value.is_finite()) {
        return Err(format!("tolerance for {name} must be positive"));
    }
    Ok((name.to_string(), value))
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { source, out, seed, threads, tolerances } => {
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
            }
            let config = source.load()?;
            let options =
                RunOptions { out_dir: out, seed, tolerances: tolerances.into_iter().collect::<BTreeMap<_, _>>(), write_artifacts: true };
            let dir = run::output_dir(&config, &options);
            let summary = run::run_scenario(&config, &options)?;
            print!("{}", summary.render());
            println!("artifacts in {}", dir.display());
            Ok(summary.passed())
        }
        Command::Validate { source } => {
            let config = source.load()?;
            let notes = config.validate()?;
            println!("{}: valid ({} analyses)", config.name, config.analysis.len());
            for n in notes {
                println!("note: {n}");
            }
            Ok(true)
        }
        Command::List => {
            for name in bundled::names() {
                let config = bundled::load(name)?;
                println!("{name:<28} {}", config.description);
            }
            Ok(true)
        }
        Command::Report { path } => {
            let file = if path.is_dir() { path.join("summary.json") } else { path };
            let summary = RunSummary::read_json(&file).with_context(|| format!("reading {}", file.display()))?;
            print!("{}", summary.render());
            Ok(summary.passed())
        }
    }
}
