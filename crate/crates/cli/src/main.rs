use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tvhc::experiment::{self, ExperimentSpec, Overrides, RunReport, Suite};

#[derive(Parser)]
#[command(name = "tvhc", version, about = "Scheduling experiments with age-dependent holding costs")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "TVHC_WORKERS", global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every suite listed in a spec.
    Run(SpecArgs),
    /// Check a spec without simulating.
    Validate {
        /// Spec file or preset name.
        spec: String,
    },
    /// Run only the single-arm bandit checks of a spec.
    Bandit(SpecArgs),
    /// Run only the queue/bandit coupling checks of a spec.
    Bridge(SpecArgs),
    /// M/M/1 sanity check.
    Sanity(Flags),
    /// List built-in presets, or print one as TOML.
    Preset { name: Option<String> },
}

#[derive(Args)]
struct SpecArgs {
    /// Spec file or preset name.
    spec: String,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    seed: Option<u64>,
    /// Replications per simulation.
    #[arg(long)]
    reps: Option<usize>,
    /// Simulated time per replication.
    #[arg(long)]
    horizon: Option<f64>,
    /// Output directory (default: out/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            replications: self.reps,
            horizon: self.horizon,
            out: self.out.clone(),
        }
    }
}

fn load(spec: &str, flags: &Flags) -> Result<ExperimentSpec> {
    let mut s = ExperimentSpec::load(spec).with_context(|| format!("loading `{spec}`"))?;
    s.apply(&flags.overrides());
    Ok(s)
}

fn execute(spec: ExperimentSpec, only: Option<Suite>) -> Result<ExitCode> {
    let mut spec = spec;
    if let Some(s) = only {
        spec.suites = vec![s];
    }
    let report = experiment::run(&spec).with_context(|| format!("running `{}`", spec.name))?;
    Ok(print_report(&report))
}

fn print_report(r: &RunReport) -> ExitCode {
    for c in &r.checks {
        let mark = if c.pass { "pass" } else { "FAIL" };
        println!("[{mark}] {}: {}: {}", c.suite, c.check, c.detail);
    }
    println!("artifacts in {}", r.out_dir.display());
    if r.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Run(a) => execute(load(&a.spec, &a.flags)?, None),
        Command::Bandit(a) => execute(load(&a.spec, &a.flags)?, Some(Suite::BanditChecks)),
        Command::Bridge(a) => execute(load(&a.spec, &a.flags)?, Some(Suite::BridgeChecks)),
        Command::Sanity(f) => execute(load("sanity", &f)?, Some(Suite::Sanity)),
        Command::Validate { spec } => {
            let s = ExperimentSpec::load(&spec).with_context(|| format!("loading `{spec}`"))?;
            let v = experiment::validate(&s);
            if v.ok() {
                println!("{}: ok", s.name);
                return Ok(ExitCode::SUCCESS);
            }
            for i in &v.issues {
                println!("{}: {}", i.path, i.message);
            }
            Ok(ExitCode::FAILURE)
        }
        Command::Preset { name: None } => {
            for p in experiment::PRESETS {
                println!("{p}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Preset { name: Some(n) } => {
            let s = experiment::preset(&n).with_context(|| format!("no preset named `{n}`"))?;
            print!("{}", s.to_toml()?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
