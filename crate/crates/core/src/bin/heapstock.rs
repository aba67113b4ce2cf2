use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use heapstock::experiment::reference::{self, Artifact};
use heapstock::experiment::{self, csvio, parse_config, RunConfig, RunOutcome, SolverKind, SweepSpec};
use heapstock::{ModelInstance, Result};

/// Production plans for a breakable, heaped item.
#[derive(Parser, Debug)]
#[command(name = "heapstock", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one configuration.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also write the full-resolution trajectory to `<stem>.grid.csv`.
        #[arg(long)]
        full_grid: bool,
    },
    /// Profit over a range of one model parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: Option<String>,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Re-run one of the published tables and check it.
    Reproduce {
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=5))]
        table: u8,
        #[arg(long, default_value_t = heapstock::model::DEFAULT_INTERVALS)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pair the trajectories of two configurations.
    Compare {
        /// Exactly two config files, A then B.
        #[arg(long, num_args = 1, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        solver: Option<SolverKind>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        full_grid: bool,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Config file; the baseline instance with b1 = 0.02 when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    solver: Option<SolverKind>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(path: Option<&Path>, solver: Option<SolverKind>, grid: Option<usize>) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => parse_config(&fs::read_to_string(p)?)?,
        None => RunConfig::new(ModelInstance::baseline(0.02)?),
    };
    if let Some(s) = solver {
        config.solver = s;
    }
    if let Some(g) = grid {
        config.grid = g;
    }
    config.validate()?;
    Ok(config)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_summary(outcome: &RunOutcome) {
    for (k, v) in outcome.summary.rows() {
        eprintln!("{k},{v}");
    }
}

fn write_run(outcome: &RunOutcome, out: Option<&Path>, full_grid: bool) -> Result<()> {
    csvio::write_trajectory(writer(out)?, &outcome.report)?;
    match out {
        Some(p) => {
            csvio::write_summary(File::create(sibling(p, "summary"))?, &outcome.summary)?;
            if full_grid {
                csvio::write_trajectory(File::create(sibling(p, "grid"))?, &outcome.trajectory)?;
            }
        }
        None => print_summary(outcome),
    }
    Ok(())
}

fn flagged(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { common, full_grid } => {
            let config = load(common.config.as_deref(), common.solver, common.grid)?;
            let outcome = experiment::run(&config)?;
            write_run(&outcome, common.out.as_deref(), full_grid)?;
            if !outcome.summary.ok() {
                eprintln!("run flagged: converged={} feasible={} max_dynamics_residual={:.3e}",
                    outcome.summary.converged, outcome.summary.feasible, outcome.summary.max_dynamics_residual);
            }
            Ok(flagged(outcome.summary.ok()))
        }
        Command::Sweep { common, param, from, to, step } => {
            let config = load(common.config.as_deref(), common.solver, common.grid)?;
            let base = config.sweep.clone();
            let spec = SweepSpec::new(
                param.as_deref().or(base.as_ref().map(|s| s.param.as_str())).unwrap_or("b1"),
                from.or(base.as_ref().map(|s| s.from)).unwrap_or(0.01),
                to.or(base.as_ref().map(|s| s.to)).unwrap_or(0.08),
                step.or(base.as_ref().map(|s| s.step)).unwrap_or(0.01),
            )?;
            let points = experiment::sweep(&config, &spec)?;
            csvio::write_sweep(writer(common.out.as_deref())?, &spec.param, &points)?;
            Ok(flagged(points.iter().all(|p| p.ok)))
        }
        Command::Reproduce { table, grid, out } => {
            let rep = reference::reproduce(table, grid)?;
            for check in &rep.checks {
                println!("{}", check.line());
            }
            if let Some(p) = out.as_deref() {
                match &rep.artifact {
                    Artifact::Run(outcome) => write_run(outcome, Some(p), false)?,
                    Artifact::Sweep(points) => csvio::write_sweep(File::create(p)?, "b1", points)?,
                }
            }
            let failed = rep.checks.iter().filter(|c| !c.passed).count();
            println!("table {table}: {} of {} checks passed", rep.checks.len() - failed, rep.checks.len());
            Ok(flagged(rep.passed()))
        }
        Command::Compare { config, solver, grid, out, full_grid } => {
            if config.len() != 2 {
                eprintln!("compare takes exactly two --config files, got {}", config.len());
                return Ok(ExitCode::from(2));
            }
            let a = load(Some(&config[0]), solver, grid)?;
            let b = load(Some(&config[1]), solver, grid)?;
            let (rows, ra, rb) = experiment::compare(&a, &b, full_grid)?;
            csvio::write_comparison(writer(out.as_deref())?, &rows)?;
            Ok(flagged(ra.summary.ok() && rb.summary.ok()))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
