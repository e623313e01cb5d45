use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spinmarket_core::analysis::{analyze, AnalysisOptions, AnalysisReport};
use spinmarket_core::model::{run_trajectory, ModelParams};
use spinmarket_core::sweep::{execute, plan, ResultStore, RunOutcome, SweepConfig};
use spinmarket_core::validate::{self, Fault, Level};
use spinmarket_core::Error;

mod plot;

#[derive(Parser)]
#[command(name = "spinmarket", version, about = "Spin market simulation and renewal analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and write its magnetisation series as CSV.
    Simulate {
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        /// Lattice side; the market has side^2 agents.
        #[arg(long)]
        side: usize,
        #[arg(long)]
        sweeps: u64,
        #[arg(long, default_value_t = 0)]
        burn_in: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run (or resume) a parameter sweep into a result store.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        store: PathBuf,
        /// Concurrent simulations.
        #[arg(long, env = "SPINMARKET_WORKERS", default_value_t = default_workers())]
        workers: usize,
    },
    /// Build the analysis report from a result store.
    Analyze {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Shift of the upper threshold for the sensitivity rows.
        #[arg(long, default_value_t = 0.05)]
        theta_high: f64,
        /// Shift of the lower threshold for the sensitivity rows.
        #[arg(long, default_value_t = 0.05)]
        theta_low: f64,
        /// Also write the per-run estimates as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Render figures and their CSV tables from a report.
    Plot {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Run the built-in invariant and oracle checks.
    Validate {
        #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
        level: LevelArg,
        #[arg(long, value_enum, default_value_t = FaultArg::None, hide = true)]
        inject_fault: FaultArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    SpinCache,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Failure with its exit status: 2 for bad input, 1 for everything else.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(e: impl ToString) -> Self {
        Self { code: 2, message: e.to_string() }
    }

    fn runtime(e: impl ToString) -> Self {
        Self { code: 1, message: e.to_string() }
    }

    fn classify(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::InvalidConfig(_) | Error::Json(_) => Self::usage(e),
            _ => Self::runtime(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { alpha, beta, side, sweeps, burn_in, seed, out } => {
            simulate(alpha, beta, side, sweeps, burn_in, seed, &out)
        }
        Command::Sweep { config, store, workers } => sweep(&config, &store, workers),
        Command::Analyze { store, report, theta_high, theta_low, csv } => {
            analyze_store(&store, &report, theta_high, theta_low, csv.as_deref())
        }
        Command::Plot { report, outdir } => plot_report(&report, &outdir),
        Command::Validate { level, inject_fault } => run_validate(level, inject_fault),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::runtime(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn simulate(alpha: f64, beta: f64, side: usize, sweeps: u64, burn_in: u64, seed: u64, out: &Path) -> Result<(), Failure> {
    let params = ModelParams::new(alpha, beta, side).map_err(Failure::usage)?;
    if sweeps == 0 {
        return Err(Failure::usage("--sweeps must be >= 1"));
    }
    let traj = run_trajectory(&params, sweeps, burn_in, seed).map_err(Failure::classify)?;
    traj.write_csv(create(out)?).map_err(Failure::runtime)
}

fn sweep(config: &Path, store_path: &Path, workers: usize) -> Result<(), Failure> {
    if workers == 0 {
        return Err(Failure::usage("--workers must be >= 1"));
    }
    let cfg = SweepConfig::load(config).map_err(|e| match e {
        Error::Io(io) => Failure::runtime(format!("{}: {io}", config.display())),
        other => Failure::usage(format!("{}: {other}", config.display())),
    })?;
    let plan = plan(&cfg).map_err(Failure::usage)?;
    let mut store = ResultStore::open(store_path).map_err(Failure::runtime)?;
    if store.skipped_lines() > 0 {
        eprintln!("store: skipped {} unreadable line(s)", store.skipped_lines());
    }
    let total = plan.runs.len();
    let summary = execute(&plan, &mut store, workers, |r| {
        let status = match &r.outcome {
            RunOutcome::Ok { estimate } => {
                format!("ok cycles={} t_renew={:.3}", estimate.n_cycles, estimate.t_renew)
            }
            RunOutcome::InsufficientData { transitions } => {
                format!("insufficient transitions={transitions}")
            }
            RunOutcome::Failed { message } => format!("failed: {message}"),
        };
        eprintln!(
            "run {}/{total} side={} beta={} alpha={} seed={} {status} ({:.1}s)",
            r.run_index + 1,
            r.side,
            r.beta,
            r.alpha,
            r.seed_slot,
            r.wall_time_s
        );
    })
    .map_err(Failure::classify)?;
    eprintln!(
        "sweep: {} planned, {} already stored, {} executed ({} ok, {} insufficient, {} failed)",
        summary.planned, summary.skipped, summary.executed, summary.ok, summary.insufficient, summary.failed
    );
    if !summary.io_failures.is_empty() {
        for (run, e) in &summary.io_failures {
            eprintln!("run {run}: record not written: {e}");
        }
        return Err(Failure::runtime(format!("{} record(s) could not be written", summary.io_failures.len())));
    }
    Ok(())
}

fn analyze_store(store_path: &Path, report: &Path, theta_high: f64, theta_low: f64, csv: Option<&Path>) -> Result<(), Failure> {
    if !store_path.exists() {
        return Err(Failure::runtime(format!("{}: no such store", store_path.display())));
    }
    let store = ResultStore::open(store_path).map_err(Failure::runtime)?;
    let options = AnalysisOptions {
        delta_high: theta_high,
        delta_low: theta_low,
        ..AnalysisOptions::default()
    };
    let rep = analyze(store.records(), &options).map_err(Failure::runtime)?;
    rep.write(create(report)?).map_err(Failure::runtime)?;
    if let Some(path) = csv {
        store.write_csv(create(path)?).map_err(Failure::runtime)?;
    }
    match &rep.alpha_star {
        Some(a) => eprintln!(
            "analyze: {} curves, alpha* = {:.4} +/- {:.4} ({} minima)",
            rep.curves.len(),
            a.mean,
            a.half_width,
            a.minima.len()
        ),
        None => eprintln!("analyze: {} curves, no interior minimum", rep.curves.len()),
    }
    Ok(())
}

fn plot_report(report: &Path, outdir: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(report).map_err(|e| Failure::runtime(format!("{}: {e}", report.display())))?;
    let rep = AnalysisReport::from_json(&text).map_err(|e| Failure::runtime(format!("{}: {e}", report.display())))?;
    for (name, body) in plot::render(&rep) {
        let path = outdir.join(name);
        let mut w = create(&path)?;
        w.write_all(body.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn run_validate(level: LevelArg, fault: FaultArg) -> Result<(), Failure> {
    let level = match level {
        LevelArg::Quick => Level::Quick,
        LevelArg::Full => Level::Full,
    };
    let fault = match fault {
        FaultArg::None => Fault::None,
        FaultArg::SpinCache => Fault::CorruptSpinCache,
    };
    let summary = validate::run(level, fault);
    let json = serde_json::to_string_pretty(&summary).map_err(Failure::runtime)?;
    println!("{json}");
    let failed: Vec<&str> = summary.failed().map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::runtime(format!("failed checks: {}", failed.join(", "))))
    }
}
