use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use broadkin::config::Config;
use broadkin::exec::init_thread_pool;
use broadkin::integrator::evolve;
use broadkin::io;
use broadkin::params::{derive_dispersion, PhysicalParams};
use broadkin::verify::Verifier;
use broadkin::Error;

#[derive(Parser)]
#[command(name = "broadkin", version, about = "Resonance-broadened three-wave kinetic equation solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial spectrum and write trajectory, snapshots and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides run.output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the check suite and the Monte Carlo cross-validation.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides run.output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print moments of a snapshot as CSV.
    Moments {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        orders: Vec<f64>,
        /// Config supplying the physical parameters; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn threads_from_env() -> anyhow::Result<Option<usize>> {
    match std::env::var("BROADKIN_THREADS") {
        Ok(s) if !s.trim().is_empty() => {
            let n: usize = s.trim().parse().with_context(|| format!("BROADKIN_THREADS = {s:?}"))?;
            if n == 0 {
                bail!("BROADKIN_THREADS must be at least 1");
            }
            Ok(Some(n))
        }
        _ => Ok(None),
    }
}

fn output_dir(cfg: &Config, out: Option<PathBuf>) -> anyhow::Result<PathBuf> {
    let dir = out.unwrap_or_else(|| cfg.run.output_dir.clone());
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let cfg = Config::from_path(config)?;
    let op = cfg.operator()?;
    let f0 = cfg.initial_spectrum(op.grid())?;
    let opts = cfg.run_options();
    let dir = output_dir(&cfg, out)?;
    let traj = match evolve(&f0, &op, &opts) {
        Ok(t) => t,
        Err(Error::MonitorViolation { monitor, record }) => {
            eprintln!("monitor `{monitor}` failed:\n{record:#?}");
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e.into()),
    };
    let r = opts.truncation_radius.unwrap_or(op.grid().k_max());
    io::write_trajectory(&dir.join("trajectory.csv"), &traj.records)?;
    for (i, (_, f)) in traj.snapshots.iter().enumerate() {
        io::write_snapshot(&dir.join(format!("snapshot_{i:04}.csv")), f)?;
    }
    io::write_manifest(&dir.join("manifest.toml"), &cfg, &traj, r)?;
    let last = traj.records.last().expect("initial record");
    println!(
        "t = {:.6e} after {} steps of {:.6e}; min f = {:.6e}; output in {}",
        last.time,
        traj.records.len() - 1,
        traj.step,
        last.min_value,
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(config: &Path, trials: Option<usize>, seed: Option<u64>, out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let mut cfg = Config::from_path(config)?;
    if let Some(t) = trials {
        cfg.verify.trials = t;
    }
    if let Some(s) = seed {
        cfg.verify.seed = s;
    }
    let dir = output_dir(&cfg, out)?;
    let verifier = Verifier::new(cfg.operator()?, cfg.verify.clone())?;
    let suite = verifier.run_all()?;
    io::write_reports(&dir.join("verify_report.csv"), &suite.reports)?;
    io::write_mc_rows(&dir.join("mc_oracle.csv"), &suite.mc_rows)?;
    io::write_summary(&mut std::io::stdout().lock(), &suite.reports)?;
    Ok(if suite.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_moments(snapshot: &Path, orders: &[f64], config: Option<&Path>) -> anyhow::Result<ExitCode> {
    let params = match config {
        Some(p) => Config::from_path(p)?.physics,
        None => PhysicalParams::default(),
    };
    let disp = derive_dispersion(&params);
    let f = io::read_snapshot(snapshot)?;
    let m = f.moments(orders, &disp, params.dimension_d)?;
    println!("order,moment");
    for (o, v) in m.orders.iter().zip(&m.values) {
        println!("{o},{v:.16e}");
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = threads_from_env().and_then(|threads| {
        init_thread_pool(threads);
        match cli.command {
            Command::Run { config, out } => cmd_run(&config, out),
            Command::Verify { config, trials, seed, out } => cmd_verify(&config, trials, seed, out),
            Command::Moments { snapshot, orders, config } => cmd_moments(&snapshot, &orders, config.as_deref()),
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
