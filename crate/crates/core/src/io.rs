//! CSV and manifest persistence.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which parses back
//! to the identical `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::bounds::AnalyticConstants;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::integrator::{StepRecord, Trajectory};
use crate::mc::Quantity;
use crate::params::DispersionParams;
use crate::spectrum::{RadialGrid, RadialSpectrum};
use crate::verify::{CheckReport, McRow};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column label for a moment order: 2 → `M_2`, 2.5 → `M_2.5`.
pub fn moment_label(order: f64) -> String {
    format!("M_{order}")
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

pub fn write_snapshot(path: &Path, f: &RadialSpectrum) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", "f"])?;
    for (k, v) in f.grid().nodes().iter().zip(f.values()) {
        w.write_record([num(*k), num(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `k,f` snapshot; the grid spacing is recognised from the nodes.
pub fn read_snapshot(path: &Path) -> Result<RadialSpectrum> {
    let name = path.display().to_string();
    let parse_err = |message: String| Error::Parse { path: name.clone(), message };
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    let header = r.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if header.len() != 2 || &header[0] != "k" || &header[1] != "f" {
        return Err(parse_err(format!("expected header `k,f`, found `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize, col: &str| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| parse_err(format!("line {line}, column {col}: {e} (`{}`)", &rec[i])))
        };
        nodes.push(field(0, "k")?);
        values.push(field(1, "f")?);
    }
    let grid = RadialGrid::from_nodes(nodes).map_err(|e| parse_err(e.to_string()))?;
    RadialSpectrum::new(Arc::new(grid), values).map_err(|e| parse_err(e.to_string()))
}

pub fn write_trajectory(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut w = writer(path)?;
    let orders = records.first().map(|r| r.moments.orders.clone()).unwrap_or_default();
    let mut header = vec!["t".to_string(), "dt".into(), "min_f".into()];
    header.extend(orders.iter().map(|&m| moment_label(m)));
    header.extend(["gronwall_margin".into(), "omega_margin".into()]);
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![num(r.time), num(r.dt), num(r.min_value)];
        row.extend(r.moments.values.iter().map(|&v| num(v)));
        row.extend([num(r.gronwall_margin), num(r.omega_set_margin)]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunSummary {
    step: f64,
    steps: usize,
    truncation_radius: f64,
    final_time: f64,
    /// `h_R/2` at the run's truncation radius.
    step_size_bound: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    run: RunSummary,
    dispersion: DispersionParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    constants: Option<&'a AnalyticConstants>,
    config: &'a Config,
}

/// Writes config echo, derived constants and the step bound as TOML.
pub fn write_manifest(path: &Path, cfg: &Config, traj: &Trajectory, truncation_radius: f64) -> Result<()> {
    let step_size_bound = traj
        .constants
        .as_ref()
        .map_or(f64::NAN, |c| c.step_size_bound(truncation_radius, &cfg.physics));
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        run: RunSummary {
            step: traj.step,
            steps: traj.records.len().saturating_sub(1),
            truncation_radius,
            final_time: traj.records.last().map_or(0.0, |r| r.time),
            step_size_bound,
        },
        dispersion: cfg.dispersion(),
        constants: traj.constants.as_ref(),
        config: cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Invariant(format!("manifest serialization: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn report_header() -> [&'static str; 7] {
    ["check_name", "trials", "worst_ratio", "bound_used", "passed", "seed", "skipped"]
}

pub fn write_reports(path: &Path, reports: &[CheckReport]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(report_header())?;
    for r in reports {
        w.write_record([
            r.check_name.clone(),
            r.trials.to_string(),
            num(r.worst_ratio),
            num(r.bound_used),
            r.passed.to_string(),
            r.seed.to_string(),
            r.skipped.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn quantity_name(q: Quantity) -> &'static str {
    match q {
        Quantity::Gain => "gain",
        Quantity::LossFrequency => "loss_frequency",
        Quantity::Collision => "collision",
    }
}

pub fn write_mc_rows(path: &Path, rows: &[McRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", "deterministic", "mc_mean", "mc_stderr", "quantity", "spectrum"])?;
    for r in rows {
        w.write_record([
            num(r.k),
            num(r.deterministic),
            num(r.mc_mean),
            num(r.mc_stderr),
            quantity_name(r.quantity).to_string(),
            r.spectrum.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable table of reports.
pub fn write_summary(out: &mut impl Write, reports: &[CheckReport]) -> std::io::Result<()> {
    for r in reports {
        writeln!(
            out,
            "{:<5} {:<22} worst={:.4e} bound={:.4e} trials={}{}",
            if r.passed { "PASS" } else { "FAIL" },
            r.check_name,
            r.worst_ratio,
            r.bound_used,
            r.trials,
            if r.skipped > 0 { format!(" skipped={}", r.skipped) } else { String::new() },
        )?;
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    writeln!(out, "{} of {} checks passed", reports.len() - failed, reports.len())
}
