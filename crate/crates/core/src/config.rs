//! Run and verify configuration, read from TOML.
//!
//! ```toml
//! [physics]
//! viscosity_nu = 0.1
//!
//! [grid]
//! n = 128
//! k_min = 0.0
//! k_max = 4.0
//! spacing = "uniform"
//!
//! [model]
//! broadening_model = "ocean"
//! kernel_model = "sum"
//!
//! [run]
//! horizon = 1.0
//! moment_orders = [0.0, 2.0, 5.0]
//!
//! [initial]
//! kind = "lognormal"
//! amplitude = 1e-6
//! center = 1.5
//! width = 0.2
//! ```
//!
//! Every section and key is optional.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::broadening::ModelSelection;
use crate::collision::{build_quadrature, CollisionOperator};
use crate::error::{Error, Result};
use crate::integrator::{RunOptions, Stepper, DEFAULT_TOLERANCE};
use crate::params::{derive_dispersion, DispersionParams, PhysicalParams};
use crate::spectrum::{RadialGrid, RadialSpectrum, Spacing};
use crate::verify::{random_bumps, VerifyOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub spacing: Spacing,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 128, k_min: 0.0, k_max: 4.0, spacing: Spacing::Uniform }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<RadialGrid> {
        match self.spacing {
            Spacing::Uniform => RadialGrid::uniform(self.n, self.k_min, self.k_max),
            Spacing::Logarithmic => RadialGrid::logarithmic(self.n, self.k_min, self.k_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub horizon: f64,
    pub dt: Option<f64>,
    pub moment_orders: Vec<f64>,
    pub working_order: f64,
    pub truncation_radius: Option<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub stepper: Stepper,
    pub snapshot_every: usize,
    pub tolerance: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            horizon: 1.0,
            dt: None,
            moment_orders: vec![0.0, 2.0, 5.0],
            working_order: 2.0,
            truncation_radius: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            stepper: Stepper::Euler,
            snapshot_every: 0,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    #[default]
    Zero,
    /// `amplitude·exp(−ln²(k/center)/(2 width²))`
    Lognormal,
    /// Random bump sum from the run seed, rescaled to peak `amplitude`.
    Random,
    /// Read from a snapshot CSV and interpolated onto the grid.
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    /// Relative paths resolve against the config file's directory.
    pub path: Option<PathBuf>,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection { kind: InitialKind::Zero, amplitude: 1e-6, center: 1.5, width: 0.2, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub physics: PhysicalParams,
    pub grid: GridSpec,
    pub model: ModelSelection,
    pub run: RunSection,
    pub initial: InitialSection,
    pub verify: VerifyOptions,
    /// Directory of the file this was read from.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_str_at(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Parses and validates; `origin` names the source in error messages.
    pub fn from_str_at(text: &str, origin: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        self.grid.build()?;
        let t = self.run.horizon;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Config(format!("run.horizon must be positive, got {t}")));
        }
        if let Some(dt) = self.run.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("run.dt must be positive, got {dt}")));
            }
        }
        if self.run.moment_orders.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("run.moment_orders must be finite".into()));
        }
        if !(self.verify.quadrature_weight_scale.is_finite() && self.verify.quadrature_weight_scale > 0.0) {
            return Err(Error::Config("verify.quadrature_weight_scale must be positive".into()));
        }
        if self.initial.kind == InitialKind::Snapshot && self.initial.path.is_none() {
            return Err(Error::Config("initial.kind = \"snapshot\" needs initial.path".into()));
        }
        Ok(())
    }

    pub fn dispersion(&self) -> DispersionParams {
        derive_dispersion(&self.physics)
    }

    pub fn operator(&self) -> Result<CollisionOperator> {
        let grid = Arc::new(self.grid.build()?);
        let quad = Arc::new(build_quadrature(grid, self.physics.dimension_d)?);
        Ok(CollisionOperator::new(quad, self.model, self.dispersion(), self.physics))
    }

    pub fn run_options(&self) -> RunOptions {
        let r = &self.run;
        RunOptions {
            horizon: r.horizon,
            dt: r.dt,
            truncation_radius: r.truncation_radius,
            monitored_orders: r.moment_orders.clone(),
            working_order: r.working_order,
            stepper: r.stepper,
            snapshot_every: r.snapshot_every,
            tolerance: r.tolerance,
        }
    }

    pub fn initial_spectrum(&self, grid: &Arc<RadialGrid>) -> Result<RadialSpectrum> {
        let init = &self.initial;
        match init.kind {
            InitialKind::Zero => Ok(RadialSpectrum::zeros(grid.clone())),
            InitialKind::Lognormal => {
                let (a, c, s) = (init.amplitude, init.center, init.width);
                if !(a >= 0.0 && c > 0.0 && s > 0.0) {
                    return Err(Error::Config("lognormal needs amplitude >= 0, center > 0, width > 0".into()));
                }
                RadialSpectrum::from_fn(grid.clone(), |k| {
                    if k <= 0.0 {
                        0.0
                    } else {
                        a * (-(k / c).ln().powi(2) / (2.0 * s * s)).exp()
                    }
                })
            }
            InitialKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.run.seed);
                let f = random_bumps(&mut rng, grid);
                let peak = f.max_value();
                if peak > 0.0 {
                    f.scaled(init.amplitude / peak)
                } else {
                    Ok(f)
                }
            }
            InitialKind::Snapshot => {
                let rel = init.path.as_ref().expect("validated");
                let path = if rel.is_absolute() { rel.clone() } else { self.base_dir.join(rel) };
                let snap = crate::io::read_snapshot(&path)?;
                if snap.grid().nodes() == grid.nodes() {
                    RadialSpectrum::new(grid.clone(), snap.into_values())
                } else {
                    RadialSpectrum::from_fn(grid.clone(), |k| snap.interpolate(k))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = Config::from_str_at("", "mem").unwrap();
        assert_eq!(cfg.grid, GridSpec::default());
        assert_eq!(cfg.run.moment_orders, vec![0.0, 2.0, 5.0]);
        assert!(cfg.model.is_default_pair());
    }

    #[test]
    fn sections_parse() {
        let text = r#"
            [physics]
            viscosity_nu = 0.2
            coriolis_f = 1.0
            [grid]
            n = 16
            k_min = 0.1
            k_max = 3.0
            spacing = "logarithmic"
            [model]
            broadening_model = "acoustic"
            kernel_model = "product"
            [run]
            horizon = 0.5
            dt = 1e-3
            stepper = "heun"
            [initial]
            kind = "random"
            [verify]
            trials = 3
        "#;
        let cfg = Config::from_str_at(text, "mem").unwrap();
        assert_eq!(cfg.physics.viscosity_nu, 0.2);
        assert_eq!(cfg.grid.spacing, Spacing::Logarithmic);
        assert!(!cfg.model.is_default_pair());
        assert_eq!(cfg.run.stepper, Stepper::Heun);
        assert_eq!(cfg.verify.trials, 3);
        assert_eq!(cfg.dispersion().lambda1, 1.0);
        let f = cfg.initial_spectrum(&Arc::new(cfg.grid.build().unwrap())).unwrap();
        assert!((f.max_value() - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn unknown_key_reports_location() {
        let err = Config::from_str_at("[grid]\nn = 16\nbogus = 1\n", "cfg.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cfg.toml") && msg.contains("bogus") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(Config::from_str_at("[run]\nhorizon = 0.0\n", "m").is_err());
        assert!(Config::from_str_at("[grid]\nn = 4\n", "m").is_err());
        assert!(Config::from_str_at("[initial]\nkind = \"snapshot\"\n", "m").is_err());
        assert!(Config::from_str_at("[physics]\ndamping_exponent_gamma = 2.0\n", "m").is_err());
    }
}
