//! Monte Carlo estimates of the collision integrals directly in momentum space.
//!
//! This path shares nothing with the triad quadrature except the broadening
//! and kernel formulas: the delta is resolved by substitution (`p2 = p − p1`
//! for the first triad type, `p1 = p + p2` for the second), the free momentum
//! is drawn uniformly from a ball, and off-grid values of f come from linear
//! interpolation. Each term is estimated separately and the variances add.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitCircle, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::broadening::{kernel_squared, lorentzian_unchecked, BroadeningField, ModelSelection};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::params::{DispersionParams, PhysicalParams};
use crate::spectrum::RadialSpectrum;

const BATCH: u64 = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stratification {
    None,
    #[default]
    RadialShells,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    /// Samples per triad type.
    pub samples: u64,
    pub seed: u64,
    /// Radius of the sampling ball; `None` uses the grid's k_max.
    pub sampling_radius: Option<f64>,
    pub stratification: Stratification,
    /// Number of equal-volume shells when stratifying.
    pub shells: u32,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 100_000,
            seed: 0,
            sampling_radius: None,
            stratification: Stratification::RadialShells,
            shells: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples_used: u64,
}

impl McEstimate {
    fn combine(a: McEstimate, b: McEstimate) -> McEstimate {
        McEstimate {
            mean: a.mean + b.mean,
            std_error: a.std_error.hypot(b.std_error),
            samples_used: a.samples_used + b.samples_used,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Gain,
    LossFrequency,
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Term {
    /// p = p1 + p2, free momentum p1.
    First,
    /// p1 = p + p2, free momentum p2.
    Second,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Welford) -> Welford {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Welford {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * self.n as f64 * o.n as f64 / n as f64,
        }
    }

    fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_seed(seed: u64, k: f64, tag: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ k.to_bits()) ^ tag)
}

fn ball_volume(d: u32, r: f64) -> f64 {
    use std::f64::consts::PI;
    match d {
        2 => PI * r * r,
        _ => 4.0 / 3.0 * PI * r * r * r,
    }
}

/// Stratified estimate of `∫_{|u| ≤ radius} g(u) du` with u in ℝ^d, where
/// `g` receives u padded to three components. Deterministic for a fixed `seed`.
pub fn ball_integral<G>(d: u32, radius: f64, cfg: &McConfig, seed: u64, exec: Execution, g: G) -> Result<McEstimate>
where
    G: Fn(&[f64; 3]) -> f64 + Sync + Send,
{
    if cfg.samples < 1 {
        return Err(Error::Domain("Monte Carlo needs at least one sample".into()));
    }
    if !matches!(d, 2 | 3) {
        return Err(Error::Unsupported(format!("dimension {d}")));
    }
    let shells = match cfg.stratification {
        Stratification::None => 1,
        Stratification::RadialShells => cfg.shells.max(1) as u64,
    };
    let per_shell = cfg.samples.div_ceil(shells);
    let batches = per_shell.div_ceil(BATCH);
    let cells = (shells * batches) as usize;
    let df = d as f64;
    let rd = radius.powf(df);

    let partial = exec.map_range(cells, |cell| {
        let (shell, batch) = (cell as u64 / batches, cell as u64 % batches);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(cell as u64);
        let n = (per_shell - batch * BATCH).min(BATCH);
        let lo = rd * shell as f64 / shells as f64;
        let hi = rd * (shell + 1) as f64 / shells as f64;
        let mut acc = Welford::default();
        for _ in 0..n {
            let r = (lo + rng.random::<f64>() * (hi - lo)).powf(1.0 / df);
            let u = if d == 3 {
                let s: [f64; 3] = UnitSphere.sample(&mut rng);
                [r * s[0], r * s[1], r * s[2]]
            } else {
                let s: [f64; 2] = UnitCircle.sample(&mut rng);
                [r * s[0], r * s[1], 0.0]
            };
            acc.push(g(&u));
        }
        acc
    });

    let shell_volume = ball_volume(d, radius) / shells as f64;
    let (mut mean, mut var) = (0.0, 0.0);
    for shell in partial.chunks(batches as usize) {
        let w = shell.iter().fold(Welford::default(), |a, b| a.merge(*b));
        mean += shell_volume * w.mean;
        var += shell_volume * shell_volume * w.variance() / w.n as f64;
    }
    Ok(McEstimate { mean, std_error: var.sqrt(), samples_used: shells * per_shell })
}

/// Monte Carlo evaluator bound to one spectrum and one model.
pub struct McOracle<'a> {
    f: &'a RadialSpectrum,
    field: BroadeningField,
    model: ModelSelection,
    disp: DispersionParams,
    params: PhysicalParams,
    cfg: McConfig,
    exec: Execution,
}

impl<'a> McOracle<'a> {
    pub fn new(
        f: &'a RadialSpectrum,
        cfg: McConfig,
        model: ModelSelection,
        disp: DispersionParams,
        params: PhysicalParams,
    ) -> Result<Self> {
        let field = BroadeningField::new(f, &model, &params)?;
        field.check_positive()?;
        let k_max = f.grid().k_max();
        if let Some(r) = cfg.sampling_radius {
            if !(r >= k_max) {
                return Err(Error::Domain(format!(
                    "sampling radius {r} does not cover the spectrum support {k_max}"
                )));
            }
        }
        Ok(McOracle { f, field, model, disp, params, cfg, exec: Execution::default() })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn estimate(&self, k: f64, q: Quantity) -> Result<McEstimate> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!("wavenumber must be >= 0, got {k}")));
        }
        let a = self.term(k, q, Term::First)?;
        let b = self.term(k, q, Term::Second)?;
        Ok(McEstimate::combine(a, b))
    }

    fn term(&self, k: f64, q: Quantity, term: Term) -> Result<McEstimate> {
        let d = self.params.dimension_d;
        let k_max = self.f.grid().k_max();
        let radius = self.cfg.sampling_radius.unwrap_or(k_max);
        let tag = match q {
            Quantity::Gain => 0,
            Quantity::LossFrequency => 2,
            Quantity::Collision => 4,
        } + match term {
            Term::First => 0,
            Term::Second => 1,
        };
        let seed = stream_seed(self.cfg.seed, k, tag);
        let fo = self.f.interpolate(k);
        let wo = self.disp.omega(k);
        let go = self.field.rate(k, wo, fo);
        let (kernel, c) = (self.model.kernel, self.params.kernel_constant_c);
        let mode = |q: f64| {
            let w = self.disp.omega(q);
            let v = self.f.interpolate(q);
            (w, v, self.field.rate(q, w, v))
        };
        ball_integral(d, radius, &self.cfg, seed, self.exec, |u| {
            let ku = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            // the other momentum, with p = k ẑ
            let z = match term {
                Term::First => k - u[2],
                Term::Second => k + u[2],
            };
            let kv = (u[0] * u[0] + u[1] * u[1] + z * z).sqrt();
            if ku > k_max || kv > k_max {
                return 0.0;
            }
            // (k1, k2) in the operator's labelling
            let (k1, k2) = match term {
                Term::First => (ku, kv),
                Term::Second => (kv, ku),
            };
            let (w1, f1, g1) = mode(k1);
            let (w2, f2, g2) = mode(k2);
            let v2 = kernel_squared(k, k1, k2, kernel, c);
            let gamma = self.field.total(go, g1, g2);
            match term {
                Term::First => {
                    let a = v2 * lorentzian_unchecked(wo - w1 - w2, gamma);
                    match q {
                        Quantity::Gain => a * f1 * f2,
                        Quantity::LossFrequency => 2.0 * a * f1,
                        Quantity::Collision => a * (f1 * f2 - fo * f1 - fo * f2),
                    }
                }
                Term::Second => {
                    let b = v2 * lorentzian_unchecked(w1 - wo - w2, gamma);
                    match q {
                        Quantity::Gain => 2.0 * b * (fo * f1 + f1 * f2),
                        Quantity::LossFrequency => 2.0 * b * f2,
                        Quantity::Collision => -2.0 * b * (fo * f2 - f1 * fo - f1 * f2),
                    }
                }
            }
        })
    }
}

pub fn mc_collision(
    f: &RadialSpectrum,
    k: f64,
    cfg: &McConfig,
    model: &ModelSelection,
    disp: &DispersionParams,
    params: &PhysicalParams,
) -> Result<McEstimate> {
    McOracle::new(f, *cfg, *model, *disp, *params)?.estimate(k, Quantity::Collision)
}

pub fn mc_gain(
    f: &RadialSpectrum,
    k: f64,
    cfg: &McConfig,
    model: &ModelSelection,
    disp: &DispersionParams,
    params: &PhysicalParams,
) -> Result<McEstimate> {
    McOracle::new(f, *cfg, *model, *disp, *params)?.estimate(k, Quantity::Gain)
}

pub fn mc_loss_frequency(
    f: &RadialSpectrum,
    k: f64,
    cfg: &McConfig,
    model: &ModelSelection,
    disp: &DispersionParams,
    params: &PhysicalParams,
) -> Result<McEstimate> {
    McOracle::new(f, *cfg, *model, *disp, *params)?.estimate(k, Quantity::LossFrequency)
}
