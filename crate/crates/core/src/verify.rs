//! Numerical checks of the operator identities and a priori estimates over
//! seeded families of random spectra.
//!
//! Each check returns a [`CheckReport`] with the worst observed ratio and the
//! bound it is held to. Reports depend only on the options and the seed.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, derive_loss_constants, gain_constant};
use crate::broadening::lorentzian_unchecked;
use crate::collision::{build_quadrature_scaled, CollisionOperator};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::integrator::{bracket, drift};
use crate::mc::{McConfig, McOracle, Quantity};
use crate::spectrum::{diff, weighted_l1, RadialGrid, RadialSpectrum};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const IDENTITY_BOUND: f64 = 1e-10;
pub const HOLDER_SLOPE_BOUND: f64 = 0.05;
pub const DELTA_FINAL_BOUND: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check_name: String,
    pub trials: usize,
    pub worst_ratio: f64,
    pub bound_used: f64,
    pub passed: bool,
    pub seed: u64,
    /// Trials excluded as degenerate (for example a zero-distance pair).
    pub skipped: usize,
}

impl CheckReport {
    fn new(name: &str, trials: usize, worst: f64, bound: f64, seed: u64, skipped: usize) -> Self {
        CheckReport {
            check_name: name.to_string(),
            trials,
            worst_ratio: worst,
            bound_used: bound,
            passed: worst <= bound * (1.0 + DEFAULT_TOLERANCE),
            seed,
            skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub trials: usize,
    pub seed: u64,
    pub working_order: f64,
    /// Bound M on M_0 and M_{m+2} for the random family.
    pub family_bound: f64,
    /// Spectra in the gain-constant sweep.
    pub gain_trials: usize,
    pub holder_pairs: usize,
    pub holder_decades: usize,
    pub mc_samples: u64,
    pub mc_spectra: usize,
    pub mc_nodes: usize,
    /// Multiplies every triad weight; 1 except in the injected-defect fixture.
    pub quadrature_weight_scale: f64,
    pub delta_gammas: Vec<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            trials: 100,
            seed: 20240601,
            working_order: 2.0,
            family_bound: 10.0,
            gain_trials: 1000,
            holder_pairs: 50,
            holder_decades: 7,
            mc_samples: 1_000_000,
            mc_spectra: 5,
            mc_nodes: 8,
            quadrature_weight_scale: 1.0,
            delta_gammas: vec![1.0, 1e-1, 1e-2, 1e-3],
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for trial `trial` of the check tagged `tag`.
pub fn trial_rng(seed: u64, tag: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed) ^ splitmix(tag.wrapping_add(0x5eed)));
    rng.set_stream(trial);
    rng
}

/// Sum of 1 to 4 log-normal bumps `a·exp(−ln²(k/c)/(2s²))`, zero at k = 0.
pub fn random_bumps(rng: &mut impl Rng, grid: &Arc<RadialGrid>) -> RadialSpectrum {
    let count = rng.random_range(1..=4);
    let bumps: Vec<(f64, f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.random_range(0.2..1.0),
                rng.random_range(0.8..2.2),
                rng.random_range(0.1..0.3),
            )
        })
        .collect();
    RadialSpectrum::from_fn(grid.clone(), |k| {
        if k <= 0.0 {
            return 0.0;
        }
        bumps
            .iter()
            .map(|&(a, c, s)| a * (-(k / c).ln().powi(2) / (2.0 * s * s)).exp())
            .sum()
    })
    .expect("bumps are finite and nonnegative")
}

/// A random spectrum scaled so that `max(M_0, M_{m+2}) = u·bound`, u ∈ [0.05, 1].
pub fn random_in_ball(rng: &mut impl Rng, op: &CollisionOperator, order: f64, bound: f64) -> Result<RadialSpectrum> {
    let f = random_bumps(rng, op.grid());
    let d = op.params().dimension_d;
    let size = f
        .moment(0.0, op.dispersion(), d)?
        .max(f.moment(order + 2.0, op.dispersion(), d)?);
    let u: f64 = rng.random_range(0.05..1.0);
    f.scaled(u * bound / size)
}

fn family_size(f: &RadialSpectrum, op: &CollisionOperator, order: f64) -> Result<f64> {
    let d = op.params().dimension_d;
    Ok(f.moment(0.0, op.dispersion(), d)?
        .max(f.moment(order + 2.0, op.dispersion(), d)?))
}

fn max_reduce(values: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for v in values {
        let v = v?;
        worst = if v.is_nan() { f64::NAN } else { worst.max(v) };
        if worst.is_nan() {
            break;
        }
    }
    Ok(worst)
}

fn omega_powers(op: &CollisionOperator, order: f64) -> Vec<f64> {
    op.grid()
        .nodes()
        .iter()
        .map(|&k| op.dispersion().omega(k).powf(order))
        .collect()
}

pub struct Verifier {
    op: CollisionOperator,
    opts: VerifyOptions,
    exec: Execution,
}

impl Verifier {
    pub fn new(op: CollisionOperator, opts: VerifyOptions) -> Result<Self> {
        if opts.trials < 1 {
            return Err(Error::Config("verify needs at least one trial".into()));
        }
        let op = if opts.quadrature_weight_scale != 1.0 {
            let quad = build_quadrature_scaled(op.grid().clone(), op.params().dimension_d, opts.quadrature_weight_scale)?;
            CollisionOperator::new(Arc::new(quad), *op.model(), *op.dispersion(), *op.params())
        } else {
            op
        };
        Ok(Verifier { op, opts, exec: Execution::default() })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self.op = self.op.with_execution(exec);
        self
    }

    pub fn operator(&self) -> &CollisionOperator {
        &self.op
    }

    pub fn options(&self) -> &VerifyOptions {
        &self.opts
    }

    fn per_trial<T: Send>(&self, tag: u64, n: usize, f: impl Fn(&mut ChaCha8Rng) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        // trials run one after another; the operator parallelises inside
        (0..n)
            .map(|t| f(&mut trial_rng(self.opts.seed, tag, t as u64)))
            .collect()
    }

    /// `|direct − (gain − fϑ)| / (|gain| + |fϑ|)` nodewise.
    pub fn check_gain_loss_identity(&self) -> Result<CheckReport> {
        let m = self.opts.working_order;
        let ratios = self.per_trial(1, self.opts.trials, |rng| {
            let f = random_in_ball(rng, &self.op, m, self.opts.family_bound)?;
            let c = self.op.collision(&f)?;
            max_reduce((0..c.total.len()).map(|i| {
                let scale = c.gain[i].abs() + (f.values()[i] * c.loss_frequency[i]).abs();
                Ok(if scale > 0.0 { (c.direct[i] - c.total[i]).abs() / scale } else { 0.0 })
            }))
        })?;
        Ok(CheckReport::new("gain_loss_identity", self.opts.trials, max_reduce(ratios.into_iter().map(Ok))?, IDENTITY_BOUND, self.opts.seed, 0))
    }

    /// `|∫C[f]φ − weak form| / (1 + |∫C[f]φ|)` for φ ∈ {1, ω, ω^m}.
    pub fn check_weak_formulation(&self) -> Result<CheckReport> {
        let m = self.opts.working_order;
        let phis = [omega_powers(&self.op, 0.0), omega_powers(&self.op, 1.0), omega_powers(&self.op, 2.0)];
        let ratios = self.per_trial(2, self.opts.trials, |rng| {
            let f = random_in_ball(rng, &self.op, m, self.opts.family_bound)?;
            let c = self.op.collision(&f)?;
            max_reduce(phis.iter().map(|phi| {
                let lhs = self.op.integrate_against(&c.total, phi);
                let rhs = self.op.weak_form_apply(&f, phi)?;
                Ok((lhs - rhs).abs() / (1.0 + lhs.abs()))
            }))
        })?;
        Ok(CheckReport::new("weak_formulation", self.opts.trials, max_reduce(ratios.into_iter().map(Ok))?, IDENTITY_BOUND, self.opts.seed, 0))
    }

    /// `sup ∫C_gain ω^m / M_{m+2}` against `K_m·M` for each requested order.
    pub fn check_gain_bound(&self, orders: &[f64]) -> Result<Vec<CheckReport>> {
        let d = self.op.params().dimension_d;
        let disp = *self.op.dispersion();
        let m = self.opts.working_order;
        let per = self.per_trial(3, self.opts.gain_trials, |rng| {
            let f = random_in_ball(rng, &self.op, m, self.opts.family_bound)?;
            let gain = self.op.gain(&f)?;
            let size = f.moment(0.0, &disp, d)?;
            orders
                .iter()
                .map(|&q| {
                    let num = self.op.integrate_against(&gain, &omega_powers(&self.op, q));
                    let den = f.moment(q + 2.0, &disp, d)?;
                    Ok((num / den, size))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        orders
            .iter()
            .enumerate()
            .map(|(j, &q)| {
                let worst = max_reduce(per.iter().map(|r| Ok(r[j].0)))?;
                let mass = max_reduce(per.iter().map(|r| Ok(r[j].1)))?;
                let bound = gain_constant(self.op.params(), &disp, self.op.model(), q)? * mass.max(self.opts.family_bound);
                Ok(CheckReport::new(&format!("gain_bound_m{q}"), self.opts.gain_trials, worst, bound, self.opts.seed, 0))
            })
            .collect()
    }

    /// `max_k ϑ[f0](k) / (A1 k² + A2)` against 1.
    pub fn check_loss_bound(&self) -> Result<CheckReport> {
        let m = self.opts.working_order;
        let k = self.op.grid().nodes().to_vec();
        let ratios = self.per_trial(4, self.opts.trials, |rng| {
            let f = random_in_ball(rng, &self.op, m, self.opts.family_bound)?;
            let (a1, a2) = derive_loss_constants(&f, self.op.params(), self.op.dispersion())?;
            let theta = self.op.loss_frequency(&f)?;
            max_reduce(theta.iter().zip(&k).map(|(t, k)| {
                let b = a1 * k * k + a2;
                Ok(if b > 0.0 { t / b } else if *t == 0.0 { 0.0 } else { f64::INFINITY })
            }))
        })?;
        Ok(CheckReport::new("loss_bound", self.opts.trials, max_reduce(ratios.into_iter().map(Ok))?, 1.0, self.opts.seed, 0))
    }

    /// Square-root continuity over perturbations spanning several decades.
    /// Returns the ratio report and the trend report.
    pub fn check_holder(&self) -> Result<(CheckReport, CheckReport)> {
        let m = self.opts.working_order;
        let d = self.op.params().dimension_d;
        let disp = *self.op.dispersion();
        let half = 0.5 * self.opts.family_bound;
        let pairs = self.opts.holder_pairs;
        let n = pairs * self.opts.holder_decades;
        let samples = (0..n)
            .map(|t| -> Result<Option<(f64, f64, f64)>> {
                let mut rng = trial_rng(self.opts.seed, 5, t as u64);
                let decade = t / pairs;
                let target = 10f64.powi(-(decade as i32));
                let g = random_in_ball(&mut rng, &self.op, m, half)?;
                let q = random_bumps(&mut rng, self.op.grid());
                let qn = q.moment(m + 2.0, &disp, d)?;
                let h = RadialSpectrum::new(
                    g.grid().clone(),
                    g.values().iter().zip(q.values()).map(|(a, b)| a + b * target / qn).collect(),
                )?;
                let dist = weighted_l1(g.grid(), &diff(g.values(), h.values()), m + 2.0, &disp, d);
                if dist == 0.0 {
                    return Ok(None);
                }
                let cg = self.op.collision(&g)?.total;
                let ch = self.op.collision(&h)?.total;
                let num = weighted_l1(g.grid(), &diff(&cg, &ch), m, &disp, d);
                let size = family_size(&h, &self.op, m)?.max(family_size(&g, &self.op, m)?);
                Ok(Some((dist, num / dist.sqrt(), size)))
            })
            .collect::<Result<Vec<_>>>()?;
        let skipped = samples.iter().filter(|s| s.is_none()).count();
        let used: Vec<(f64, f64, f64)> = samples.into_iter().flatten().collect();
        let worst = max_reduce(used.iter().map(|s| Ok(s.1)))?;
        let fam = max_reduce(used.iter().map(|s| Ok(s.2)))?.max(self.opts.family_bound);
        let lip = bounds::lipschitz_constant(self.op.params(), &disp, self.op.model(), self.op.grid(), m, fam)?;
        let k2 = bounds::holder_constant(lip, fam);
        let slope = trend_slope(&used.iter().map(|s| ((1.0 / s.0).ln(), s.1.ln())).collect::<Vec<_>>());
        Ok((
            CheckReport::new("holder_ratio", n, worst, k2, self.opts.seed, skipped),
            CheckReport::new("holder_trend", n, slope, HOLDER_SLOPE_BOUND, self.opts.seed, skipped),
        ))
    }

    /// `[Q[f] − Q[g], f − g]_m / ‖f − g‖_{L¹_m}` against the bracket constant.
    pub fn check_lipschitz_bracket(&self) -> Result<CheckReport> {
        let m = self.opts.working_order;
        let d = self.op.params().dimension_d;
        let disp = *self.op.dispersion();
        let grid = self.op.grid().clone();
        let r = grid.k_max();
        let per = self.per_trial(6, self.opts.trials, |rng| {
            let f = random_in_ball(rng, &self.op, m, self.opts.family_bound)?;
            let g = random_in_ball(rng, &self.op, m, self.opts.family_bound)?;
            let (qf, _) = drift(&self.op, &f, r)?;
            let (qg, _) = drift(&self.op, &g, r)?;
            let psi = diff(f.values(), g.values());
            let dist = weighted_l1(&grid, &psi, m, &disp, d);
            let size = family_size(&f, &self.op, m)?.max(family_size(&g, &self.op, m)?);
            let ratio = if dist > 0.0 { bracket(&grid, &diff(&qf, &qg), &psi, m, &disp, d)? / dist } else { f64::NAN };
            Ok((ratio, size))
        })?;
        let skipped = per.iter().filter(|p| p.0.is_nan()).count();
        let worst = max_reduce(per.iter().filter(|p| !p.0.is_nan()).map(|p| Ok(p.0)))?;
        let fam = max_reduce(per.iter().map(|p| Ok(p.1)))?.max(self.opts.family_bound);
        let lip = bounds::lipschitz_constant(self.op.params(), &disp, self.op.model(), &grid, m, fam)?;
        let bound = bounds::bracket_constant(lip, &grid, &disp);
        Ok(CheckReport::new("lipschitz_bracket", self.opts.trials, worst, bound, self.opts.seed, skipped))
    }

    /// Deterministic against Monte Carlo at selected nodes of random bump
    /// spectra. The ratio is `max(|Δ|/(3σ), rel/0.05)`; below 1 passes.
    pub fn check_mc_oracle(&self) -> Result<(CheckReport, Vec<McRow>)> {
        let mut rows = Vec::new();
        let mut worst: f64 = 0.0;
        let nodes = self.op.grid().nodes();
        for s in 0..self.opts.mc_spectra {
            let mut rng = trial_rng(self.opts.seed, 7, s as u64);
            let f = random_bumps(&mut rng, self.op.grid());
            let c = self.op.collision(&f)?;
            let picked = select_nodes(&f, &c.gain, &c.loss_frequency, &c.total, self.opts.mc_nodes);
            let cfg = McConfig { samples: self.opts.mc_samples, seed: self.opts.seed.wrapping_add(s as u64), ..McConfig::default() };
            let oracle = McOracle::new(&f, cfg, *self.op.model(), *self.op.dispersion(), *self.op.params())?
                .with_execution(self.exec);
            for (q, det) in [
                (Quantity::Gain, &c.gain),
                (Quantity::LossFrequency, &c.loss_frequency),
                (Quantity::Collision, &c.total),
            ] {
                let scale = det.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                for &i in &picked {
                    let e = oracle.estimate(nodes[i], q)?;
                    let diff = (det[i] - e.mean).abs();
                    let z = if e.std_error > 0.0 { diff / (3.0 * e.std_error) } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
                    let rel = if det[i].abs() > 1e-6 * scale { diff / det[i].abs() / 0.05 } else { 0.0 };
                    worst = worst.max(z).max(rel);
                    rows.push(McRow {
                        spectrum: s,
                        quantity: q,
                        k: nodes[i],
                        deterministic: det[i],
                        mc_mean: e.mean,
                        mc_stderr: e.std_error,
                    });
                }
            }
        }
        Ok((CheckReport::new("mc_oracle", rows.len(), worst, 1.0, self.opts.seed, 0), rows))
    }

    pub fn check_delta_limit(&self) -> Result<(CheckReport, CheckReport)> {
        delta_limit_reports(&self.opts.delta_gammas, self.opts.seed)
    }

    pub fn run_all(&self) -> Result<SuiteResult> {
        let mut reports = vec![self.check_gain_loss_identity()?, self.check_weak_formulation()?];
        reports.extend(self.check_gain_bound(&[0.0, self.opts.working_order])?);
        reports.push(self.check_loss_bound()?);
        let (h, t) = self.check_holder()?;
        reports.extend([h, t]);
        reports.push(self.check_lipschitz_bracket()?);
        let (a, b) = self.check_delta_limit()?;
        reports.extend([a, b]);
        let (mc, rows) = self.check_mc_oracle()?;
        reports.push(mc);
        Ok(SuiteResult { reports, mc_rows: rows })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub spectrum: usize,
    pub quantity: Quantity,
    pub k: f64,
    pub deterministic: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub reports: Vec<CheckReport>,
    pub mc_rows: Vec<McRow>,
}

impl SuiteResult {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }
}

/// Picks up to `count` evenly spread nodes where f, gain, ϑ and the total
/// are each at least a tenth of their maxima, keeping away from sign changes
/// of the total where a relative comparison is meaningless.
pub fn select_nodes(f: &RadialSpectrum, gain: &[f64], loss: &[f64], total: &[f64], count: usize) -> Vec<usize> {
    let peak = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let (pf, pg, pl, pt) = (f.max_value(), peak(gain), peak(loss), peak(total));
    let k = f.grid().nodes();
    let candidates: Vec<usize> = (0..k.len())
        .filter(|&i| {
            k[i] > 0.0
                && f.values()[i] >= 0.1 * pf
                && gain[i] >= 0.1 * pg
                && loss[i] >= 0.1 * pl
                && total[i].abs() >= 0.1 * pt
        })
        .collect();
    if candidates.len() <= count {
        return candidates;
    }
    (0..count)
        .map(|j| candidates[j * (candidates.len() - 1) / (count - 1).max(1)])
        .collect()
}

/// Least-squares slope of y on x.
pub fn trend_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let (mx, my) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (sxy, sxx) = points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// `∫ L(Δ, Γ) exp(−Δ²/(2σ²)) dΔ` via Δ = Γ tan θ, composite Simpson in θ.
pub fn lorentzian_gaussian_integral(gamma: f64, sigma: f64) -> f64 {
    let n = 1 << 20;
    let h = PI / n as f64;
    let g = |th: f64| {
        let c = th.cos();
        if c <= 0.0 {
            return 0.0;
        }
        let delta = gamma * th.tan();
        // L dΔ = dθ
        debug_assert!((lorentzian_unchecked(delta, gamma) * gamma / (c * c) - 1.0).abs() < 1e-6 || delta.abs() > 1e100);
        (-delta * delta / (2.0 * sigma * sigma)).exp()
    };
    let a = -0.5 * PI;
    let mut s = g(a) + g(-a);
    for i in 1..n {
        s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn delta_limit_errors(gammas: &[f64]) -> Vec<f64> {
    gammas
        .iter()
        .map(|&g| (lorentzian_gaussian_integral(g, 1.0) - PI).abs())
        .collect()
}

fn delta_limit_reports(gammas: &[f64], seed: u64) -> Result<(CheckReport, CheckReport)> {
    if gammas.is_empty() || gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::Config("delta-limit widths must be positive".into()));
    }
    let errs = delta_limit_errors(gammas);
    let growth = errs
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(0.0f64, f64::max);
    let last = *errs.last().expect("nonempty");
    // strictly decreasing means every successive ratio is below 1
    let mono = CheckReport {
        passed: errs.windows(2).all(|w| w[1] < w[0]),
        ..CheckReport::new("delta_limit_monotone", gammas.len(), growth, 1.0, seed, 0)
    };
    Ok((mono, CheckReport::new("delta_limit_final", gammas.len(), last, DELTA_FINAL_BOUND, seed, 0)))
}
