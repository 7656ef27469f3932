//! Truncated explicit time stepping with monitors for the a priori bounds.
//!
//! One Euler step is `w = f + h·Q[f_R]` with `Q[g] = C[g] − 2ν k^γ g` and
//! `f_R` the spectrum truncated at R. For `h ≤ h_R/2` the update is a convex
//! combination at every node and stays nonnegative.

use serde::{Deserialize, Serialize};

use crate::bounds::AnalyticConstants;
use crate::collision::{CollisionOperator, CollisionOutput};
use crate::error::{Error, Result};
use crate::params::DispersionParams;
use crate::spectrum::{MomentVector, RadialGrid, RadialSpectrum};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stepper {
    #[default]
    Euler,
    /// Second-order Heun with a nonnegativity clamp. Not covered by the
    /// positivity argument.
    Heun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub horizon: f64,
    /// Requested step; defaults to `h_R/2`.
    pub dt: Option<f64>,
    /// Truncation radius; defaults to the grid's k_max.
    pub truncation_radius: Option<f64>,
    pub monitored_orders: Vec<f64>,
    pub working_order: f64,
    pub stepper: Stepper,
    /// Keep a snapshot every this many steps (0 keeps only the ends).
    pub snapshot_every: usize,
    pub tolerance: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            horizon: 1.0,
            dt: None,
            truncation_radius: None,
            monitored_orders: vec![0.0, 2.0, 5.0],
            working_order: 2.0,
            stepper: Stepper::Euler,
            snapshot_every: 0,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    /// Step that produced this state; 0 for the initial record.
    pub dt: f64,
    pub truncation_r: f64,
    pub min_value: f64,
    pub moments: MomentVector,
    /// Smallest relative slack `1 − M_m(t) / (e^{C̃t} M_m(0))` over the
    /// monitored orders. NaN when no constants are available.
    pub gronwall_margin: f64,
    /// `(2ς+1)e^{θ*t} − ‖f(t)‖_{L¹_{m+3}}`.
    pub omega_set_margin: f64,
    /// `(θ*/2)‖f‖_{L¹_{m+3}} − (M_{m+3}[w] − M_{m+3}[f])/h` for the step
    /// that produced this state (Euler only).
    pub subtangent_margin: f64,
    pub clamp_events: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, RadialSpectrum)>,
    pub records: Vec<StepRecord>,
    pub constants: Option<AnalyticConstants>,
    pub step: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &RadialSpectrum {
        &self.snapshots.last().expect("trajectory has an initial snapshot").1
    }
}

/// `Q[f_R]` at every node, together with the collision output it came from.
pub fn drift(op: &CollisionOperator, f: &RadialSpectrum, r: f64) -> Result<(Vec<f64>, CollisionOutput)> {
    let fr = f.truncate(r);
    let out = op.collision(&fr)?;
    let k = op.grid().nodes();
    let p = op.params();
    let q = (0..k.len())
        .map(|i| out.total[i] - p.damping(k[i]) * fr.values()[i])
        .collect();
    Ok((q, out))
}

fn euler_values(op: &CollisionOperator, f: &RadialSpectrum, h: f64, r: f64) -> Result<Vec<f64>> {
    let fr = f.truncate(r);
    let out = op.collision(&fr)?;
    let k = op.grid().nodes();
    let p = op.params();
    // f_R (1 − h(ϑ + damping)) + (f − f_R) + h·gain, nonnegative term by term
    Ok((0..k.len())
        .map(|i| {
            let (fi, fri) = (f.values()[i], fr.values()[i]);
            let rate = out.loss_frequency[i] + p.damping(k[i]);
            fri * (1.0 - h * rate) + (fi - fri) + h * out.gain[i]
        })
        .collect())
}

pub fn euler_step(
    f: &RadialSpectrum,
    h: f64,
    r: f64,
    op: &CollisionOperator,
    consts: &AnalyticConstants,
) -> Result<RadialSpectrum> {
    let bound = consts.step_size_bound(r, op.params());
    if !(h > 0.0 && h <= bound) {
        return Err(Error::Precondition(format!(
            "step {h} must lie in (0, h_R/2 = {bound}]"
        )));
    }
    let w = euler_values(op, f, h, r)?;
    if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::Invariant(format!(
            "Euler step produced f = {v} at node {i} with h = {h} <= h_R/2 = {bound}"
        )));
    }
    Ok(RadialSpectrum::from_values_unchecked(f.grid().clone(), w))
}

/// One Heun step with negative values clamped to zero; returns the clamp count.
pub fn heun_step(f: &RadialSpectrum, h: f64, r: f64, op: &CollisionOperator) -> Result<(RadialSpectrum, usize)> {
    let (q0, _) = drift(op, f, r)?;
    let mid: Vec<f64> = f.values().iter().zip(&q0).map(|(v, q)| (v + h * q).max(0.0)).collect();
    let mid = RadialSpectrum::from_values_unchecked(f.grid().clone(), mid);
    let (q1, _) = drift(op, &mid, r)?;
    let mut clamps = 0;
    let w = f
        .values()
        .iter()
        .zip(q0.iter().zip(&q1))
        .map(|(v, (a, b))| {
            let x = v + 0.5 * h * (a + b);
            if x < 0.0 {
                clamps += 1;
                0.0
            } else {
                x
            }
        })
        .collect();
    Ok((RadialSpectrum::from_values_unchecked(f.grid().clone(), w), clamps))
}

/// `∫ φ sign(ψ) ω^m dp` with sign(0) = 0.
pub fn bracket(grid: &RadialGrid, phi: &[f64], psi: &[f64], order: f64, disp: &DispersionParams, d: u32) -> Result<f64> {
    if phi.len() != grid.len() || psi.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let w = grid.moment_weights(order, disp, d);
    Ok((0..grid.len())
        .map(|i| {
            let s = if psi[i] > 0.0 {
                1.0
            } else if psi[i] < 0.0 {
                -1.0
            } else {
                0.0
            };
            w[i] * phi[i] * s
        })
        .sum())
}

struct Monitor<'a> {
    op: &'a CollisionOperator,
    opts: &'a RunOptions,
    consts: Option<AnalyticConstants>,
    initial: Vec<f64>,
    r: f64,
}

impl Monitor<'_> {
    fn norm_order(&self) -> f64 {
        self.opts.working_order + 3.0
    }

    fn record(&self, t: f64, dt: f64, f: &RadialSpectrum, subtangent_margin: f64, clamp_events: usize) -> Result<StepRecord> {
        let d = self.op.params().dimension_d;
        let disp = self.op.dispersion();
        let moments = f.moments(&self.opts.monitored_orders, disp, d)?;
        let (gronwall_margin, omega_set_margin) = match &self.consts {
            Some(c) => {
                let growth = (c.gronwall_ctilde * t).exp();
                let g = moments
                    .values
                    .iter()
                    .zip(&self.initial)
                    .map(|(&m, &m0)| {
                        let env = growth * m0;
                        if env > 0.0 {
                            1.0 - m / env
                        } else if m == 0.0 {
                            0.0
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .fold(f64::INFINITY, f64::min);
                let norm = f.moment(self.norm_order(), disp, d)?;
                let omega = (2.0 * c.varsigma + 1.0) * (c.theta_star * t).exp() - norm;
                (g, omega)
            }
            None => (f64::NAN, f64::NAN),
        };
        Ok(StepRecord {
            time: t,
            dt,
            truncation_r: self.r,
            min_value: f.min_value(),
            moments,
            gronwall_margin,
            omega_set_margin,
            subtangent_margin,
            clamp_events,
        })
    }

    fn check(&self, rec: StepRecord) -> Result<StepRecord> {
        let tol = self.opts.tolerance;
        let fail = |monitor| Err(Error::MonitorViolation { monitor, record: Box::new(rec.clone()) });
        if !(rec.min_value >= 0.0) {
            return fail("positivity");
        }
        if self.consts.is_some() {
            if !(rec.gronwall_margin >= -tol) {
                return fail("gronwall");
            }
            if !(rec.omega_set_margin > 0.0) {
                return fail("omega_set");
            }
        }
        Ok(rec)
    }
}

/// Integrates from `f0` to `opts.horizon`, checking every monitor after
/// every step.
pub fn evolve(f0: &RadialSpectrum, op: &CollisionOperator, opts: &RunOptions) -> Result<Trajectory> {
    if !f0.same_grid(&RadialSpectrum::zeros(op.grid().clone())) {
        return Err(Error::GridMismatch);
    }
    let horizon = opts.horizon;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
    }
    let r = opts.truncation_radius.unwrap_or(op.grid().k_max());
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("truncation radius must be positive, got {r}")));
    }
    let p = op.params();
    let disp = op.dispersion();
    let consts = if op.model().is_default_pair() {
        Some(AnalyticConstants::derive(
            f0,
            p,
            disp,
            op.model(),
            &opts.monitored_orders,
            opts.working_order,
            horizon,
        )?)
    } else {
        None
    };
    let h = match (opts.dt, &consts) {
        (Some(dt), Some(c)) => {
            let bound = c.step_size_bound(r, p);
            if !(dt > 0.0 && dt < bound) {
                return Err(Error::Precondition(format!(
                    "dt = {dt} must be positive and below h_R/2 = {bound}"
                )));
            }
            dt
        }
        (Some(dt), None) if dt > 0.0 => dt,
        (Some(dt), None) => return Err(Error::Precondition(format!("dt must be positive, got {dt}"))),
        (None, Some(c)) => c.step_size_bound(r, p),
        (None, None) => {
            return Err(Error::Precondition(
                "dt is required when no analytic step bound exists for the model".into(),
            ))
        }
    };
    let steps = (horizon / h).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;

    let d = p.dimension_d;
    let monitor = Monitor {
        op,
        opts,
        consts,
        initial: f0.moments(&opts.monitored_orders, disp, d)?.values,
        r,
    };
    let norm_order = monitor.norm_order();
    let mut f = f0.clone();
    let mut records = vec![monitor.check(monitor.record(0.0, 0.0, &f, f64::NAN, 0)?)?];
    let mut snapshots = vec![(0.0, f.clone())];

    for step in 1..=steps {
        let t = if step == steps { horizon } else { step as f64 * h };
        let (next, clamps, sub) = match (opts.stepper, &monitor.consts) {
            (Stepper::Euler, Some(c)) => {
                let w = euler_step(&f, h, r, op, c)?;
                let before = f.moment(norm_order, disp, d)?;
                let after = w.moment(norm_order, disp, d)?;
                let margin = 0.5 * c.theta_star * before - (after - before) / h;
                (w, 0, margin)
            }
            (Stepper::Euler, None) => {
                let w = euler_values(op, &f, h, r)?;
                (RadialSpectrum::from_values_unchecked(f.grid().clone(), w), 0, f64::NAN)
            }
            (Stepper::Heun, _) => {
                let (w, n) = heun_step(&f, h, r, op)?;
                (w, n, f64::NAN)
            }
        };
        f = next;
        records.push(monitor.check(monitor.record(t, h, &f, sub, clamps)?)?);
        if step == steps || (opts.snapshot_every > 0 && step % opts.snapshot_every == 0) {
            snapshots.push((t, f.clone()));
        }
    }
    Ok(Trajectory { snapshots, records, constants: monitor.consts, step: h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::broadening::{KernelModel, ModelSelection};
    use crate::collision::build_quadrature;
    use crate::params::PhysicalParams;
    use crate::spectrum::RadialGrid;
    use std::sync::Arc;

    fn op(model: ModelSelection, nu: f64) -> CollisionOperator {
        let grid = Arc::new(RadialGrid::uniform(32, 0.0, 4.0).unwrap());
        let quad = Arc::new(build_quadrature(grid, 3).unwrap());
        let p = PhysicalParams { viscosity_nu: nu, ..PhysicalParams::default() };
        CollisionOperator::new(quad, model, DispersionParams::new(1.0, 1.0).unwrap(), p)
    }

    fn bump(o: &CollisionOperator, amp: f64) -> RadialSpectrum {
        RadialSpectrum::from_fn(o.grid().clone(), |k| amp * (-(k - 1.5) * (k - 1.5) / 0.1).exp()).unwrap()
    }

    #[test]
    fn zero_initial_state_stays_zero() {
        let o = op(ModelSelection::default(), 0.1);
        let z = RadialSpectrum::zeros(o.grid().clone());
        let traj = evolve(&z, &o, &RunOptions { horizon: 0.5, ..RunOptions::default() }).unwrap();
        assert!(traj.final_state().values().iter().all(|&v| v == 0.0));
        for r in &traj.records {
            assert_eq!(r.gronwall_margin, 0.0);
            assert!(r.omega_set_margin > 0.0);
        }
    }

    #[test]
    fn step_above_bound_is_rejected() {
        let o = op(ModelSelection::default(), 0.1);
        let f = bump(&o, 1e-6);
        let opts = RunOptions { dt: Some(10.0), ..RunOptions::default() };
        let err = evolve(&f, &o, &opts).unwrap_err();
        assert!(matches!(err, Error::Precondition(ref m) if m.contains("h_R/2")));
    }

    #[test]
    fn euler_step_matches_drift() {
        let o = op(ModelSelection::default(), 0.1);
        let f = bump(&o, 1e-6);
        let c = AnalyticConstants::derive(&f, o.params(), o.dispersion(), o.model(), &[0.0, 2.0, 5.0], 2.0, 1.0).unwrap();
        let r = o.grid().k_max();
        let (q, _) = drift(&o, &f, r).unwrap();
        for h in [1e-3, 1e-5] {
            let w = euler_step(&f, h, r, &o, &c).unwrap();
            for i in 0..q.len() {
                let fd = (w.values()[i] - f.values()[i]) / h;
                assert!((fd - q[i]).abs() <= 1e-9 * q.iter().fold(0.0f64, |a, b| a.max(b.abs())));
            }
        }
        let bound = c.step_size_bound(r, o.params());
        assert!(euler_step(&f, bound, r, &o, &c).is_ok());
        assert!(euler_step(&f, bound * 1.01, r, &o, &c).is_err());
    }

    #[test]
    fn heavy_damping_decays_monotonically() {
        let o = op(ModelSelection::default(), 5.0);
        let f = bump(&o, 1e-5);
        let traj = evolve(&f, &o, &RunOptions { horizon: 0.2, ..RunOptions::default() }).unwrap();
        for pair in traj.records.windows(2) {
            for (a, b) in pair[0].moments.values.iter().zip(&pair[1].moments.values) {
                assert!(b <= a);
            }
            assert!(pair[1].gronwall_margin > 0.0);
        }
    }

    #[test]
    fn non_default_model_needs_dt() {
        let model = ModelSelection { kernel: KernelModel::Product, ..ModelSelection::default() };
        let o = op(model, 0.1);
        let f = bump(&o, 1e-6);
        assert!(evolve(&f, &o, &RunOptions { horizon: 0.1, ..RunOptions::default() }).is_err());
        let traj = evolve(&f, &o, &RunOptions { horizon: 0.1, dt: Some(0.01), ..RunOptions::default() }).unwrap();
        assert!(traj.constants.is_none());
        assert!(traj.records.iter().all(|r| r.gronwall_margin.is_nan()));
    }

    #[test]
    fn heun_runs_and_counts_clamps() {
        let o = op(ModelSelection::default(), 0.1);
        let f = bump(&o, 1e-6);
        let opts = RunOptions { horizon: 0.1, stepper: Stepper::Heun, ..RunOptions::default() };
        let traj = evolve(&f, &o, &opts).unwrap();
        assert!(traj.records.iter().all(|r| r.min_value >= 0.0));
    }

    #[test]
    fn bracket_examples() {
        let grid = RadialGrid::uniform(16, 0.0, 2.0).unwrap();
        let disp = DispersionParams::new(1.0, 1.0).unwrap();
        let phi: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let pos = vec![1.0; 16];
        let direct: f64 = grid.moment_weights(2.0, &disp, 3).iter().zip(&phi).map(|(w, p)| w * p).sum();
        assert!((bracket(&grid, &phi, &pos, 2.0, &disp, 3).unwrap() - direct).abs() < 1e-14);
        let norm: f64 = grid.moment_weights(2.0, &disp, 3).iter().zip(&phi).map(|(w, p)| w * p.abs()).sum();
        assert!((bracket(&grid, &phi, &phi, 2.0, &disp, 3).unwrap() - norm).abs() < 1e-14);
        assert_eq!(bracket(&grid, &phi, &[0.0; 16], 2.0, &disp, 3).unwrap(), 0.0);
    }
}
