//! Frozen constants of the a priori estimates.
//!
//! Everything here is a closed-form expression in the physical parameters and
//! a few moments of the data. The constants are only claimed for the ocean
//! broadening model with the sum kernel.
//!
//! * Gain: `∫ C_gain[g] ω^m ≤ K_m · M_0[g] · M_{m+2}[g]` with
//!   `K_m = 160 C² max(1, 2^{m−1}) / (3 c1 c2 Λ2)`.
//! * Loss: `ϑ[f](k) ≤ A1 k² + A2`, `A1 = 32C²/(3c1c2)·M_0`, `A2 = 32C²/(3c1c2Λ2)·M_2`.
//! * Grönwall: with `K = K_m·B` and B a bound on the mass over the horizon,
//!   `dM_m/dt ≤ Ĉ M_m` where `Ĉ = sup_k (K ω(k)² − 2ν k^γ)`; `C̃ = max(2Ĉ, 1)`.

use serde::Serialize;

use crate::broadening::ModelSelection;
use crate::error::{Error, Result};
use crate::params::{DispersionParams, PhysicalParams};
use crate::spectrum::{RadialGrid, RadialSpectrum};

fn require_default_pair(model: &ModelSelection) -> Result<()> {
    if model.is_default_pair() {
        Ok(())
    } else {
        Err(Error::Unsupported(
            "analytic constants exist only for ocean broadening with the sum kernel".into(),
        ))
    }
}

/// `max(1, 2^{m−1})`, the constant in `(a + b)^m ≤ c_m (a^m + b^m)`.
pub fn power_mean_factor(m: f64) -> f64 {
    2f64.powf(m - 1.0).max(1.0)
}

fn lorentz_scale(params: &PhysicalParams) -> f64 {
    let c = params.kernel_constant_c;
    c * c / (3.0 * params.broadening_c1 * params.broadening_floor_c2)
}

/// `K_m` in the bilinear gain bound.
pub fn gain_constant(
    params: &PhysicalParams,
    disp: &DispersionParams,
    model: &ModelSelection,
    order: f64,
) -> Result<f64> {
    require_default_pair(model)?;
    if !(order >= 0.0) {
        return Err(Error::Domain(format!("moment order must be >= 0, got {order}")));
    }
    Ok(160.0 * lorentz_scale(params) * power_mean_factor(order) / disp.lambda2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gronwall {
    pub c_hat: f64,
    pub c_tilde: f64,
    pub theta_star: f64,
}

/// `Ĉ = sup_{k ≥ 0} (K(Λ1 + Λ2 k²) − 2ν k^γ)` in closed form.
pub fn derive_gronwall(params: &PhysicalParams, disp: &DispersionParams, k: f64) -> Result<Gronwall> {
    let gamma = params.damping_exponent_gamma;
    if gamma <= 2.0 {
        return Err(Error::Domain(format!("damping exponent must exceed 2, got {gamma}")));
    }
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("gain constant must be finite and >= 0, got {k}")));
    }
    let nu = params.viscosity_nu;
    let c_hat = if k == 0.0 {
        0.0
    } else if nu <= 0.0 {
        return Err(Error::Domain("growth is unbounded without viscosity".into()));
    } else {
        // stationary point of K Λ2 k² − 2ν k^γ
        let s = (k * disp.lambda2 / (nu * gamma)).powf(2.0 / (gamma - 2.0));
        k * disp.lambda1 + k * disp.lambda2 * s * (1.0 - 2.0 / gamma)
    };
    if !c_hat.is_finite() {
        return Err(Error::Overflow("Grönwall constant".into()));
    }
    let c_tilde = (2.0 * c_hat).max(1.0);
    Ok(Gronwall { c_hat, c_tilde, theta_star: c_tilde })
}

pub fn derive_loss_constants(
    f0: &RadialSpectrum,
    params: &PhysicalParams,
    disp: &DispersionParams,
) -> Result<(f64, f64)> {
    let d = params.dimension_d;
    let m0 = f0.moment(0.0, disp, d)?;
    let m2 = f0.moment(2.0, disp, d)?;
    let s = 32.0 * lorentz_scale(params);
    Ok((s * m0, s * m2 / disp.lambda2))
}

/// Smallest B with `B = M_0·exp(C̃(K_m B)·T)`, found by monotone iteration.
pub fn mass_bound(
    m0: f64,
    unit_gain: f64,
    horizon: f64,
    params: &PhysicalParams,
    disp: &DispersionParams,
) -> Result<f64> {
    if m0 == 0.0 {
        return Ok(0.0);
    }
    let mut b = m0;
    for _ in 0..500 {
        let next = m0 * (derive_gronwall(params, disp, unit_gain * b)?.c_tilde * horizon).exp();
        if !next.is_finite() || next > 1e300 {
            break;
        }
        if next <= b * (1.0 + 1e-15) {
            return Ok(next.max(b));
        }
        b = next;
    }
    Err(Error::Precondition(format!(
        "no certified mass bound over horizon {horizon}: initial mass {m0} is too large for the growth constant"
    )))
}

/// `h_R / 2 = 1 / (2((A1 R² + A2) e^{C̃T} + 2ν R^γ))`.
pub fn step_size_bound(r: f64, a1: f64, a2: f64, c_tilde: f64, horizon: f64, params: &PhysicalParams) -> f64 {
    let rate = (a1 * r * r + a2) * (c_tilde * horizon).exp() + params.damping(r);
    0.5 / rate
}

/// `ρ = max ω_i^{−(m+2)}` over nodes that carry radial measure.
pub fn inverse_frequency_factor(grid: &RadialGrid, disp: &DispersionParams, order: f64, d: u32) -> f64 {
    grid.nodes()
        .iter()
        .zip(grid.moment_weights(0.0, disp, d))
        .filter(|(_, w)| *w > 0.0)
        .map(|(&k, _)| disp.omega(k).powf(-(order + 2.0)))
        .fold(0.0, f64::max)
}

/// K' in `‖C[g] − C[h]‖_{L¹_m} ≤ K' ‖g − h‖_{L¹_{m+2}}` for spectra whose
/// M_0 and M_{m+2} are at most `family_bound`.
pub fn lipschitz_constant(
    params: &PhysicalParams,
    disp: &DispersionParams,
    model: &ModelSelection,
    grid: &RadialGrid,
    order: f64,
    family_bound: f64,
) -> Result<f64> {
    require_default_pair(model)?;
    let rho = inverse_frequency_factor(grid, disp, order, params.dimension_d);
    Ok(288.0 * lorentz_scale(params) * (1.0 + power_mean_factor(order)) * (1.0 + rho) * family_bound
        / disp.lambda2)
}

/// K'' in the square-root bound; follows from the Lipschitz bound since
/// `‖g − h‖_{L¹_{m+2}} ≤ 2M` on the family.
pub fn holder_constant(lipschitz: f64, family_bound: f64) -> f64 {
    lipschitz * (2.0 * family_bound).sqrt()
}

/// One-sided Lipschitz constant of `Q = C − damping` in `L¹_m` on the grid.
pub fn bracket_constant(lipschitz: f64, grid: &RadialGrid, disp: &DispersionParams) -> f64 {
    lipschitz * disp.omega(grid.k_max()).powi(2)
}

/// Run-level constants used by the integrator's monitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticConstants {
    /// `K_m` at the largest monitored order.
    pub gain_constant_unit: f64,
    /// Bound on M_0 over the horizon.
    pub mass_bound: f64,
    /// `K = K_m · B`, the constant entering Ĉ.
    pub gain_constant: f64,
    pub gronwall_c_hat: f64,
    pub gronwall_ctilde: f64,
    pub theta_star: f64,
    pub loss_a1: f64,
    pub loss_a2: f64,
    pub varsigma: f64,
    pub working_order: f64,
    pub max_order: f64,
    pub horizon: f64,
}

impl AnalyticConstants {
    pub fn derive(
        f0: &RadialSpectrum,
        params: &PhysicalParams,
        disp: &DispersionParams,
        model: &ModelSelection,
        monitored_orders: &[f64],
        working_order: f64,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
        }
        let d = params.dimension_d;
        let max_order = monitored_orders
            .iter()
            .copied()
            .fold(working_order + 3.0, f64::max);
        let unit = gain_constant(params, disp, model, max_order)?;
        let m0 = f0.moment(0.0, disp, d)?;
        let b = mass_bound(m0, unit, horizon, params, disp)?;
        let k = unit * b;
        let g = derive_gronwall(params, disp, k)?;
        let (a1, a2) = derive_loss_constants(f0, params, disp)?;
        let norm = f0.moment(working_order + 3.0, disp, d)?;
        Ok(AnalyticConstants {
            gain_constant_unit: unit,
            mass_bound: b,
            gain_constant: k,
            gronwall_c_hat: g.c_hat,
            gronwall_ctilde: g.c_tilde,
            theta_star: g.theta_star,
            loss_a1: a1,
            loss_a2: a2,
            varsigma: norm.max(1.0 + 1e-6),
            working_order,
            max_order,
            horizon,
        })
    }

    pub fn step_size_bound(&self, r: f64, params: &PhysicalParams) -> f64 {
        step_size_bound(r, self.loss_a1, self.loss_a2, self.gronwall_ctilde, self.horizon, params)
    }
}
