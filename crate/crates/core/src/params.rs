//! Physical constants, the dispersion relation and viscous damping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the model. Units are consistent SI throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalParams {
    /// Coriolis parameter F (rad/s).
    pub coriolis_f: f64,
    /// Buoyancy frequency N (rad/s).
    pub buoyancy_n: f64,
    /// Reference vertical wavenumber (1/m). Not to be confused with a moment order.
    pub ref_vertical_wavenumber_m: f64,
    pub gravity_g: f64,
    pub density_rho0: f64,
    /// Viscosity ν in the damping rate 2ν k^γ.
    pub viscosity_nu: f64,
    /// Damping exponent γ, must exceed 2.
    pub damping_exponent_gamma: f64,
    pub broadening_c1: f64,
    /// Floor c2 of the per-mode broadening rate.
    pub broadening_floor_c2: f64,
    /// Interaction kernel prefactor.
    pub kernel_constant_c: f64,
    pub dimension_d: u32,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            coriolis_f: 0.0,
            buoyancy_n: 1.0,
            ref_vertical_wavenumber_m: 1.0,
            gravity_g: 1.0,
            density_rho0: 1.0,
            viscosity_nu: 0.1,
            damping_exponent_gamma: 3.0,
            broadening_c1: 1.0,
            broadening_floor_c2: 1.0,
            kernel_constant_c: 1.0,
            dimension_d: 3,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("coriolis_f", self.coriolis_f),
            ("buoyancy_n", self.buoyancy_n),
            ("ref_vertical_wavenumber_m", self.ref_vertical_wavenumber_m),
            ("gravity_g", self.gravity_g),
            ("density_rho0", self.density_rho0),
            ("viscosity_nu", self.viscosity_nu),
            ("damping_exponent_gamma", self.damping_exponent_gamma),
            ("broadening_c1", self.broadening_c1),
            ("broadening_floor_c2", self.broadening_floor_c2),
            ("kernel_constant_c", self.kernel_constant_c),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite, got {v}")));
            }
        }
        if self.damping_exponent_gamma <= 2.0 {
            return Err(Error::InvalidParams(format!(
                "damping_exponent_gamma must exceed 2, got {}",
                self.damping_exponent_gamma
            )));
        }
        for (name, v) in [
            ("buoyancy_n", self.buoyancy_n),
            ("ref_vertical_wavenumber_m", self.ref_vertical_wavenumber_m),
            ("density_rho0", self.density_rho0),
            ("broadening_c1", self.broadening_c1),
            ("broadening_floor_c2", self.broadening_floor_c2),
        ] {
            if v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.gravity_g == 0.0 {
            return Err(Error::InvalidParams("gravity_g must be nonzero".into()));
        }
        if self.viscosity_nu < 0.0 {
            return Err(Error::InvalidParams(format!(
                "viscosity_nu must be nonnegative, got {}",
                self.viscosity_nu
            )));
        }
        if !matches!(self.dimension_d, 2 | 3) {
            return Err(Error::InvalidParams(format!(
                "dimension_d must be 2 or 3, got {}",
                self.dimension_d
            )));
        }
        Ok(())
    }

    /// Viscous damping rate 2ν k^γ.
    #[inline]
    pub fn damping(&self, k: f64) -> f64 {
        2.0 * self.viscosity_nu * k.powf(self.damping_exponent_gamma)
    }

    /// Area of the unit sphere S^{d-1}.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.dimension_d)
    }
}

pub fn sphere_area(d: u32) -> f64 {
    use std::f64::consts::PI;
    match d {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension {d}"),
    }
}

/// Constants of ω(k) = sqrt(Λ1 + Λ2 k²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionParams {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl DispersionParams {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1.is_finite() && lambda1 >= 0.0) {
            return Err(Error::InvalidParams(format!("lambda1 must be >= 0, got {lambda1}")));
        }
        if !(lambda2.is_finite() && lambda2 > 0.0) {
            return Err(Error::InvalidParams(format!("lambda2 must be > 0, got {lambda2}")));
        }
        Ok(DispersionParams { lambda1, lambda2 })
    }

    #[inline]
    pub fn omega(&self, k: f64) -> f64 {
        (self.lambda1 + self.lambda2 * k * k).sqrt()
    }
}

/// Λ1 = F², Λ2 = g² / (m² ρ0² N²).
pub fn derive_dispersion(params: &PhysicalParams) -> DispersionParams {
    let PhysicalParams {
        coriolis_f: f,
        gravity_g: g,
        ref_vertical_wavenumber_m: m,
        density_rho0: rho0,
        buoyancy_n: n,
        ..
    } = *params;
    DispersionParams {
        lambda1: f * f,
        lambda2: (g * g) / (m * m * rho0 * rho0 * n * n),
    }
}

pub fn omega(k: f64, disp: &DispersionParams) -> f64 {
    disp.omega(k)
}

pub fn damping(k: f64, params: &PhysicalParams) -> f64 {
    params.damping(k)
}
