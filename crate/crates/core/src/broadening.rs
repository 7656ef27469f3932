//! Resonance broadening: per-mode rates γ, triad width Γ and the Lorentzian
//! that replaces the frequency delta, plus the two interaction kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DispersionParams, PhysicalParams};
use crate::spectrum::RadialSpectrum;

pub const DEFAULT_ACOUSTIC_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BroadeningModel {
    /// γ = c1·max(ω f, c2)
    #[default]
    Ocean,
    /// γ = k² ∫ κ² f(κ) dκ
    Acoustic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelModel {
    /// |V|² = C²(k + k1 + k2)²
    #[default]
    Sum,
    /// |V|² = C² k k1 k2
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSelection {
    #[serde(rename = "broadening_model")]
    pub broadening: BroadeningModel,
    #[serde(rename = "kernel_model")]
    pub kernel: KernelModel,
    /// Lower clamp on Γ under the acoustic model; 0 disables it.
    pub acoustic_gamma_floor: f64,
}

impl Default for ModelSelection {
    fn default() -> Self {
        ModelSelection {
            broadening: BroadeningModel::Ocean,
            kernel: KernelModel::Sum,
            acoustic_gamma_floor: DEFAULT_ACOUSTIC_FLOOR,
        }
    }
}

impl ModelSelection {
    pub fn is_default_pair(&self) -> bool {
        self.broadening == BroadeningModel::Ocean && self.kernel == KernelModel::Sum
    }

    fn floor(&self) -> f64 {
        match self.broadening {
            BroadeningModel::Ocean => 0.0,
            BroadeningModel::Acoustic => self.acoustic_gamma_floor.max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriadBroadening {
    pub gamma_k: f64,
    pub gamma_k1: f64,
    pub gamma_k2: f64,
    pub total: f64,
}

/// Evaluates γ for one spectrum at arbitrary wavenumbers. The acoustic line
/// integral is computed once at construction.
#[derive(Debug, Clone, Copy)]
pub struct BroadeningField {
    model: BroadeningModel,
    c1: f64,
    c2: f64,
    acoustic_integral: f64,
    floor: f64,
}

impl BroadeningField {
    pub fn new(f: &RadialSpectrum, model: &ModelSelection, params: &PhysicalParams) -> Result<Self> {
        let acoustic_integral = match model.broadening {
            BroadeningModel::Ocean => 0.0,
            BroadeningModel::Acoustic => {
                let g = f.grid();
                let i: f64 = g
                    .nodes()
                    .iter()
                    .zip(g.weights())
                    .zip(f.values())
                    .map(|((k, w), v)| k * k * w * v)
                    .sum();
                if !i.is_finite() {
                    return Err(Error::Overflow("acoustic broadening integral".into()));
                }
                i
            }
        };
        Ok(BroadeningField {
            model: model.broadening,
            c1: params.broadening_c1,
            c2: params.broadening_floor_c2,
            acoustic_integral,
            floor: model.floor(),
        })
    }

    /// γ at wavenumber `k` where the spectrum takes the value `f_k`.
    #[inline]
    pub fn rate(&self, k: f64, omega_k: f64, f_k: f64) -> f64 {
        match self.model {
            BroadeningModel::Ocean => self.c1 * (omega_k * f_k).max(self.c2),
            BroadeningModel::Acoustic => k * k * self.acoustic_integral,
        }
    }

    /// Γ from three per-mode rates, with the configured floor applied.
    #[inline]
    pub fn total(&self, g: f64, g1: f64, g2: f64) -> f64 {
        (g + g1 + g2).max(self.floor)
    }

    pub fn node_rates(&self, f: &RadialSpectrum, disp: &DispersionParams) -> Vec<f64> {
        f.grid()
            .nodes()
            .iter()
            .zip(f.values())
            .map(|(&k, &v)| self.rate(k, disp.omega(k), v))
            .collect()
    }

    /// Fails when some triad with a positive wavenumber could see Γ = 0.
    pub fn check_positive(&self) -> Result<()> {
        if self.model == BroadeningModel::Acoustic && self.floor <= 0.0 && self.acoustic_integral <= 0.0 {
            return Err(Error::Domain(
                "acoustic broadening width vanishes and no floor is configured".into(),
            ));
        }
        Ok(())
    }
}

pub fn gamma_mode(
    f: &RadialSpectrum,
    k: f64,
    model: &ModelSelection,
    disp: &DispersionParams,
    params: &PhysicalParams,
) -> Result<f64> {
    let field = BroadeningField::new(f, model, params)?;
    Ok(field.rate(k, disp.omega(k), f.interpolate(k)))
}

pub fn triad_broadening(
    f: &RadialSpectrum,
    k: f64,
    k1: f64,
    k2: f64,
    model: &ModelSelection,
    disp: &DispersionParams,
    params: &PhysicalParams,
) -> Result<TriadBroadening> {
    let field = BroadeningField::new(f, model, params)?;
    let rate = |q: f64| field.rate(q, disp.omega(q), f.interpolate(q));
    let (gamma_k, gamma_k1, gamma_k2) = (rate(k), rate(k1), rate(k2));
    Ok(TriadBroadening {
        gamma_k,
        gamma_k1,
        gamma_k2,
        total: field.total(gamma_k, gamma_k1, gamma_k2),
    })
}

/// Γ / (Δ² + Γ²).
pub fn lorentzian(delta: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("broadening width must be positive, got {gamma}")));
    }
    Ok(lorentzian_unchecked(delta, gamma))
}

#[inline]
pub fn lorentzian_unchecked(delta: f64, gamma: f64) -> f64 {
    gamma / (delta * delta + gamma * gamma)
}

#[inline]
pub fn kernel_squared(k: f64, k1: f64, k2: f64, kernel: KernelModel, c: f64) -> f64 {
    match kernel {
        KernelModel::Sum => {
            let s = k + k1 + k2;
            c * c * s * s
        }
        KernelModel::Product => c * c * k * k1 * k2,
    }
}
