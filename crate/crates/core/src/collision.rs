//! Deterministic evaluation of the broadened collision operator for radial
//! spectra in three dimensions.
//!
//! With p = k ẑ, the momentum delta reduces both triad types to the triangle
//! `|k1 − k2| ≤ k ≤ k1 + k2` with density `(2π/k)·k1·k2`. The discrete triple
//! weight is `(2π/k_i)·k_j·k_l·w_j·w_l·s`, where `s` is 1 inside the triangle
//! and ½ on its edges. Multiplying by the radial measure `4π k_i² w_i` gives
//! `8π² k_i k_j k_l w_i w_j w_l s`, which is symmetric in all three indices, so
//! the weak form and the gain/loss rearrangement hold exactly on the grid.
//!
//! Every momentum is restricted to `|p| ≤ k_max`. A node at `k = 0` takes the
//! triad geometry of the first positive node together with its own `f`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::broadening::{kernel_squared, lorentzian_unchecked, BroadeningField, ModelSelection};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::params::{sphere_area, DispersionParams, PhysicalParams};
use crate::spectrum::{RadialGrid, RadialSpectrum};

#[derive(Debug, Clone)]
pub struct TriadQuadrature {
    grid: Arc<RadialGrid>,
    /// Node whose triples serve output node i.
    source: Vec<usize>,
    offsets: Vec<usize>,
    j: Vec<u32>,
    l: Vec<u32>,
    w: Vec<f64>,
}

pub fn build_quadrature(grid: Arc<RadialGrid>, d: u32) -> Result<TriadQuadrature> {
    build_quadrature_scaled(grid, d, 1.0)
}

/// As [`build_quadrature`] with every weight multiplied by `scale`. Anything
/// other than 1 produces a wrong operator; it exists to exercise the oracle.
pub fn build_quadrature_scaled(grid: Arc<RadialGrid>, d: u32, scale: f64) -> Result<TriadQuadrature> {
    if d != 3 {
        return Err(Error::Unsupported(format!(
            "deterministic triad quadrature is implemented for d = 3 only (got d = {d}); use the Monte Carlo path"
        )));
    }
    let n = grid.len();
    if n > u32::MAX as usize {
        return Err(Error::InvalidGrid("grid too large".into()));
    }
    let k = grid.nodes();
    let wk = grid.weights();
    let exact = grid.is_anchored_uniform();
    let tol = 1e-12 * grid.k_max();
    let side = |i: usize, j: usize, l: usize| -> f64 {
        if exact {
            if i > j + l || j > i + l || l > i + j {
                0.0
            } else if i == j + l || j == i + l || l == i + j {
                0.5
            } else {
                1.0
            }
        } else {
            let (a, b, c) = (k[i], k[j], k[l]);
            let gaps = [b + c - a, a + c - b, a + b - c];
            if gaps.iter().any(|&g| g < -tol) {
                0.0
            } else if gaps.iter().any(|&g| g <= tol) {
                0.5
            } else {
                1.0
            }
        }
    };

    let mut source = vec![0; n];
    let mut offsets = Vec::with_capacity(n + 1);
    let (mut js, mut ls, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    offsets.push(0);
    for i in 0..n {
        source[i] = i;
        if k[i] > 0.0 {
            for j in 0..n {
                if k[j] == 0.0 {
                    continue;
                }
                for l in 0..n {
                    if k[l] == 0.0 {
                        continue;
                    }
                    let s = side(i, j, l);
                    if s == 0.0 {
                        continue;
                    }
                    js.push(j as u32);
                    ls.push(l as u32);
                    ws.push(scale * 2.0 * PI / k[i] * k[j] * k[l] * wk[j] * wk[l] * s);
                }
            }
        }
        offsets.push(js.len());
    }
    if k[0] == 0.0 {
        source[0] = 1;
    }
    Ok(TriadQuadrature { grid, source, offsets, j: js, l: ls, w: ws })
}

impl TriadQuadrature {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// `(k1 index, k2 index, weight)` for every triple attached to node `i`.
    pub fn triples(&self, i: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        r.map(move |t| (self.j[t] as usize, self.l[t] as usize, self.w[t]))
    }

    pub fn source_node(&self, i: usize) -> usize {
        self.source[i]
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionOutput {
    pub gain: Vec<f64>,
    pub loss_frequency: Vec<f64>,
    /// `gain − f·loss_frequency`.
    pub total: Vec<f64>,
    /// The unsplit integrand summed directly; equals `total` up to roundoff.
    pub direct: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CollisionOperator {
    quad: Arc<TriadQuadrature>,
    model: ModelSelection,
    disp: DispersionParams,
    params: PhysicalParams,
    omega: Vec<f64>,
    exec: Execution,
}

#[derive(Clone, Copy, Default)]
struct NodeSums {
    gain: f64,
    loss: f64,
    direct: f64,
}

impl CollisionOperator {
    pub fn new(
        quad: Arc<TriadQuadrature>,
        model: ModelSelection,
        disp: DispersionParams,
        params: PhysicalParams,
    ) -> Self {
        let omega = quad.grid.nodes().iter().map(|&k| disp.omega(k)).collect();
        CollisionOperator { quad, model, disp, params, omega, exec: Execution::default() }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn quadrature(&self) -> &Arc<TriadQuadrature> {
        &self.quad
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.quad.grid
    }

    pub fn model(&self) -> &ModelSelection {
        &self.model
    }

    pub fn dispersion(&self) -> &DispersionParams {
        &self.disp
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    fn check(&self, f: &RadialSpectrum) -> Result<BroadeningField> {
        if !(Arc::ptr_eq(f.grid(), &self.quad.grid) || **f.grid() == *self.quad.grid) {
            return Err(Error::GridMismatch);
        }
        let field = BroadeningField::new(f, &self.model, &self.params)?;
        field.check_positive()?;
        Ok(field)
    }

    fn node_sums(&self, f: &[f64], rates: &[f64], field: &BroadeningField, i: usize) -> NodeSums {
        let src = self.quad.source[i];
        let k = self.quad.grid.nodes();
        let (ko, wo, fo) = (k[src], self.omega[src], f[i]);
        let go = if src == i { rates[i] } else { field.rate(ko, wo, fo) };
        let kernel = self.model.kernel;
        let c = self.params.kernel_constant_c;
        let mut s = NodeSums::default();
        for (j, l, w) in self.quad.triples(src) {
            let (f1, f2) = (f[j], f[l]);
            let (w1, w2) = (self.omega[j], self.omega[l]);
            let gamma = field.total(go, rates[j], rates[l]);
            let v2 = w * kernel_squared(ko, k[j], k[l], kernel, c);
            let a = v2 * lorentzian_unchecked(wo - w1 - w2, gamma);
            let b = v2 * lorentzian_unchecked(w1 - wo - w2, gamma);
            s.gain += a * f1 * f2 + 2.0 * b * (fo * f1 + f1 * f2);
            s.loss += 2.0 * a * f1 + 2.0 * b * f2;
            s.direct += a * (f1 * f2 - fo * f1 - fo * f2) - 2.0 * b * (fo * f2 - f1 * fo - f1 * f2);
        }
        s
    }

    fn sums(&self, f: &RadialSpectrum) -> Result<Vec<NodeSums>> {
        let field = self.check(f)?;
        let rates = field.node_rates(f, &self.disp);
        let vals = f.values();
        let out = self
            .exec
            .map_range(vals.len(), |i| self.node_sums(vals, &rates, &field, i));
        for (i, s) in out.iter().enumerate() {
            if !(s.gain.is_finite() && s.loss.is_finite() && s.direct.is_finite()) {
                return Err(Error::Overflow(format!(
                    "collision integral at node {i} (k = {})",
                    self.quad.grid.nodes()[i]
                )));
            }
        }
        Ok(out)
    }

    pub fn collision(&self, f: &RadialSpectrum) -> Result<CollisionOutput> {
        let sums = self.sums(f)?;
        let mut out = CollisionOutput {
            gain: Vec::with_capacity(sums.len()),
            loss_frequency: Vec::with_capacity(sums.len()),
            total: Vec::with_capacity(sums.len()),
            direct: Vec::with_capacity(sums.len()),
        };
        for (s, &fi) in sums.iter().zip(f.values()) {
            out.gain.push(s.gain);
            out.loss_frequency.push(s.loss);
            out.total.push(s.gain - fi * s.loss);
            out.direct.push(s.direct);
        }
        Ok(out)
    }

    pub fn gain(&self, f: &RadialSpectrum) -> Result<Vec<f64>> {
        Ok(self.sums(f)?.into_iter().map(|s| s.gain).collect())
    }

    pub fn loss_frequency(&self, f: &RadialSpectrum) -> Result<Vec<f64>> {
        Ok(self.sums(f)?.into_iter().map(|s| s.loss).collect())
    }

    /// `Σ N_{p,p1,p2}[f]·(φ(k) − φ(k1) − φ(k2))` over the discrete triad measure.
    pub fn weak_form_apply(&self, f: &RadialSpectrum, phi: &[f64]) -> Result<f64> {
        let field = self.check(f)?;
        let n = self.quad.grid.len();
        if phi.len() != n {
            return Err(Error::GridMismatch);
        }
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("test function must be finite".into()));
        }
        let rates = field.node_rates(f, &self.disp);
        let vals = f.values();
        let k = self.quad.grid.nodes();
        let wk = self.quad.grid.weights();
        let s_area = sphere_area(3);
        let kernel = self.model.kernel;
        let c = self.params.kernel_constant_c;
        let per_node = self.exec.map_range(n, |i| {
            if self.quad.source[i] != i {
                // only the k = 0 node, whose radial measure vanishes
                return 0.0;
            }
            let mu_i = s_area * k[i] * k[i] * wk[i];
            let (fo, wo) = (vals[i], self.omega[i]);
            let mut acc = 0.0;
            for (j, l, w) in self.quad.triples(i) {
                let (f1, f2) = (vals[j], vals[l]);
                let gamma = field.total(rates[i], rates[j], rates[l]);
                let v2 = w * kernel_squared(k[i], k[j], k[l], kernel, c);
                let nn = v2
                    * lorentzian_unchecked(wo - self.omega[j] - self.omega[l], gamma)
                    * (f1 * f2 - fo * f1 - fo * f2);
                acc += nn * (phi[i] - phi[j] - phi[l]);
            }
            mu_i * acc
        });
        let total: f64 = per_node.iter().sum();
        if !total.is_finite() {
            return Err(Error::Overflow("weak form".into()));
        }
        Ok(total)
    }

    /// `∫ C[f] φ dp` with the grid's radial measure.
    pub fn integrate_against(&self, total: &[f64], phi: &[f64]) -> f64 {
        let k = self.quad.grid.nodes();
        let wk = self.quad.grid.weights();
        let s_area = sphere_area(3);
        (0..total.len())
            .map(|i| s_area * k[i] * k[i] * wk[i] * total[i] * phi[i])
            .sum()
    }
}
