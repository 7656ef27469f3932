//! Radial grids, nonnegative radial spectra, and the weighted L¹ moments
//! that every estimate in the crate is phrased in.
//!
//! A spectrum is the nodal representation of f(|p|) on a [`RadialGrid`]; it
//! is piecewise linear between nodes and identically zero outside
//! `[k_0, k_{n-1}]`. Integrals over ℝ^d reduce to
//! `S_{d-1} ∫ g(k) k^{d-1} dk` and use the grid's composite trapezoid rule
//! (trapezoid in ln k on logarithmic grids), whose weights are all positive.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{sphere_area, DispersionParams};

pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    Logarithmic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    spacing: Spacing,
    weights: Vec<f64>,
}

impl RadialGrid {
    pub fn uniform(n: usize, k_min: f64, k_max: f64) -> Result<Self> {
        check_extent(n, k_min, k_max)?;
        let dk = (k_max - k_min) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| k_min + i as f64 * dk).collect();
        nodes[n - 1] = k_max;
        Self::build(nodes, Spacing::Uniform)
    }

    pub fn logarithmic(n: usize, k_min: f64, k_max: f64) -> Result<Self> {
        check_extent(n, k_min, k_max)?;
        if k_min <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "logarithmic spacing needs k_min > 0, got {k_min}"
            )));
        }
        let step = (k_max / k_min).ln() / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| k_min * (i as f64 * step).exp()).collect();
        nodes[n - 1] = k_max;
        Self::build(nodes, Spacing::Logarithmic)
    }

    /// Rebuilds a grid from serialized nodes, recognising the spacing rule.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n < MIN_NODES {
            return Err(Error::InvalidGrid(format!("need at least {MIN_NODES} nodes, got {n}")));
        }
        let (k_min, k_max) = (nodes[0], nodes[n - 1]);
        let close = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .all(|(x, y)| (x - y).abs() <= 1e-9 * k_max.abs().max(1e-300))
        };
        if let Ok(g) = Self::uniform(n, k_min, k_max) {
            if close(&g.nodes, &nodes) {
                return Self::build(nodes, Spacing::Uniform);
            }
        }
        if let Ok(g) = Self::logarithmic(n, k_min, k_max) {
            if close(&g.nodes, &nodes) {
                return Self::build(nodes, Spacing::Logarithmic);
            }
        }
        Err(Error::InvalidGrid(
            "nodes are neither uniformly nor logarithmically spaced".into(),
        ))
    }

    fn build(nodes: Vec<f64>, spacing: Spacing) -> Result<Self> {
        let n = nodes.len();
        if nodes.iter().any(|k| !k.is_finite()) || nodes[0] < 0.0 {
            return Err(Error::InvalidGrid("nodes must be finite and nonnegative".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("nodes must be strictly increasing".into()));
        }
        let mut weights = vec![0.0; n];
        match spacing {
            Spacing::Uniform => {
                for i in 0..n - 1 {
                    let h = nodes[i + 1] - nodes[i];
                    weights[i] += 0.5 * h;
                    weights[i + 1] += 0.5 * h;
                }
            }
            Spacing::Logarithmic => {
                // ∫ g dk = ∫ g k d(ln k)
                for i in 0..n - 1 {
                    let h = (nodes[i + 1] / nodes[i]).ln();
                    weights[i] += 0.5 * h * nodes[i];
                    weights[i + 1] += 0.5 * h * nodes[i + 1];
                }
            }
        }
        Ok(RadialGrid { nodes, spacing, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// One-dimensional quadrature weights on `[k_0, k_{n-1}]`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn k_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn k_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// True for uniform grids whose first node is exactly 0, where node
    /// wavenumbers are integer multiples of the step.
    pub fn is_anchored_uniform(&self) -> bool {
        self.spacing == Spacing::Uniform && self.nodes[0] == 0.0
    }

    /// Per-node weights `S_{d-1} k^{d-1} w_k ω(k)^order`, so that
    /// `Σ weights·g` is `∫ g ω^order dp` for radial g.
    pub fn moment_weights(&self, order: f64, disp: &DispersionParams, d: u32) -> Vec<f64> {
        let s = sphere_area(d);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&k, &w)| {
                let om = disp.omega(k);
                let wm = if order == 0.0 { 1.0 } else { om.powf(order) };
                s * k.powi(d as i32 - 1) * w * wm
            })
            .collect()
    }
}

fn check_extent(n: usize, k_min: f64, k_max: f64) -> Result<()> {
    if n < MIN_NODES {
        return Err(Error::InvalidGrid(format!("need at least {MIN_NODES} nodes, got {n}")));
    }
    if !(k_min.is_finite() && k_max.is_finite()) || k_min < 0.0 || k_max <= k_min {
        return Err(Error::InvalidGrid(format!(
            "need 0 <= k_min < k_max, got [{k_min}, {k_max}]"
        )));
    }
    Ok(())
}

/// Nonnegative radial wave-action density sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSpectrum {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialSpectrum {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!(
                "spectrum value at node {i} must be finite and nonnegative, got {v}"
            )));
        }
        Ok(RadialSpectrum { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        RadialSpectrum { grid, values: vec![0.0; n] }
    }

    /// Samples `f` at the nodes; negative samples are an error.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&k| f(k)).collect();
        Self::new(grid, values)
    }

    pub(crate) fn from_values_unchecked(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        RadialSpectrum { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &RadialSpectrum) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|v| v * factor).collect())
    }

    /// Piecewise-linear value at `k`, zero outside the grid's extent.
    pub fn interpolate(&self, k: f64) -> f64 {
        interpolate_nodes(self.grid.nodes(), &self.values, k)
    }

    /// `M_order[f] = ∫ f ω^order dp`.
    pub fn moment(&self, order: f64, disp: &DispersionParams, d: u32) -> Result<f64> {
        if !(order >= 0.0 && order.is_finite()) {
            return Err(Error::Domain(format!("moment order must be >= 0, got {order}")));
        }
        let w = self.grid.moment_weights(order, disp, d);
        let m: f64 = w.iter().zip(&self.values).map(|(w, f)| w * f).sum();
        if !m.is_finite() {
            return Err(Error::Overflow(format!("moment of order {order}")));
        }
        Ok(m)
    }

    pub fn moments(&self, orders: &[f64], disp: &DispersionParams, d: u32) -> Result<MomentVector> {
        let values = orders
            .iter()
            .map(|&m| self.moment(m, disp, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(MomentVector { orders: orders.to_vec(), values })
    }

    /// Zeroes every node strictly above `r`.
    pub fn truncate(&self, r: f64) -> RadialSpectrum {
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&k, &f)| if k > r { 0.0 } else { f })
            .collect();
        RadialSpectrum { grid: self.grid.clone(), values }
    }
}

pub(crate) fn interpolate_nodes(nodes: &[f64], values: &[f64], k: f64) -> f64 {
    let n = nodes.len();
    if !(k >= nodes[0] && k <= nodes[n - 1]) {
        return 0.0;
    }
    // index of the first node > k
    let hi = nodes.partition_point(|&x| x <= k);
    if hi == 0 {
        return values[0];
    }
    if hi >= n {
        return values[n - 1];
    }
    let lo = hi - 1;
    let t = (k - nodes[lo]) / (nodes[hi] - nodes[lo]);
    values[lo] + t * (values[hi] - values[lo])
}

/// `∫ |g − h| ω^order dp`.
pub fn weighted_distance(
    g: &RadialSpectrum,
    h: &RadialSpectrum,
    order: f64,
    disp: &DispersionParams,
    d: u32,
) -> Result<f64> {
    if !g.same_grid(h) {
        return Err(Error::GridMismatch);
    }
    Ok(weighted_l1(g.grid(), &diff(g.values(), h.values()), order, disp, d))
}

/// `∫ |v| ω^order dp` for an arbitrary signed nodal field on `grid`.
pub fn weighted_l1(grid: &RadialGrid, v: &[f64], order: f64, disp: &DispersionParams, d: u32) -> f64 {
    grid.moment_weights(order, disp, d)
        .iter()
        .zip(v)
        .map(|(w, x)| w * x.abs())
        .sum()
}

/// `∫ v ω^order dp` for a signed nodal field.
pub fn weighted_integral(grid: &RadialGrid, v: &[f64], order: f64, disp: &DispersionParams, d: u32) -> f64 {
    grid.moment_weights(order, disp, d)
        .iter()
        .zip(v)
        .map(|(w, x)| w * x)
        .sum()
}

pub(crate) fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub orders: Vec<f64>,
    pub values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const ACOUSTIC: DispersionParams = DispersionParams { lambda1: 0.0, lambda2: 1.0 };

    fn grid(n: usize, k_max: f64) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::uniform(n, 0.0, k_max).unwrap())
    }

    #[test]
    fn grid_validation() {
        assert!(RadialGrid::uniform(7, 0.0, 1.0).is_err());
        assert!(RadialGrid::uniform(8, 1.0, 1.0).is_err());
        assert!(RadialGrid::logarithmic(16, 0.0, 1.0).is_err());
        assert!(RadialGrid::from_nodes(vec![0.0, 1.0, 0.5, 2.0, 3.0, 4.0, 5.0, 6.0]).is_err());
    }

    #[test]
    fn recognises_spacing_of_serialized_nodes() {
        let u = RadialGrid::uniform(33, 0.0, 5.0).unwrap();
        let back = RadialGrid::from_nodes(u.nodes().to_vec()).unwrap();
        assert_eq!(back.spacing(), Spacing::Uniform);
        let l = RadialGrid::logarithmic(33, 1e-2, 5.0).unwrap();
        let back = RadialGrid::from_nodes(l.nodes().to_vec()).unwrap();
        assert_eq!(back.spacing(), Spacing::Logarithmic);
        assert_eq!(back.weights(), l.weights());
    }

    #[test]
    fn zero_moment() {
        let f = RadialSpectrum::zeros(grid(64, 3.0));
        assert_eq!(f.moment(2.0, &ACOUSTIC, 3).unwrap(), 0.0);
    }

    #[test]
    fn unit_box_first_moment_is_pi() {
        // 4π ∫_0^1 k · k² dk = π
        let f = RadialSpectrum::from_fn(grid(2001, 1.0), |_| 1.0).unwrap();
        let m = f.moment(1.0, &ACOUSTIC, 3).unwrap();
        assert!((m - PI).abs() < 1e-6, "{m}");
    }

    #[test]
    fn gaussian_second_moment_on_log_grid() {
        // Oracle: composite Simpson on the continuous integrand, refined until
        // the last doubling changes less than 1e-14 relative.
        let disp = DispersionParams { lambda1: 1.0, lambda2: 1.0 };
        let integrand = |k: f64| 4.0 * PI * (-k * k).exp() * disp.omega(k).powi(2) * k * k;
        let (a, b) = (1e-3_f64, 8.0_f64);
        let simpson_log = |n: usize| {
            // Simpson in u = ln k
            let (ua, ub) = (a.ln(), b.ln());
            let h = (ub - ua) / n as f64;
            let g = |u: f64| integrand(u.exp()) * u.exp();
            let mut s = g(ua) + g(ub);
            for i in 1..n {
                s += g(ua + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let mut n = 1000;
        let mut reference = simpson_log(n);
        loop {
            n *= 2;
            let next = simpson_log(n);
            if ((next - reference) / next).abs() < 1e-14 || n > 1 << 22 {
                reference = next;
                break;
            }
            reference = next;
        }
        let g = Arc::new(RadialGrid::logarithmic(4000, a, b).unwrap());
        let f = RadialSpectrum::from_fn(g, |k| (-k * k).exp()).unwrap();
        let m = f.moment(2.0, &disp, 3).unwrap();
        assert!(((m - reference) / reference).abs() < 1e-6, "{m} vs {reference}");
    }

    #[test]
    fn interpolation_examples() {
        let g = grid(11, 10.0);
        let f = RadialSpectrum::from_fn(g.clone(), |k| k * k).unwrap();
        assert_eq!(f.interpolate(3.0), 9.0);
        assert_eq!(f.interpolate(10.5), 0.0);
        let mut v = vec![0.0; 11];
        v[2] = 2.0;
        v[3] = 4.0;
        let f = RadialSpectrum::new(g, v).unwrap();
        assert!((f.interpolate(2.5) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_examples() {
        let g = grid(11, 10.0);
        let f = RadialSpectrum::from_fn(g, |k| 1.0 + k).unwrap();
        assert_eq!(f.truncate(10.0), f);
        assert_eq!(f.truncate(20.0), f);
        assert!(f.truncate(-1.0).values().iter().all(|&v| v == 0.0));
        let t = f.truncate(4.5);
        assert_eq!(&t.values()[..5], &f.values()[..5]);
        assert!(t.values()[5..].iter().all(|&v| v == 0.0));
        assert_eq!(t.truncate(4.5), t);
    }

    #[test]
    fn log_grid_truncation_below_first_node() {
        let g = Arc::new(RadialGrid::logarithmic(16, 0.5, 8.0).unwrap());
        let f = RadialSpectrum::from_fn(g, |_| 1.0).unwrap();
        assert!(f.truncate(0.1).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn distance_examples() {
        let g = grid(32, 4.0);
        let a = RadialSpectrum::from_fn(g.clone(), |k| (-k).exp()).unwrap();
        let z = RadialSpectrum::zeros(g.clone());
        assert_eq!(weighted_distance(&a, &a, 2.0, &ACOUSTIC, 3).unwrap(), 0.0);
        let m = a.moment(2.0, &ACOUSTIC, 3).unwrap();
        assert!((weighted_distance(&a, &z, 2.0, &ACOUSTIC, 3).unwrap() - m).abs() < 1e-14 * m);
        let other = RadialSpectrum::zeros(grid(32, 5.0));
        assert!(matches!(weighted_distance(&a, &other, 2.0, &ACOUSTIC, 3), Err(Error::GridMismatch)));
    }

    #[test]
    fn rejects_negative_values() {
        assert!(RadialSpectrum::new(grid(8, 1.0), vec![0.0, 1.0, -1e-3, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    fn spectrum(vals: Vec<f64>) -> RadialSpectrum {
        RadialSpectrum::new(grid(vals.len(), 5.0), vals).unwrap()
    }

    proptest! {
        #[test]
        fn moment_linear_and_monotone(a in proptest::collection::vec(0.0..2.0f64, 16),
                                      b in proptest::collection::vec(0.0..2.0f64, 16),
                                      order in 0.0..5.0f64) {
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let (fa, fb, fs) = (spectrum(a), spectrum(b), spectrum(sum));
            let (ma, mb, ms) = (
                fa.moment(order, &ACOUSTIC, 3).unwrap(),
                fb.moment(order, &ACOUSTIC, 3).unwrap(),
                fs.moment(order, &ACOUSTIC, 3).unwrap(),
            );
            prop_assert!((ms - ma - mb).abs() <= 1e-12 * ms.max(1.0));
            prop_assert!(ms + 1e-12 >= ma.max(mb));
        }

        #[test]
        fn truncation_never_increases_moments(a in proptest::collection::vec(0.0..2.0f64, 16),
                                              r in 0.0..6.0f64, order in 0.0..5.0f64) {
            let f = spectrum(a);
            let t = f.truncate(r);
            prop_assert!(t.moment(order, &ACOUSTIC, 3).unwrap() <= f.moment(order, &ACOUSTIC, 3).unwrap());
            prop_assert!(t.values().iter().zip(f.values()).all(|(x, y)| x <= y));
        }

        #[test]
        fn distance_is_a_metric(a in proptest::collection::vec(0.0..2.0f64, 16),
                                b in proptest::collection::vec(0.0..2.0f64, 16),
                                c in proptest::collection::vec(0.0..2.0f64, 16),
                                order in 0.0..5.0f64) {
            let (g, h, u) = (spectrum(a), spectrum(b), spectrum(c));
            let d = |x: &RadialSpectrum, y: &RadialSpectrum| weighted_distance(x, y, order, &ACOUSTIC, 3).unwrap();
            prop_assert!((d(&g, &h) - d(&h, &g)).abs() <= 1e-14 * d(&g, &h).max(1e-300));
            prop_assert!(d(&g, &h) <= d(&g, &u) + d(&u, &h) + 1e-12);
            // direct nodewise recomputation
            let w = g.grid().moment_weights(order, &ACOUSTIC, 3);
            let direct: f64 = (0..16).map(|i| w[i] * (g.values()[i] - h.values()[i]).abs()).sum();
            prop_assert!((d(&g, &h) - direct).abs() <= 1e-12 * direct.max(1e-300));
        }

        #[test]
        fn moment_equals_norm_for_nonnegative(a in proptest::collection::vec(0.0..2.0f64, 16), order in 0.0..5.0f64) {
            let f = spectrum(a);
            let norm = weighted_l1(f.grid(), f.values(), order, &ACOUSTIC, 3);
            prop_assert!((f.moment(order, &ACOUSTIC, 3).unwrap() - norm).abs() <= 1e-12 * norm.max(1e-300));
        }

        #[test]
        fn interpolation_stays_between_neighbours(a in proptest::collection::vec(0.0..2.0f64, 16), k in 0.0..5.0f64) {
            let f = spectrum(a);
            let v = f.interpolate(k);
            let nodes = f.grid().nodes();
            let hi = nodes.partition_point(|&x| x <= k).min(15);
            let lo = hi.saturating_sub(1);
            let (x, y) = (f.values()[lo], f.values()[hi]);
            prop_assert!(v >= x.min(y) - 1e-15 && v <= x.max(y) + 1e-15);
        }
    }
}
