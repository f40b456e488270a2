//! Gauss–Legendre rules and the quadrature grids on S⁴.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quaternion::Quaternion;

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|v| v * h).collect())
}

/// Composite Gauss–Legendre over equal panels of [a, b]; summation order is fixed.
pub fn integrate_composite<F: Fn(f64) -> f64 + Sync>(f: F, a: f64, b: f64, panels: usize, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let parts: Vec<f64> = (0..panels)
        .into_par_iter()
        .map(|p| {
            let c = a + (p as f64 + 0.5) * h;
            x.iter().zip(&w).map(|(t, wt)| wt * f(c + 0.5 * h * t)).sum::<f64>() * 0.5 * h
        })
        .collect();
    pairwise_sum(&parts)
}

/// Pairwise summation, deterministic for a fixed input order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Geodesic polar quadrature on S⁴ for functions of r = |ζ| = tan(θ/2).
///
/// Nodes are Gauss–Legendre in cos θ, so the u = sin²(θ/2) images are
/// Legendre points on [0, 1] and polynomial interpolation through them is well
/// conditioned. The weights are stated against dθ: 2π² Σ w_k sin³θ_k g(θ_k).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub theta: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n: usize) -> Self {
        let (x, wx) = gauss_legendre(n);
        // ascending θ means descending cos θ
        let theta: Vec<f64> = x.iter().rev().map(|c| c.acos()).collect();
        let weights: Vec<f64> = wx.iter().rev().zip(&theta).map(|(w, t)| w / t.sin()).collect();
        RadialGrid { theta, weights }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn radius(&self, k: usize) -> f64 {
        (0.5 * self.theta[k]).tan()
    }

    /// Round-volume weight 2π² w_k sin³θ_k of node k.
    pub fn volume_weight(&self, k: usize) -> f64 {
        2.0 * PI * PI * self.weights[k] * self.theta[k].sin().powi(3)
    }

    /// ∫_{S⁴} g dV_ḡ for g depending on r only.
    pub fn integrate<F: Fn(f64) -> f64 + Sync>(&self, g: F) -> f64 {
        let parts: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|k| self.volume_weight(k) * g(self.radius(k)))
            .collect();
        pairwise_sum(&parts)
    }

    pub fn descriptor(&self) -> String {
        format!("radial-gl{}", self.len())
    }
}

/// Product quadrature on S⁴: the polar rule of [`RadialGrid`] × Hopf coordinates (v = sin²η, φ₁, φ₂) on S³.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereGrid {
    pub n_theta: usize,
    pub n_v: usize,
    pub n_phi: usize,
    theta: Vec<f64>,
    w_theta: Vec<f64>,
    v: Vec<f64>,
    w_v: Vec<f64>,
}

impl SphereGrid {
    pub fn new(n_theta: usize, n_v: usize, n_phi: usize) -> Self {
        let RadialGrid { theta, weights: w_theta } = RadialGrid::new(n_theta);
        let (v, w_v) = gauss_legendre_on(n_v, 0.0, 1.0);
        SphereGrid { n_theta, n_v, n_phi, theta, w_theta, v, w_v }
    }

    /// Three quarters of the nodes in each direction, for residual estimates.
    pub fn coarsened(&self) -> SphereGrid {
        let c = |n: usize| (3 * n / 4).max(2);
        SphereGrid::new(c(self.n_theta), c(self.n_v), c(self.n_phi))
    }

    pub fn node_count(&self) -> usize {
        self.n_theta * self.n_v * self.n_phi * self.n_phi
    }

    fn sphere3_point(&self, iv: usize, a: usize, b: usize) -> Quaternion {
        let v = self.v[iv];
        let dphi = 2.0 * PI / self.n_phi as f64;
        let (p1, p2) = (a as f64 * dphi, b as f64 * dphi);
        let (c, s) = ((1.0 - v).sqrt(), v.sqrt());
        Quaternion::new(c * p1.cos(), c * p1.sin(), s * p2.cos(), s * p2.sin())
    }

    /// ∫_{S⁴} g(ζ) dV_ḡ; the sum over nodes is ordered and reproducible.
    pub fn integrate<F: Fn(Quaternion) -> f64 + Sync>(&self, g: F) -> f64 {
        let dphi = 2.0 * PI / self.n_phi as f64;
        let parts: Vec<f64> = (0..self.n_theta)
            .into_par_iter()
            .map(|it| {
                let th = self.theta[it];
                let r = (0.5 * th).tan();
                let wt = self.w_theta[it] * th.sin().powi(3);
                let mut inner = Vec::with_capacity(self.n_v * self.n_phi * self.n_phi);
                for iv in 0..self.n_v {
                    for a in 0..self.n_phi {
                        for b in 0..self.n_phi {
                            let z = self.sphere3_point(iv, a, b).scale(r);
                            inner.push(self.w_v[iv] * g(z));
                        }
                    }
                }
                wt * pairwise_sum(&inner) * 0.5 * dphi * dphi
            })
            .collect();
        pairwise_sum(&parts)
    }

    pub fn descriptor(&self) -> String {
        format!("sphere-gl{}x{}x{}x{}", self.n_theta, self.n_v, self.n_phi, self.n_phi)
    }
}

impl Default for SphereGrid {
    fn default() -> Self {
        SphereGrid::new(40, 20, 24)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_exact_for_polynomials() {
        let (x, w) = gauss_legendre(7);
        for deg in 0..14 {
            let q: f64 = x.iter().zip(&w).map(|(t, wt)| wt * t.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn sphere_volume() {
        let vol = 8.0 * PI * PI / 3.0;
        let g = RadialGrid::new(64);
        assert!((g.integrate(|_| 1.0) / vol - 1.0).abs() < 1e-12);
        let s = SphereGrid::new(12, 6, 8);
        assert!((s.integrate(|_| 1.0) / vol - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_grid_moments() {
        // ∫ ζ₁² (1+|ζ|²)^{-2}·16(1+|ζ|²)^{-4} d⁴ζ agrees with the radial rule divided by 4
        let s = SphereGrid::new(32, 12, 12);
        let g = RadialGrid::new(64);
        let a = s.integrate(|z| z.w * z.w / (1.0 + z.norm2()).powi(2));
        let b = g.integrate(|r| r * r / (1.0 + r * r).powi(2)) / 4.0;
        assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
    }
}
