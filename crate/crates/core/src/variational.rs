//! First and second variation of YM_{α,λ}: the gradient with its D*F, Θ₁ and
//! Θ₂ parts, the Jacobi operator, the moduli directions of the basic
//! connection, the polarization and commutator identities, and the Poincaré
//! and Morrey diagnostics.
//!
//! All 1-forms are returned in chart components, the layout of
//! [`GaugePotential`]. With ḡ = φ²δ in four dimensions the round divergence of
//! a 2-form is φ⁻² times the flat one, so the covariant operators are the flat
//! chart operators rescaled; the Levi-Civita terms only appear in the rough
//! Laplacian of the Bochner form and in the Poincaré diagnostics.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GaugeError, Result};
use crate::forms::{conformal_factor, CurvatureField, GaugePotential, PAIRS};
use crate::gauge::{adhm_curvature, ConnectionModel, LatticeConnection};
use crate::lattice::Lattice4D;
use crate::quadrature::{gauss_legendre_on, pairwise_sum};
use crate::quaternion::{bracket, ImQuaternion, Quaternion};
use crate::sphere::{chi_lambda, round_weight, ChartPoint};

/// A general (not necessarily antisymmetric) Im ℍ-valued 2-tensor T[k][i].
pub type Tensor2 = [[ImQuaternion; 4]; 4];

trait Linear: Copy + Send + Sync {
    fn zero() -> Self;
    fn axpy(&mut self, c: f64, o: &Self);
}

impl Linear for f64 {
    fn zero() -> Self {
        0.0
    }
    fn axpy(&mut self, c: f64, o: &Self) {
        *self += c * o;
    }
}

impl Linear for ImQuaternion {
    fn zero() -> Self {
        ImQuaternion::ZERO
    }
    fn axpy(&mut self, c: f64, o: &Self) {
        *self += *o * c;
    }
}

impl Linear for GaugePotential {
    fn zero() -> Self {
        GaugePotential::ZERO
    }
    fn axpy(&mut self, c: f64, o: &Self) {
        for i in 0..4 {
            self.0[i] += o.0[i] * c;
        }
    }
}

impl Linear for Tensor2 {
    fn zero() -> Self {
        [[ImQuaternion::ZERO; 4]; 4]
    }
    fn axpy(&mut self, c: f64, o: &Self) {
        for k in 0..4 {
            for i in 0..4 {
                self[k][i] += o[k][i] * c;
            }
        }
    }
}

impl Linear for CurvatureField {
    fn zero() -> Self {
        CurvatureField::ZERO
    }
    fn axpy(&mut self, c: f64, o: &Self) {
        self.0.axpy(c, &o.0);
    }
}

/// Lattice first derivative along `axis` of a field given node by node.
fn lattice_d<T: Linear>(lat: &Lattice4D, order: usize, idx: usize, axis: usize, f: impl Fn(usize) -> Result<T>) -> Result<T> {
    let st = lat.stencil(idx, axis, order)?;
    let mut acc = T::zero();
    for &(k, c) in st.taps() {
        acc.axpy(c, &f(k)?);
    }
    Ok(acc)
}

/// Fourth-order centered derivative along `axis` of a function of the chart point.
fn point_d<T: Linear>(z: Quaternion, axis: usize, h: f64, f: &impl Fn(Quaternion) -> Result<T>) -> Result<T> {
    let e = Quaternion::basis(axis).scale(h);
    let mut acc = T::zero();
    for (off, c) in [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)] {
        acc.axpy(c / (12.0 * h), &f(z + e.scale(off))?);
    }
    Ok(acc)
}

/// ω_i = ∂_i log φ.
fn log_phi_gradient(z: Quaternion) -> [f64; 4] {
    let s = z.norm2();
    z.to_array().map(|x| -2.0 * x / (1.0 + s))
}

/// Christoffel symbols Γ^m_{ki} of ḡ = φ²δ, indexed [m][k][i].
fn christoffel(z: Quaternion) -> [[[f64; 4]; 4]; 4] {
    let w = log_phi_gradient(z);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    std::array::from_fn(|m| std::array::from_fn(|k| std::array::from_fn(|i| d(m, k) * w[i] + d(m, i) * w[k] - d(k, i) * w[m])))
}

/// ∂_i log χ_λ.
pub fn grad_log_chi(z: Quaternion, lambda: f64) -> [f64; 4] {
    let s = z.norm2();
    let l2 = lambda * lambda;
    let c = 8.0 * (l2 / (1.0 + l2 * s) - 1.0 / (1.0 + s));
    z.to_array().map(|x| c * x)
}

/// Active nodes at least `depth` nodes away from the cube faces.
pub fn interior_nodes(lat: &Lattice4D, depth: usize) -> Vec<usize> {
    (0..lat.len()).filter(|&k| lat.depth(k) >= depth && lat.is_active(k)).collect()
}

/// Round L² inner product ∫⟨a, b⟩_ḡ dV_ḡ of two lattice 1-forms over `nodes`.
pub fn inner_round(lat: &Lattice4D, nodes: &[usize], a: &[GaugePotential], b: &[GaugePotential]) -> f64 {
    let h4 = lat.spacing().powi(4);
    let parts: Vec<f64> = nodes
        .iter()
        .map(|&n| {
            let phi = conformal_factor(lat.coord(n));
            h4 * phi * phi * a[n].dot_flat(&b[n])
        })
        .collect();
    pairwise_sum(&parts)
}

pub fn norm_round(lat: &Lattice4D, nodes: &[usize], a: &[GaugePotential]) -> f64 {
    inner_round(lat, nodes, a, a).sqrt()
}

/// Evaluates a per-node 1-form operator over `nodes`, writing zero elsewhere.
pub fn apply_on(
    lat: &Lattice4D,
    nodes: &[usize],
    op: impl Fn(usize) -> Result<GaugePotential> + Sync,
) -> Result<Vec<GaugePotential>> {
    let vals: Result<Vec<GaugePotential>> = nodes.par_iter().map(|&n| op(n)).collect();
    let mut out = vec![GaugePotential::ZERO; lat.len()];
    for (&n, v) in nodes.iter().zip(vals?) {
        out[n] = v;
    }
    Ok(out)
}

/// Gauge-covariant chart derivative D_kΞ_i = ∂_kΞ_i + [Γ_k, Ξ_i], indexed [k][i].
pub fn covariant_derivative(lc: &LatticeConnection, xi: &[GaugePotential], idx: usize) -> Result<Tensor2> {
    let g = &lc.values[idx].0;
    let mut t = [[ImQuaternion::ZERO; 4]; 4];
    for (k, row) in t.iter_mut().enumerate() {
        let d = lattice_d(&lc.lattice, lc.order, idx, k, |n| Ok(xi[n]))?;
        for i in 0..4 {
            row[i] = d.0[i] + bracket(g[k], xi[idx].0[i]);
        }
    }
    Ok(t)
}

/// (D_∇Ξ)_{ki} = D_kΞ_i − D_iΞ_k.
pub fn exterior_covariant(lc: &LatticeConnection, xi: &[GaugePotential], idx: usize) -> Result<CurvatureField> {
    let t = covariant_derivative(lc, xi, idx)?;
    Ok(CurvatureField::from_upper(PAIRS.map(|(k, i)| t[k][i] - t[i][k])))
}

/// Flat chart divergence (D*B)_j = −Σ_i (∂_iB_ij + [Γ_i, B_ij]) of a 2-form given node by node.
pub fn divergence_two_form(
    lc: &LatticeConnection,
    idx: usize,
    b: impl Fn(usize) -> Result<CurvatureField>,
) -> Result<GaugePotential> {
    let g = &lc.values[idx].0;
    let here = b(idx)?;
    let mut out = GaugePotential::ZERO;
    for i in 0..4 {
        let d = lattice_d(&lc.lattice, lc.order, idx, i, &b)?;
        for j in 0..4 {
            out.0[j] -= d.0[i][j] + bracket(g[i], here.0[i][j]);
        }
    }
    Ok(out)
}

/// Round D*F at a lattice node, chart components.
pub fn dstar_f_lattice(lc: &LatticeConnection, idx: usize) -> Result<GaugePotential> {
    let phi = conformal_factor(lc.lattice.coord(idx));
    Ok(divergence_two_form(lc, idx, |n| lc.curvature_at(n))?.scale(1.0 / (phi * phi)))
}

/// Round D*F of a model at a chart point, chart components, by fourth-order
/// differences of the curvature with step `h`. Lattice models use the lattice stencils.
pub fn dstar_f(c: &ConnectionModel, p: ChartPoint, h: f64) -> Result<GaugePotential> {
    if let ConnectionModel::Lattice(l) = c {
        let idx = l.lattice.locate(p.zeta).ok_or(GaugeError::StencilOutOfDomain(usize::MAX))?;
        return dstar_f_lattice(l, idx);
    }
    if !(h > 0.0) {
        return Err(GaugeError::InvalidParameter(format!("step {h}")));
    }
    let g = c.potential(p)?;
    let f = c.curvature(p)?;
    let curv = |z: Quaternion| c.curvature(ChartPoint::new(z));
    let mut out = GaugePotential::ZERO;
    for i in 0..4 {
        let d = point_d(p.zeta, i, h, &curv)?;
        for j in 0..4 {
            out.0[j] -= d.0[i][j] + bracket(g.0[i], f.0[i][j]);
        }
    }
    let phi = conformal_factor(p.zeta);
    Ok(out.scale(1.0 / (phi * phi)))
}

/// Round L² norm of D*F over nodes deep enough for the nested stencils and
/// with |ζ|_∞ ≤ `within`.
pub fn dstar_f_norm(lc: &LatticeConnection, within: f64) -> Result<f64> {
    let lat = &lc.lattice;
    let reach = Lattice4D::reach(lc.order);
    let nodes: Vec<usize> = interior_nodes(lat, 2 * reach)
        .into_iter()
        .filter(|&n| {
            let z = lat.coord(n) - lat.center;
            z.to_array().iter().all(|x| x.abs() <= within + 1e-12)
        })
        .collect();
    let d = apply_on(lat, &nodes, |n| dstar_f_lattice(lc, n))?;
    Ok(norm_round(lat, &nodes, &d))
}

/// Grad YM_{α,λ} at one point, split into its parts.
///
/// `total = prefactor·(dstar_f + theta1 + theta2)` with prefactor 2α(3+χ_λ|F|²_ḡ)^{α−1};
/// the round L² pairing ∫⟨total, a⟩_ḡ dV_ḡ is the derivative of YM_{α,λ} along a.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientField {
    pub dstar_f: GaugePotential,
    pub theta1: GaugePotential,
    pub theta2: GaugePotential,
    pub prefactor: f64,
    pub total: GaugePotential,
}

fn assemble_gradient(
    z: Quaternion,
    alpha: f64,
    lambda: f64,
    gamma: &GaugePotential,
    f: &CurvatureField,
    df: &[CurvatureField; 4],
    dnorm: [f64; 4],
) -> GradientField {
    let phi2 = conformal_factor(z).powi(2);
    let p = ChartPoint::new(z);
    let n2 = f.norm2_round(z);
    let chi = chi_lambda(p, lambda);
    let big_p = 3.0 + chi * n2;
    let coef = -(alpha - 1.0) * chi / big_p / phi2;
    let dlog = grad_log_chi(z, lambda);
    let mut dstar = GaugePotential::ZERO;
    let mut theta1 = GaugePotential::ZERO;
    let mut theta2 = GaugePotential::ZERO;
    for j in 0..4 {
        for i in 0..4 {
            dstar.0[j] -= (df[i].0[i][j] + bracket(gamma.0[i], f.0[i][j])) * (1.0 / phi2);
            theta1.0[j] += f.0[i][j] * (coef * dnorm[i]);
            theta2.0[j] += f.0[i][j] * (coef * n2 * dlog[i]);
        }
    }
    let prefactor = 2.0 * alpha * big_p.powf(alpha - 1.0);
    let total = dstar.add(&theta1).add(&theta2).scale(prefactor);
    GradientField { dstar_f: dstar, theta1, theta2, prefactor, total }
}

/// Gradient of YM_{α,λ} for an analytic model at a chart point; derivatives of the
/// curvature by fourth-order differences with step `h`.
pub fn gradient_ym_alpha_lambda(c: &ConnectionModel, alpha: f64, lambda: f64, p: ChartPoint, h: f64) -> Result<GradientField> {
    crate::energy::check_alpha_lambda(alpha, lambda)?;
    if let ConnectionModel::Lattice(l) = c {
        let idx = l.lattice.locate(p.zeta).ok_or(GaugeError::StencilOutOfDomain(usize::MAX))?;
        return gradient_lattice(l, alpha, lambda, idx);
    }
    let curv = |z: Quaternion| c.curvature(ChartPoint::new(z));
    let dens = |z: Quaternion| Ok(c.curvature(ChartPoint::new(z))?.norm2_round(z));
    let mut df = [CurvatureField::ZERO; 4];
    let mut dn = [0.0; 4];
    for i in 0..4 {
        df[i] = point_d(p.zeta, i, h, &curv)?;
        dn[i] = point_d(p.zeta, i, h, &dens)?;
    }
    Ok(assemble_gradient(p.zeta, alpha, lambda, &c.potential(p)?, &c.curvature(p)?, &df, dn))
}

/// Gradient of YM_{α,λ} at a lattice node, all derivatives by the lattice stencils.
pub fn gradient_lattice(lc: &LatticeConnection, alpha: f64, lambda: f64, idx: usize) -> Result<GradientField> {
    crate::energy::check_alpha_lambda(alpha, lambda)?;
    let lat = &lc.lattice;
    let mut df = [CurvatureField::ZERO; 4];
    let mut dn = [0.0; 4];
    for i in 0..4 {
        let st = lat.stencil(idx, i, lc.order)?;
        for &(n, c) in st.taps() {
            let f = lc.curvature_at(n)?;
            df[i].axpy(c, &f);
            dn[i] += c * f.norm2_round(lat.coord(n));
        }
    }
    Ok(assemble_gradient(lat.coord(idx), alpha, lambda, &lc.values[idx], &lc.curvature_at(idx)?, &df, dn))
}

fn energy_density_at(lc: &LatticeConnection, alpha: f64, lambda: f64, idx: usize) -> Result<f64> {
    let z = lc.lattice.coord(idx);
    let p = ChartPoint::new(z);
    let chi = chi_lambda(p, lambda);
    let n2 = lc.curvature_at(idx)?.norm2_round(z);
    Ok(round_weight(p) * 0.5 * (3.0 + chi * n2).powf(alpha) / chi)
}

/// Discretized YM_{α,λ}: Σ h⁴·½(3+χ_λ|F_h|²_ḡ)^α χ_λ⁻¹ φ⁴ over active nodes at depth ≥ stencil reach.
pub fn discrete_energy(lc: &LatticeConnection, alpha: f64, lambda: f64) -> Result<f64> {
    crate::energy::check_alpha_lambda(alpha, lambda)?;
    let lat = &lc.lattice;
    let h4 = lat.spacing().powi(4);
    let nodes = interior_nodes(lat, Lattice4D::reach(lc.order));
    let parts: Result<Vec<f64>> = nodes.par_iter().map(|&n| Ok(h4 * energy_density_at(lc, alpha, lambda, n)?)).collect();
    Ok(pairwise_sum(&parts?))
}

/// Comparison of the analytic gradient against centered differences of [`discrete_energy`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub nodes: usize,
    pub analytic_norm: f64,
    pub relative_error: f64,
}

/// Perturbs each chart component at the sampled nodes by ±`eps` and differences the
/// energy of the affected nodes only. The sampled nodes must sit at depth ≥ 2·reach.
pub fn gradient_fd_check(lc: &LatticeConnection, alpha: f64, lambda: f64, samples: &[usize], eps: f64) -> Result<GradientCheck> {
    let lat = &lc.lattice;
    let reach = Lattice4D::reach(lc.order);
    let h4 = lat.spacing().powi(4);
    let in_sum = |n: usize| lat.depth(n) >= reach && lat.is_active(n);
    let mut work = lc.clone();
    let (mut diff2, mut ref2) = (0.0, 0.0);
    for &m in samples {
        if lat.depth(m) < 2 * reach || !lat.is_active(m) {
            return Err(GaugeError::StencilOutOfDomain(m));
        }
        let mut affected = vec![m];
        for axis in 0..4 {
            for off in 1..=reach as isize {
                for s in [-off, off] {
                    if let Some(n) = lat.neighbor(m, axis, s) {
                        affected.push(n);
                    }
                }
            }
        }
        affected.retain(|&n| in_sum(n));
        let g = gradient_lattice(lc, alpha, lambda, m)?;
        let phi2 = conformal_factor(lat.coord(m)).powi(2);
        let flat = g.total.scale(phi2 * h4);
        for i in 0..4 {
            for comp in 0..3 {
                let base = work.values[m].0[i];
                let mut local = |delta: f64| -> Result<f64> {
                    let mut a = base.to_array();
                    a[comp] += delta;
                    work.values[m].0[i] = ImQuaternion::from_array(a);
                    let mut e = 0.0;
                    for &n in &affected {
                        e += h4 * energy_density_at(&work, alpha, lambda, n)?;
                    }
                    Ok(e)
                };
                let fd = (local(eps)? - local(-eps)?) / (2.0 * eps);
                work.values[m].0[i] = base;
                let an = flat.0[i].to_array()[comp];
                diff2 += (an - fd).powi(2);
                ref2 += fd * fd;
            }
        }
    }
    if ref2 == 0.0 {
        return Err(GaugeError::ZeroField);
    }
    Ok(GradientCheck { nodes: samples.len(), analytic_norm: ref2.sqrt(), relative_error: (diff2 / ref2).sqrt() })
}

/// 𝒥(Ξ) = −D*DΞ − [F_ki, Ξ_k] at a lattice node, round chart components.
pub fn jacobi_apply(lc: &LatticeConnection, xi: &[GaugePotential], idx: usize) -> Result<GaugePotential> {
    let phi2 = conformal_factor(lc.lattice.coord(idx)).powi(2);
    let f = lc.curvature_at(idx)?;
    let mut out = divergence_two_form(lc, idx, |n| exterior_covariant(lc, xi, n))?.scale(-1.0);
    for i in 0..4 {
        for k in 0..4 {
            out.0[i] -= bracket(f.0[k][i], xi[idx].0[k]);
        }
    }
    Ok(out.scale(1.0 / phi2))
}

/// ∇_kΞ_i with the Levi-Civita connection of ḡ and the gauge connection, indexed [k][i].
pub fn nabla_one_form(lc: &LatticeConnection, xi: &[GaugePotential], idx: usize) -> Result<Tensor2> {
    let mut t = covariant_derivative(lc, xi, idx)?;
    let gam = christoffel(lc.lattice.coord(idx));
    let x = &xi[idx].0;
    for k in 0..4 {
        for i in 0..4 {
            for m in 0..4 {
                t[k][i] -= x[m] * gam[m][k][i];
            }
        }
    }
    Ok(t)
}

/// ∇_l T_{ki} of a 2-tensor field given node by node, indexed [l][k][i].
fn nabla_two_tensor(lc: &LatticeConnection, idx: usize, t: impl Fn(usize) -> Result<Tensor2>) -> Result<[Tensor2; 4]> {
    let g = &lc.values[idx].0;
    let gam = christoffel(lc.lattice.coord(idx));
    let here = t(idx)?;
    let mut out = [<Tensor2 as Linear>::zero(); 4];
    for l in 0..4 {
        let d = lattice_d(&lc.lattice, lc.order, idx, l, &t)?;
        for k in 0..4 {
            for i in 0..4 {
                let mut v = d[k][i] + bracket(g[l], here[k][i]);
                for m in 0..4 {
                    v -= here[m][i] * gam[m][l][k] + here[k][m] * gam[m][l][i];
                }
                out[l][k][i] = v;
            }
        }
    }
    Ok(out)
}

/// The Bochner form ΔΞ + DD*Ξ − 3Ξ − 2[F_ki, Ξ^k] of the Jacobi operator at a lattice node.
pub fn jacobi_apply_bochner(lc: &LatticeConnection, xi: &[GaugePotential], idx: usize) -> Result<GaugePotential> {
    let lat = &lc.lattice;
    let phi2 = conformal_factor(lat.coord(idx)).powi(2);
    let hess = nabla_two_tensor(lc, idx, |n| nabla_one_form(lc, xi, n))?;
    let div = |n: usize| -> Result<ImQuaternion> {
        let t = nabla_one_form(lc, xi, n)?;
        let p2 = conformal_factor(lat.coord(n)).powi(2);
        Ok((t[0][0] + t[1][1] + t[2][2] + t[3][3]) * (-1.0 / p2))
    };
    let psi = div(idx)?;
    let f = lc.curvature_at(idx)?;
    let g = &lc.values[idx].0;
    let x = &xi[idx].0;
    let mut out = GaugePotential::ZERO;
    for i in 0..4 {
        let d_psi = lattice_d(lat, lc.order, idx, i, div)? + bracket(g[i], psi);
        let mut lap = ImQuaternion::ZERO;
        let mut comm = ImQuaternion::ZERO;
        for k in 0..4 {
            lap += hess[k][k][i];
            comm += bracket(f.0[k][i], x[k]);
        }
        out.0[i] = lap * (1.0 / phi2) + d_psi - x[i] * 3.0 - comm * (2.0 / phi2);
    }
    Ok(out)
}

/// Stencil order for the Jacobi operator on moduli directions: its nested
/// second derivatives need order 8 to resolve the instanton at the default spacing.
pub const JACOBI_ORDER: usize = 8;

/// Five L²-orthonormal Jacobi-kernel directions of the basic connection on a lattice.
///
/// Member k is ι_X F̃ for the conformal gradient fields X = ζ (dilation) and
/// X = ½(1+|ζ|²)e_k − ζ_kζ (the round-gradient field that moves the center
/// along e_k). Both X are ḡ-gradients, so ι_X F̃ satisfies D*_∇̃ b = 0 exactly,
/// and each equals the (λ, ξ) derivative of the instanton family up to an
/// infinitesimal gauge transformation and a rotation.
#[derive(Clone, Debug, PartialEq)]
pub struct ModuliBasis {
    pub lattice: Lattice4D,
    pub nodes: Vec<usize>,
    pub members: Vec<Vec<GaugePotential>>,
}

/// ι_X F̃ for the dilation field (k = 0) or the center-moving field along e_{k−1}.
pub fn moduli_direction(k: usize, zeta: Quaternion) -> GaugePotential {
    let z = zeta.to_array();
    let s = zeta.norm2();
    let x: [f64; 4] = match k {
        0 => z,
        _ => std::array::from_fn(|i| {
            let e = if i == k - 1 { 0.5 * (1.0 + s) } else { 0.0 };
            e - z[k - 1] * z[i]
        }),
    };
    let f = adhm_curvature(Quaternion::ZERO, 1.0, ChartPoint::new(zeta));
    let mut b = GaugePotential::ZERO;
    for j in 0..4 {
        for i in 0..4 {
            b.0[j] += f.0[i][j] * x[i];
        }
    }
    b
}

impl ModuliBasis {
    /// Samples the five directions and orthonormalizes them (Gram–Schmidt, twice) in
    /// the round L² product over `nodes`.
    pub fn new(lattice: &Lattice4D, nodes: Vec<usize>) -> Result<Self> {
        let mut members: Vec<Vec<GaugePotential>> = (0..5)
            .map(|k| (0..lattice.len()).into_par_iter().map(|n| moduli_direction(k, lattice.coord(n))).collect())
            .collect();
        for _ in 0..2 {
            for k in 0..members.len() {
                for j in 0..k {
                    let c = inner_round(lattice, &nodes, &members[k], &members[j]);
                    let (head, tail) = members.split_at_mut(k);
                    for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                        *a = a.sub(&b.scale(c));
                    }
                }
                let nrm = norm_round(lattice, &nodes, &members[k]);
                if !(nrm > 0.0) {
                    return Err(GaugeError::ZeroField);
                }
                for a in members[k].iter_mut() {
                    *a = a.scale(1.0 / nrm);
                }
            }
        }
        Ok(ModuliBasis { lattice: lattice.clone(), nodes, members })
    }

    pub fn gram_matrix(&self) -> Vec<Vec<f64>> {
        self.members
            .iter()
            .map(|a| self.members.iter().map(|b| inner_round(&self.lattice, &self.nodes, a, b)).collect())
            .collect()
    }

    /// Relative residuals ‖𝒥b_k‖/‖b_k‖ over the basis nodes for a sampled basic connection.
    pub fn jacobi_residuals(&self, basic: &LatticeConnection) -> Result<Vec<f64>> {
        self.members
            .iter()
            .map(|b| {
                let j = apply_on(&self.lattice, &self.nodes, |n| jacobi_apply(basic, b, n))?;
                Ok(norm_round(&self.lattice, &self.nodes, &j) / norm_round(&self.lattice, &self.nodes, b))
            })
            .collect()
    }

    /// Round D*_∇̃ b_k norms relative to ‖b_k‖, the Coulomb condition on the basis.
    pub fn gauge_residuals(&self, basic: &LatticeConnection) -> Result<Vec<f64>> {
        let lat = &self.lattice;
        self.members
            .iter()
            .map(|b| {
                let mut parts = Vec::with_capacity(self.nodes.len());
                for &n in &self.nodes {
                    let t = nabla_one_form(basic, b, n)?;
                    let p2 = conformal_factor(lat.coord(n)).powi(2);
                    let d = (t[0][0] + t[1][1] + t[2][2] + t[3][3]) * (1.0 / p2);
                    parts.push(lat.weight(n) * d.norm2());
                }
                Ok(pairwise_sum(&parts).sqrt() / norm_round(lat, &self.nodes, b))
            })
            .collect()
    }
}

/// Orthogonal projection Σ_k ⟨Ξ, b_k⟩ b_k onto the moduli directions.
pub fn kernel_project(xi: &[GaugePotential], basis: &ModuliBasis) -> Vec<GaugePotential> {
    let mut out = vec![GaugePotential::ZERO; xi.len()];
    for b in &basis.members {
        let c = inner_round(&basis.lattice, &basis.nodes, xi, b);
        for (o, v) in out.iter_mut().zip(b) {
            o.axpy(c, v);
        }
    }
    out
}

/// Sup-norm residuals of the curvature and D*F polarization identities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolarizationResiduals {
    pub curvature: f64,
    pub dstar_f: f64,
}

/// F₁ − F₂ − (D₂Υ + [Υ∧Υ]) with Υ = Γ₁ − Γ₂, from the curvatures, Υ and ∂Υ.
fn curvature_polarization(f1: &CurvatureField, f2: &CurvatureField, g2: &GaugePotential, u: &GaugePotential, du: &Tensor2) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, j) in PAIRS {
        let d2 = |a: usize, b: usize| du[a][b] + bracket(g2.0[a], u.0[b]);
        let rhs = d2(i, j) - d2(j, i) + bracket(u.0[i], u.0[j]);
        worst = worst.max((f1.0[i][j] - f2.0[i][j] - rhs).norm());
    }
    worst
}

/// Flat-chart right side of the D*F polarization identity for −(D*F₁ − D*F₂)_i:
/// D_kD_kΥ_i − D_iD_kΥ_k + 2[Υ_k, F₂_ki] + [D_kΥ_k, Υ_i] + 2[Υ_k, D_kΥ_i] − [Υ_k, D_iΥ_k] + [Υ_k, [Υ_k, Υ_i]].
/// In the flat chart metric the curvature term of the sphere is absent; the round
/// version of both sides carries the same factor φ⁻².
fn dstar_polarization_rhs(u: &GaugePotential, du: &Tensor2, ddu: &[Tensor2; 4], f2: &CurvatureField) -> GaugePotential {
    let mut out = GaugePotential::ZERO;
    let div: ImQuaternion = (0..4).fold(ImQuaternion::ZERO, |a, k| a + du[k][k]);
    for i in 0..4 {
        let mut v = ImQuaternion::ZERO;
        for k in 0..4 {
            v += ddu[k][k][i] - ddu[i][k][k];
            v += bracket(u.0[k], f2.0[k][i]) * 2.0;
            v += bracket(u.0[k], du[k][i]) * 2.0 - bracket(u.0[k], du[i][k]);
            v += bracket(u.0[k], bracket(u.0[k], u.0[i]));
        }
        v += bracket(div, u.0[i]);
        out.0[i] = v;
    }
    out
}

/// Polarization residuals of two analytic models at the given chart points; first
/// derivatives with step `h`, second derivatives by nesting the same rule.
pub fn polarization_residuals(c1: &ConnectionModel, c2: &ConnectionModel, points: &[ChartPoint], h: f64) -> Result<PolarizationResiduals> {
    let mut res = PolarizationResiduals::default();
    // D²_kΥ_i as a function of the point, for the nested derivative
    let cov = |z: Quaternion| -> Result<Tensor2> {
        let p = ChartPoint::new(z);
        let g2 = c2.potential(p)?;
        let u = c1.potential(p)?.sub(&g2);
        let mut t = [[ImQuaternion::ZERO; 4]; 4];
        for k in 0..4 {
            let du = point_d(z, k, h, &|w: Quaternion| Ok(c1.potential(ChartPoint::new(w))?.sub(&c2.potential(ChartPoint::new(w))?)))?;
            for i in 0..4 {
                t[k][i] = du.0[i] + bracket(g2.0[k], u.0[i]);
            }
        }
        Ok(t)
    };
    for &p in points {
        let g2 = c2.potential(p)?;
        let u = c1.potential(p)?.sub(&g2);
        let (f1, f2) = (c1.curvature(p)?, c2.curvature(p)?);
        let mut du = [[ImQuaternion::ZERO; 4]; 4];
        for k in 0..4 {
            let d = point_d(p.zeta, k, h, &|w: Quaternion| Ok(c1.potential(ChartPoint::new(w))?.sub(&c2.potential(ChartPoint::new(w))?)))?;
            du[k] = d.0;
        }
        res.curvature = res.curvature.max(curvature_polarization(&f1, &f2, &g2, &u, &du));

        // D_l(D_kΥ_i) = ∂_l(D_kΥ_i) + [Γ₂_l, D_kΥ_i], indexed [l][k][i]
        let t = cov(p.zeta)?;
        let mut ddu = [<Tensor2 as Linear>::zero(); 4];
        for l in 0..4 {
            let d = point_d(p.zeta, l, h, &cov)?;
            for k in 0..4 {
                for i in 0..4 {
                    ddu[l][k][i] = d[k][i] + bracket(g2.0[l], t[k][i]);
                }
            }
        }
        let rhs = dstar_polarization_rhs(&u, &t, &ddu, &f2);
        let lhs = dstar_f(c1, p, h)?.sub(&dstar_f(c2, p, h)?);
        let phi2 = conformal_factor(p.zeta).powi(2);
        let r = lhs.add(&rhs.scale(1.0 / phi2));
        res.dstar_f = res.dstar_f.max(r.0.iter().map(|a| a.norm()).fold(0.0, f64::max));
    }
    Ok(res)
}

/// Polarization residuals of two connections sampled on the same lattice, over `nodes`
/// (depth ≥ 2·reach). Derivatives use the lattice stencils throughout.
pub fn polarization_residuals_lattice(l1: &LatticeConnection, l2: &LatticeConnection, nodes: &[usize]) -> Result<PolarizationResiduals> {
    if l1.lattice != l2.lattice || l1.order != l2.order {
        return Err(GaugeError::InvalidParameter("connections live on different lattices".into()));
    }
    let lat = &l1.lattice;
    let ups: Vec<GaugePotential> = l1.values.iter().zip(&l2.values).map(|(a, b)| a.sub(b)).collect();
    let per_node: Result<Vec<PolarizationResiduals>> = nodes
        .par_iter()
        .map(|&n| {
            let (f1, f2) = (l1.curvature_at(n)?, l2.curvature_at(n)?);
            let g2 = &l2.values[n];
            let u = &ups[n];
            let mut du = [[ImQuaternion::ZERO; 4]; 4];
            for k in 0..4 {
                du[k] = lattice_d(lat, l1.order, n, k, |m| Ok(ups[m]))?.0;
            }
            let curvature = curvature_polarization(&f1, &f2, g2, u, &du);
            let t = covariant_derivative(l2, &ups, n)?;
            let mut ddu = [<Tensor2 as Linear>::zero(); 4];
            for l in 0..4 {
                let d = lattice_d(lat, l1.order, n, l, |m| covariant_derivative(l2, &ups, m))?;
                for k in 0..4 {
                    for i in 0..4 {
                        ddu[l][k][i] = d[k][i] + bracket(g2.0[l], t[k][i]);
                    }
                }
            }
            let rhs = dstar_polarization_rhs(u, &t, &ddu, &f2);
            let lhs = dstar_f_lattice(l1, n)?.sub(&dstar_f_lattice(l2, n)?);
            let phi2 = conformal_factor(lat.coord(n)).powi(2);
            let r = lhs.add(&rhs.scale(1.0 / phi2));
            Ok(PolarizationResiduals { curvature, dstar_f: r.0.iter().map(|a| a.norm()).fold(0.0, f64::max) })
        })
        .collect();
    Ok(per_node?.into_iter().fold(PolarizationResiduals::default(), |a, b| PolarizationResiduals {
        curvature: a.curvature.max(b.curvature),
        dstar_f: a.dstar_f.max(b.dstar_f),
    }))
}

/// Largest values of ⟨F̃_ij, [A_i, A_j]⟩_ḡ − |A|²_ḡ and ⟨F̃_ij, [B_ki, B_kj]⟩_ḡ − 4|B|²_ḡ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorMargins {
    pub one_form: f64,
    pub two_tensor: f64,
}

/// Evaluates both commutator margins at every sample; A and B are given in chart
/// components at the matching points and paired with the basic curvature there.
pub fn commutator_bound_check(points: &[ChartPoint], a: &[GaugePotential], b: &[Tensor2]) -> CommutatorMargins {
    let mut m = CommutatorMargins { one_form: f64::NEG_INFINITY, two_tensor: f64::NEG_INFINITY };
    for (n, &p) in points.iter().enumerate() {
        let phi2 = conformal_factor(p.zeta).powi(2);
        let f = adhm_curvature(Quaternion::ZERO, 1.0, p);
        if let Some(a) = a.get(n) {
            let mut pair = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    pair += f.0[i][j].dot(bracket(a.0[i], a.0[j]));
                }
            }
            m.one_form = m.one_form.max(pair / (phi2 * phi2) - a.norm2_flat() / phi2);
        }
        if let Some(b) = b.get(n) {
            let (mut pair, mut nb) = (0.0, 0.0);
            for k in 0..4 {
                for i in 0..4 {
                    nb += b[k][i].norm2();
                    for j in 0..4 {
                        pair += f.0[i][j].dot(bracket(b[k][i], b[k][j]));
                    }
                }
            }
            m.two_tensor = m.two_tensor.max(pair / phi2.powi(3) - 4.0 * nb / (phi2 * phi2));
        }
    }
    m
}

/// (‖A‖/‖∇̃A‖, ‖∇̃A‖/‖∇̃²A‖) in round L² norms over `nodes`, with ∇̃ the basic
/// connection coupled to the Levi-Civita connection. `nodes` need depth ≥ 2·reach.
pub fn poincare_ratio(basic: &LatticeConnection, a: &[GaugePotential], nodes: &[usize]) -> Result<(f64, f64)> {
    let lat = &basic.lattice;
    let parts: Result<Vec<[f64; 3]>> = nodes
        .par_iter()
        .map(|&n| {
            let phi2 = conformal_factor(lat.coord(n)).powi(2);
            let w = lat.weight(n);
            let t = nabla_one_form(basic, a, n)?;
            let tt = nabla_two_tensor(basic, n, |m| nabla_one_form(basic, a, m))?;
            let n1: f64 = t.iter().flatten().map(|v| v.norm2()).sum();
            let n2: f64 = tt.iter().flatten().flatten().map(|v| v.norm2()).sum();
            Ok([w * a[n].norm2_flat() / phi2, w * n1 / (phi2 * phi2), w * n2 / phi2.powi(3)])
        })
        .collect();
    let parts = parts?;
    let sums: [f64; 3] = std::array::from_fn(|k| pairwise_sum(&parts.iter().map(|p| p[k]).collect::<Vec<_>>()).sqrt());
    if sums[0] == 0.0 {
        return Err(GaugeError::ZeroField);
    }
    Ok((sums[0] / sums[1], sums[1] / sums[2]))
}

/// Chart center and radius of the geodesic ball B_ρ(ζ₀); None if it reaches the north pole.
pub fn geodesic_ball_in_chart(center: Quaternion, rho: f64) -> Option<(Quaternion, f64)> {
    let r0 = center.norm();
    let a = r0.atan();
    if a + 0.5 * rho >= 0.5 * PI - 1e-12 {
        return None;
    }
    let (tp, tm) = ((a + 0.5 * rho).tan(), (a - 0.5 * rho).tan());
    let dir = if r0 > 0.0 { center.scale(1.0 / r0) } else { Quaternion::ONE };
    Some((dir.scale(0.5 * (tp + tm)), 0.5 * (tp - tm)))
}

/// ∫_{B_ρ(ζ₀)} g dV_ḡ over a geodesic ball, by Gauss–Legendre in the chart radius and
/// a Hopf-coordinate product rule on the direction sphere.
pub fn integrate_geodesic_ball(g: &(impl Fn(Quaternion) -> Result<f64> + Sync), center: Quaternion, rho: f64, n: usize) -> Result<f64> {
    let (c, rad) = geodesic_ball_in_chart(center, rho)
        .ok_or_else(|| GaugeError::InvalidParameter(format!("ball of radius {rho} reaches the pole")))?;
    let (rs, wr) = gauss_legendre_on(n, 0.0, rad);
    let (vs, wv) = gauss_legendre_on(n, 0.0, 1.0);
    let nphi = 2 * n;
    let dphi = 2.0 * PI / nphi as f64;
    let parts: Result<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|ir| {
            let r = rs[ir];
            let mut inner = Vec::with_capacity(n * nphi * nphi);
            for iv in 0..n {
                let (cv, sv) = ((1.0 - vs[iv]).sqrt(), vs[iv].sqrt());
                for a in 0..nphi {
                    for b in 0..nphi {
                        let (p1, p2) = (a as f64 * dphi, b as f64 * dphi);
                        let dir = Quaternion::new(cv * p1.cos(), cv * p1.sin(), sv * p2.cos(), sv * p2.sin());
                        let z = c + dir.scale(r);
                        inner.push(wv[iv] * g(z)? * round_weight(ChartPoint::new(z)));
                    }
                }
            }
            Ok(wr[ir] * r.powi(3) * pairwise_sum(&inner) * 0.5 * dphi * dphi)
        })
        .collect();
    Ok(pairwise_sum(&parts?))
}

/// max over the sampled balls of (ρ^{−lam_exp} ∫_{B_ρ(ζ₀)} |u|^p dV_ḡ)^{1/p}, with
/// `u` returning the pointwise norm |u|_ḡ.
pub fn morrey_norm(
    u: &(impl Fn(Quaternion) -> Result<f64> + Sync),
    p: f64,
    lam_exp: f64,
    balls: &[(Quaternion, f64)],
    nodes: usize,
) -> Result<f64> {
    if !(p >= 1.0) || !(lam_exp >= 0.0) {
        return Err(GaugeError::InvalidParameter(format!("Morrey exponents p={p}, lambda={lam_exp}")));
    }
    let mut best: f64 = 0.0;
    for &(c, rho) in balls {
        let i = integrate_geodesic_ball(&|z| Ok(u(z)?.abs().powf(p)), c, rho, nodes)?;
        best = best.max((rho.powf(-lam_exp) * i).powf(1.0 / p));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{perturb, pullback};
    use crate::random::{random_perturbation, random_potential, seeded_rng, uniform_ball, uniform_im};
    use crate::sphere::ConformalMap;

    fn cube(a: f64, n: usize) -> Lattice4D {
        Lattice4D::new(Quaternion::ZERO, a, n).unwrap()
    }

    fn perturbed_basic(seed: u64) -> ConnectionModel {
        let mut rng = seeded_rng(seed, 11);
        perturb(ConnectionModel::basic(), random_perturbation(&mut rng, 3, 0.3, 0.4, (0.45, 0.6)))
    }

    #[test]
    fn dstar_f_vanishes_for_instantons() {
        let mut rng = seeded_rng(1, 0);
        let h = 1e-2;
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let c = ConnectionModel::adhm(uniform_ball(&mut rng, 0.5), 0.8).unwrap();
            let p = ChartPoint::new(uniform_ball(&mut rng, 2.0));
            let d = dstar_f(&c, p, h).unwrap();
            worst = worst.max(d.0.iter().map(|a| a.norm()).fold(0.0, f64::max));
            assert_eq!(dstar_f(&ConnectionModel::Flat, p, h).unwrap(), GaugePotential::ZERO);
        }
        eprintln!("adhm dstar sup {worst:e}");
        assert!(worst <= 20.0 * h * h);
    }

    #[test]
    fn dstar_f_converges_at_second_order() {
        let mut norms = Vec::new();
        for n in [9, 17, 33] {
            let lc = LatticeConnection::sample(&ConnectionModel::basic(), &cube(1.0, n), 2).unwrap();
            norms.push(dstar_f_norm(&lc, 0.5).unwrap());
        }
        let order = (norms[1] / norms[2]).log2();
        eprintln!("dstar norms {norms:?} order {order}");
        assert!(order >= 1.9, "{norms:?}");
    }

    #[test]
    fn exterior_derivative_and_divergence_are_adjoint() {
        let lat = cube(1.5, 17);
        let lc = LatticeConnection::sample(&perturbed_basic(4), &lat, 2).unwrap();
        let mut rng = seeded_rng(5, 0);
        let a = random_perturbation(&mut rng, 2, 1.0, 0.3, (0.25, 0.3));
        let bumps: Vec<(Quaternion, [ImQuaternion; 6])> =
            (0..2).map(|_| (uniform_ball(&mut rng, 0.3), std::array::from_fn(|_| uniform_im(&mut rng, 1.0)))).collect();
        let af: Vec<GaugePotential> = (0..lat.len()).map(|n| a.value_and_derivative(lat.coord(n)).0).collect();
        let bf: Vec<CurvatureField> = (0..lat.len())
            .map(|n| {
                let z = lat.coord(n);
                let mut u = [ImQuaternion::ZERO; 6];
                for (c, v) in &bumps {
                    let g = (-(z - *c).norm2() / 0.09).exp();
                    for k in 0..6 {
                        u[k] += v[k] * g;
                    }
                }
                CurvatureField::from_upper(u)
            })
            .collect();
        let nodes = interior_nodes(&lat, 1);
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for &n in &nodes {
            lhs += 0.5 * exterior_covariant(&lc, &af, n).unwrap().dot_flat(&bf[n]);
            rhs += af[n].dot_flat(&divergence_two_form(&lc, n, |m| Ok(bf[m])).unwrap());
        }
        eprintln!("adjoint {lhs} {rhs}");
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn gradient_parts_at_alpha_one() {
        let c = perturbed_basic(2);
        let p = ChartPoint::new(Quaternion::new(0.1, -0.2, 0.3, 0.05));
        let g = gradient_ym_alpha_lambda(&c, 1.0, 1.7, p, 1e-3).unwrap();
        assert_eq!(g.theta1, GaugePotential::ZERO);
        assert_eq!(g.theta2, GaugePotential::ZERO);
        assert_eq!(g.prefactor, 2.0);
        assert_eq!(g.total, g.dstar_f.scale(2.0));
        let g = gradient_ym_alpha_lambda(&c, 1.4, 1.7, p, 1e-3).unwrap();
        let re = g.dstar_f.add(&g.theta1).add(&g.theta2).scale(g.prefactor);
        assert!(re.sub(&g.total).norm2_flat().sqrt() <= 1e-12 * g.total.norm2_flat().sqrt());
    }

    #[test]
    fn gradient_matches_discrete_energy_differences() {
        let lat = cube(1.2, 29);
        for seed in 0..2 {
            let lc = LatticeConnection::sample(&perturbed_basic(seed), &lat, 4).unwrap();
            let mut rng = seeded_rng(seed, 12);
            let deep = interior_nodes(&lat, 4);
            let samples: Vec<usize> = (0..30).map(|_| deep[rand::Rng::gen_range(&mut rng, 0..deep.len())]).collect();
            let chk = gradient_fd_check(&lc, 1.5, 1.3, &samples, 1e-5).unwrap();
            eprintln!("fd check {chk:?}");
            assert!(chk.relative_error <= 1e-3);
        }
    }

    #[test]
    fn dilated_basic_is_critical_for_matching_lambda() {
        let mut rng = seeded_rng(3, 0);
        for lam in [0.5, 2.0] {
            let c = pullback(ConformalMap::dilation(lam), ConnectionModel::basic());
            let (mut on, mut off) = (0.0f64, 0.0f64);
            for _ in 0..50 {
                let p = ChartPoint::new(uniform_ball(&mut rng, 1.5));
                on = on.max(gradient_ym_alpha_lambda(&c, 1.5, lam, p, 1e-3).unwrap().total.norm2_flat().sqrt());
                off = off.max(gradient_ym_alpha_lambda(&c, 1.5, 1.0, p, 1e-3).unwrap().total.norm2_flat().sqrt());
            }
            eprintln!("critical {lam}: {on:e} vs {off:e}");
            assert!(on <= 1e-8 && off > 1e-2);
        }
    }

    #[test]
    fn jacobi_forms_agree() {
        let mut errs = Vec::new();
        for n in [17, 25] {
            let lat = cube(1.5, n);
            let lc = LatticeConnection::sample(&ConnectionModel::basic(), &lat, 2).unwrap();
            let mut rng = seeded_rng(9, 0);
            let a = random_perturbation(&mut rng, 2, 1.0, 0.3, (0.4, 0.5));
            let xi: Vec<GaugePotential> = (0..lat.len()).map(|k| a.value_and_derivative(lat.coord(k)).0).collect();
            let nodes = interior_nodes(&lat, 2);
            let j1 = apply_on(&lat, &nodes, |k| jacobi_apply(&lc, &xi, k)).unwrap();
            let j2 = apply_on(&lat, &nodes, |k| jacobi_apply_bochner(&lc, &xi, k)).unwrap();
            let d: Vec<GaugePotential> = j1.iter().zip(&j2).map(|(a, b)| a.sub(b)).collect();
            errs.push(norm_round(&lat, &nodes, &d) / norm_round(&lat, &nodes, &j1));
            assert_eq!(jacobi_apply(&lc, &vec![GaugePotential::ZERO; lat.len()], nodes[0]).unwrap(), GaugePotential::ZERO);
        }
        eprintln!("bochner rel diff {errs:?}");
        assert!(errs[1] < errs[0] && errs[1] < 0.05);
    }

    #[test]
    fn moduli_directions_span_the_jacobi_kernel() {
        let mut worst = Vec::new();
        for n in [21, 25] {
            let lat = Lattice4D::ball(3.0, n).unwrap();
            let lc = LatticeConnection::sample(&ConnectionModel::basic(), &lat, JACOBI_ORDER).unwrap();
            let basis = ModuliBasis::new(&lat, interior_nodes(&lat, JACOBI_ORDER)).unwrap();
            let gram = basis.gram_matrix();
            for (i, row) in gram.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    assert!((v - if i == j { 1.0 } else { 0.0 }).abs() <= 1e-8);
                }
            }
            let r = basis.jacobi_residuals(&lc).unwrap();
            let g = basis.gauge_residuals(&lc).unwrap();
            assert!(g.iter().all(|&x| x < 1e-2), "{g:?}");
            worst.push(r.iter().copied().fold(0.0, f64::max));
        }
        assert!(worst[1] < 0.5 * worst[0], "{worst:?}");
    }

    #[test]
    fn kernel_projection_is_orthogonal() {
        let lat = Lattice4D::ball(2.0, 11).unwrap();
        let basis = ModuliBasis::new(&lat, interior_nodes(&lat, 2)).unwrap();
        let b1 = &basis.members[1];
        let p = kernel_project(b1, &basis);
        let d: Vec<GaugePotential> = p.iter().zip(b1).map(|(a, b)| a.sub(b)).collect();
        assert!(norm_round(&lat, &basis.nodes, &d) <= 1e-8);
        let mut rng = seeded_rng(6, 0);
        let xi: Vec<GaugePotential> = (0..lat.len()).map(|_| random_potential(&mut rng, 1.0)).collect();
        let p = kernel_project(&xi, &basis);
        let rest: Vec<GaugePotential> = xi.iter().zip(&p).map(|(a, b)| a.sub(b)).collect();
        assert!(norm_round(&lat, &basis.nodes, &kernel_project(&rest, &basis)) <= 1e-8);
        assert!(norm_round(&lat, &basis.nodes, &p) <= norm_round(&lat, &basis.nodes, &xi));
    }

    #[test]
    fn polarization_identities() {
        let (c1, c2) = (ConnectionModel::basic(), ConnectionModel::adhm(Quaternion::ZERO, 2.0).unwrap());
        let mut rng = seeded_rng(8, 0);
        let pts: Vec<ChartPoint> = (0..50).map(|_| ChartPoint::new(uniform_ball(&mut rng, 1.5))).collect();
        let same = polarization_residuals(&c1, &c1, &pts, 1e-3).unwrap();
        assert!(same.curvature == 0.0 && same.dstar_f <= 1e-12);
        let r = polarization_residuals(&c1, &c2, &pts, 1e-3).unwrap();
        eprintln!("analytic polarization {r:?}");
        assert!(r.curvature <= 1e-10);
        let mut res = Vec::new();
        for n in [17, 33] {
            let lat = cube(1.0, n);
            let l1 = LatticeConnection::sample(&perturbed_basic(1), &lat, 2).unwrap();
            let l2 = LatticeConnection::sample(&perturbed_basic(2), &lat, 2).unwrap();
            let nodes: Vec<usize> = interior_nodes(&lat, 2).into_iter().filter(|&k| lat.coord(k).norm() <= 0.5).collect();
            res.push(polarization_residuals_lattice(&l1, &l2, &nodes).unwrap());
        }
        eprintln!("lattice polarization {res:?}");
        assert!(res[0].curvature <= 1e-12 && res[1].curvature <= 1e-12);
        assert!((res[0].dstar_f / res[1].dstar_f).log2() >= 1.8);
    }

    #[test]
    fn commutator_margins_are_nonpositive() {
        let mut rng = seeded_rng(10, 0);
        let pts: Vec<ChartPoint> = (0..10_000).map(|_| ChartPoint::new(uniform_ball(&mut rng, 3.0))).collect();
        let a: Vec<GaugePotential> = (0..10_000).map(|_| random_potential(&mut rng, 2.0)).collect();
        let b: Vec<Tensor2> = (0..10_000).map(|_| std::array::from_fn(|_| std::array::from_fn(|_| uniform_im(&mut rng, 2.0)))).collect();
        let m = commutator_bound_check(&pts, &a, &b);
        eprintln!("margins {m:?}");
        assert!(m.one_form <= 0.0 && m.two_tensor <= 0.0);
    }

    #[test]
    fn poincare_ratios_are_scale_invariant_and_shrink_with_support() {
        let mut out = Vec::new();
        for (a, w) in [(1.2, 0.3), (0.6, 0.15)] {
            let lat = cube(a, 25);
            let lc = LatticeConnection::sample(&ConnectionModel::basic(), &lat, 4).unwrap();
            let mut rng = seeded_rng(12, 0);
            let mut pert = random_perturbation(&mut rng, 2, 1.0, 0.0, (1.0, 1.0));
            for b in pert.bumps.iter_mut() {
                b.width = w;
            }
            let f: Vec<GaugePotential> = (0..lat.len()).map(|k| pert.value_and_derivative(lat.coord(k)).0).collect();
            let nodes = interior_nodes(&lat, 4);
            let r = poincare_ratio(&lc, &f, &nodes).unwrap();
            let f3: Vec<GaugePotential> = f.iter().map(|v| v.scale(3.0)).collect();
            let r3 = poincare_ratio(&lc, &f3, &nodes).unwrap();
            assert!((r.0 - r3.0).abs() <= 1e-12 * r.0 && (r.1 - r3.1).abs() <= 1e-12 * r.1);
            out.push(r);
        }
        eprintln!("poincare {out:?}");
        let q = out[0].0 / out[1].0;
        assert!(q > 1.6 && q < 2.4);
        let lat = cube(1.0, 9);
        let lc = LatticeConnection::sample(&ConnectionModel::basic(), &lat, 2).unwrap();
        assert_eq!(poincare_ratio(&lc, &vec![GaugePotential::ZERO; lat.len()], &interior_nodes(&lat, 2)), Err(GaugeError::ZeroField));
    }

    #[test]
    fn morrey_norm_of_constants_is_ball_volume_ratio() {
        let one = |_: Quaternion| Ok(1.0);
        let balls = [(Quaternion::ZERO, 0.1), (Quaternion::new(0.3, 0.1, 0.0, 0.2), 0.5), (Quaternion::ZERO, 1.0)];
        let v = morrey_norm(&one, 1.0, 4.0, &balls, 12).unwrap();
        let euclid = PI * PI / 2.0;
        eprintln!("morrey {v} vs {euclid}");
        assert!(v <= euclid && v > 0.99 * euclid);
        // the round volume of the geodesic ball of radius ρ: (8π²/3)(2 − 3cos ρ + cos³ρ)/4
        let rho: f64 = 1.0;
        let exact = 8.0 * PI * PI / 3.0 * (2.0 - 3.0 * rho.cos() + rho.cos().powi(3)) / 4.0;
        let i = integrate_geodesic_ball(&one, Quaternion::new(0.2, -0.4, 0.1, 0.3), rho, 16).unwrap();
        assert!((i / exact - 1.0).abs() < 1e-10, "{i} {exact}");
        assert_eq!(morrey_norm(&|_| Ok(0.0), 2.0, 1.0, &balls, 8).unwrap(), 0.0);
        let more = morrey_norm(&one, 1.0, 4.0, &[balls[0], balls[1], balls[2], (Quaternion::ZERO, 0.05)], 12).unwrap();
        assert!(more >= v);
    }
}
