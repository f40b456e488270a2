//! Connection models, their curvatures, gauge action and conformal pullback.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GaugeError, Result};
use crate::forms::{conformal_factor, CurvatureField, GaugePotential, PAIRS};
use crate::lattice::Lattice4D;
use crate::quadrature::RadialGrid;
use crate::quaternion::{bracket, exp_im, ImQuaternion, Quaternion};
use crate::sphere::{ChartPoint, ConformalMap};

/// Γ_i = Im[(ζ̄−ξ̄)e_i]/(|ζ−ξ|²+λ²).
pub fn adhm_potential(xi: Quaternion, lambda: f64, p: ChartPoint) -> GaugePotential {
    let w = p.zeta - xi;
    let den = w.norm2() + lambda * lambda;
    GaugePotential(std::array::from_fn(|i| (w.conj() * Quaternion::basis(i)).im().scale(1.0 / den)))
}

/// Closed-form ADHM curvature λ²(|ζ−ξ|²+λ²)⁻² dζ̄∧dζ.
pub fn adhm_curvature(xi: Quaternion, lambda: f64, p: ChartPoint) -> CurvatureField {
    let den = (p.zeta - xi).norm2() + lambda * lambda;
    let c = 2.0 * lambda * lambda / (den * den);
    let (i, j, k) = (ImQuaternion::I * c, ImQuaternion::J * c, ImQuaternion::K * c);
    // order of PAIRS: 12, 13, 14, 23, 24, 34
    CurvatureField::from_upper([i, j, k, -k, j, -i])
}

/// A radial profile f(s), s = |ζ|², for the ansatz A_i = f(s)·Im[ζ̄ e_i].
///
/// Stored as q(u) = (1+s) f(s) with u = s/(1+s) = sin²(θ/2) on the nodes of a
/// [`RadialGrid`] plus the pinned end value q(1) = 1, and interpolated by the
/// barycentric polynomial through those nodes. q ≡ 1 is the basic connection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub u: Vec<f64>,
    pub q: Vec<f64>,
    bary: Vec<f64>,
    /// q′ at the nodes; q′ is itself interpolated from these, which stays
    /// accurate arbitrarily close to a node.
    dq: Vec<f64>,
}

impl RadialProfile {
    /// Profile with q given at the interior nodes of `grid`.
    pub fn from_interior(grid: &RadialGrid, q_interior: &[f64]) -> Result<Self> {
        if q_interior.len() != grid.len() {
            return Err(GaugeError::InvalidParameter("profile length differs from grid".into()));
        }
        if q_interior.iter().any(|v| !v.is_finite()) {
            return Err(GaugeError::InvalidParameter("profile samples must be finite".into()));
        }
        let mut u: Vec<f64> = grid.theta.iter().map(|t| (0.5 * t).sin().powi(2)).collect();
        u.push(1.0);
        let mut q = q_interior.to_vec();
        q.push(1.0);
        let bary = barycentric_weights(&u);
        Ok(RadialProfile::assemble(u, q, bary))
    }

    fn assemble(u: Vec<f64>, q: Vec<f64>, bary: Vec<f64>) -> Self {
        let mut p = RadialProfile { u, q, bary, dq: Vec::new() };
        p.dq = (0..p.u.len()).map(|i| p.derivative_at_node(i)).collect();
        p
    }

    pub fn from_q_fn<F: Fn(f64) -> f64>(grid: &RadialGrid, q: F) -> Result<Self> {
        let u: Vec<f64> = grid.theta.iter().map(|t| (0.5 * t).sin().powi(2)).collect();
        let qi: Vec<f64> = u.iter().map(|&x| q(x)).collect();
        RadialProfile::from_interior(grid, &qi)
    }

    /// From f(s); the end condition s f(s) → 1 is imposed by the pinned node.
    pub fn from_f_fn<F: Fn(f64) -> f64>(grid: &RadialGrid, f: F) -> Result<Self> {
        RadialProfile::from_q_fn(grid, |u| {
            let s = u / (1.0 - u);
            (1.0 + s) * f(s)
        })
    }

    pub fn basic(grid: &RadialGrid) -> Self {
        RadialProfile::from_q_fn(grid, |_| 1.0).expect("constant profile")
    }

    /// The ADHM(0, λ) profile f = 1/(s+λ²).
    pub fn adhm(grid: &RadialGrid, lambda: f64) -> Self {
        let l2 = lambda * lambda;
        RadialProfile::from_q_fn(grid, |u| 1.0 / (u + l2 * (1.0 - u))).expect("finite profile")
    }

    pub fn interior(&self) -> &[f64] {
        &self.q[..self.q.len() - 1]
    }

    pub fn with_interior(&self, q_interior: &[f64]) -> Self {
        let mut q = q_interior.to_vec();
        q.push(1.0);
        RadialProfile::assemble(self.u.clone(), q, self.bary.clone())
    }

    /// (q(u), q′(u)).
    pub fn q_and_derivative(&self, u: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&u) {
            return Err(GaugeError::ProfileNotSampled(u));
        }
        if let Some(k) = self.u.iter().position(|&x| x == u) {
            return Ok((self.q[k], self.dq[k]));
        }
        let (mut num, mut dnum, mut den) = (0.0, 0.0, 0.0);
        for (j, &x) in self.u.iter().enumerate() {
            let c = self.bary[j] / (u - x);
            num += c * self.q[j];
            dnum += c * self.dq[j];
            den += c;
        }
        Ok((num / den, dnum / den))
    }

    fn derivative_at_node(&self, i: usize) -> f64 {
        let mut d = 0.0;
        for j in 0..self.u.len() {
            if j != i {
                d += self.bary[j] / self.bary[i] * (self.q[j] - self.q[i]) / (self.u[i] - self.u[j]);
            }
        }
        d
    }

    /// Differentiation matrix of the interpolant at its own nodes (row-major).
    pub fn differentiation_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.u.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if j != i {
                    let v = self.bary[j] / self.bary[i] / (self.u[i] - self.u[j]);
                    d[i][j] = v;
                    diag -= v;
                }
            }
            d[i][i] = diag;
        }
        d
    }

    /// (f(s), f′(s)).
    pub fn f_and_derivative(&self, s: f64) -> Result<(f64, f64)> {
        if !(s >= 0.0) {
            return Err(GaugeError::ProfileNotSampled(s));
        }
        let u = s / (1.0 + s);
        let (q, dq) = self.q_and_derivative(u)?;
        let v = 1.0 - u;
        Ok((q * v, (dq * v - q) * v * v))
    }
}

fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let scale = 4.0 / (x[n - 1] - x[0]).abs().max(1e-300);
    let mut w: Vec<f64> = (0..n)
        .map(|j| {
            let mut p = 1.0;
            for k in 0..n {
                if k != j {
                    p *= (x[j] - x[k]) * scale;
                }
            }
            1.0 / p
        })
        .collect();
    let m = w.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for v in w.iter_mut() {
        *v /= m;
    }
    w
}

/// Potential of the radial ansatz at a chart point.
pub fn radial_potential(f: &RadialProfile, p: ChartPoint) -> Result<GaugePotential> {
    let (fv, _) = f.f_and_derivative(p.s())?;
    Ok(GaugePotential(std::array::from_fn(|i| (p.zeta.conj() * Quaternion::basis(i)).im() * fv)))
}

/// F_ij = 2f′(x_i a_j − x_j a_i) + f(Im ē_i e_j − Im ē_j e_i) + f²[a_i, a_j], a_i = Im ζ̄ e_i.
pub fn radial_curvature(f: &RadialProfile, p: ChartPoint) -> Result<CurvatureField> {
    let (fv, df) = f.f_and_derivative(p.s())?;
    Ok(radial_curvature_from(fv, df, p.zeta))
}

pub fn radial_curvature_from(fv: f64, df: f64, zeta: Quaternion) -> CurvatureField {
    let x = zeta.to_array();
    let a: [ImQuaternion; 4] = std::array::from_fn(|i| (zeta.conj() * Quaternion::basis(i)).im());
    CurvatureField::from_upper(PAIRS.map(|(i, j)| {
        let e = (Quaternion::basis(i).conj() * Quaternion::basis(j)).im()
            - (Quaternion::basis(j).conj() * Quaternion::basis(i)).im();
        (a[j] * x[i] - a[i] * x[j]) * (2.0 * df) + e * fv + bracket(a[i], a[j]) * (fv * fv)
    }))
}

/// One factor exp_im(amplitude · e^{−|ζ−c|²/w²}) of a smooth gauge transformation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeBump {
    pub center: Quaternion,
    pub width: f64,
    pub amplitude: ImQuaternion,
}

impl GaugeBump {
    fn profile(&self, zeta: Quaternion) -> (f64, [f64; 4]) {
        let d = zeta - self.center;
        let w2 = self.width * self.width;
        let g = (-d.norm2() / w2).exp();
        let da = d.to_array();
        (g, std::array::from_fn(|k| -2.0 * da[k] / w2 * g))
    }
}

/// A unit-quaternion valued gauge transformation ς.
#[derive(Clone, Debug, PartialEq)]
pub enum GaugeTransform {
    Identity,
    Constant(Quaternion),
    /// ς = Π_m exp_im(a_m g_m(ζ)) in the listed order.
    Bumps(Vec<GaugeBump>),
    /// Samples on the nodes of a lattice; derivatives by centered stencils.
    Lattice { lattice: Arc<Lattice4D>, values: Arc<Vec<Quaternion>>, order: usize },
}

impl GaugeTransform {
    pub fn value(&self, p: ChartPoint) -> Result<Quaternion> {
        Ok(self.value_and_derivative(p, false)?.0)
    }

    fn value_and_derivative(&self, p: ChartPoint, want_derivative: bool) -> Result<(Quaternion, [Quaternion; 4])> {
        match self {
            GaugeTransform::Identity => Ok((Quaternion::ONE, [Quaternion::ZERO; 4])),
            GaugeTransform::Constant(q) => Ok((*q, [Quaternion::ZERO; 4])),
            GaugeTransform::Bumps(bumps) => {
                let mut val = Quaternion::ONE;
                let mut der = [Quaternion::ZERO; 4];
                for b in bumps {
                    let (g, dg) = b.profile(p.zeta);
                    let e = exp_im(b.amplitude * g);
                    // ∂ exp_im(a g) = exp_im(a g)·a ∂g since a is fixed
                    let a = b.amplitude.to_quaternion();
                    for k in 0..4 {
                        der[k] = der[k] * e + val * e * a * dg[k];
                    }
                    val = val * e;
                }
                Ok((val, der))
            }
            GaugeTransform::Lattice { lattice, values, order } => {
                let idx = lattice.locate(p.zeta).ok_or(GaugeError::StencilOutOfDomain(usize::MAX))?;
                let mut der = [Quaternion::ZERO; 4];
                if want_derivative {
                    for (k, d) in der.iter_mut().enumerate() {
                        *d = lattice.stencil(idx, k, *order)?.apply_quat(values);
                    }
                }
                Ok((values[idx], der))
            }
        }
    }

    /// ς⁻¹∂_iς for i = 1..4.
    pub fn maurer_cartan(&self, p: ChartPoint) -> Result<(Quaternion, [ImQuaternion; 4])> {
        let (v, d) = self.value_and_derivative(p, true)?;
        let inv = v.conj();
        Ok((v, d.map(|dk| (inv * dk).im())))
    }
}

/// A smooth additive 1-form a_i = Σ_m e^{−|ζ−c_m|²/w_m²} v_{m,i}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialBump {
    pub center: Quaternion,
    pub width: f64,
    pub coefficients: [ImQuaternion; 4],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub bumps: Vec<PotentialBump>,
}

impl Perturbation {
    /// Value a_i and derivatives ∂_k a_i (indexed [k][i]).
    pub fn value_and_derivative(&self, zeta: Quaternion) -> (GaugePotential, [[ImQuaternion; 4]; 4]) {
        let mut a = GaugePotential::ZERO;
        let mut da = [[ImQuaternion::ZERO; 4]; 4];
        for b in &self.bumps {
            let d = zeta - b.center;
            let w2 = b.width * b.width;
            let g = (-d.norm2() / w2).exp();
            let darr = d.to_array();
            for i in 0..4 {
                a.0[i] += b.coefficients[i] * g;
                for k in 0..4 {
                    da[k][i] += b.coefficients[i] * (-2.0 * darr[k] / w2 * g);
                }
            }
        }
        (a, da)
    }

    /// Largest |ζ| + 6w over the bumps; the perturbation is below e⁻³⁶ beyond it.
    pub fn effective_radius(&self) -> f64 {
        self.bumps.iter().map(|b| b.center.norm() + 6.0 * b.width).fold(0.0, f64::max)
    }
}

/// A 1-form field sampled on lattice nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeConnection {
    pub lattice: Lattice4D,
    pub values: Vec<GaugePotential>,
    pub order: usize,
}

impl LatticeConnection {
    pub fn sample(c: &ConnectionModel, lattice: &Lattice4D, order: usize) -> Result<Self> {
        let values: Result<Vec<GaugePotential>> =
            (0..lattice.len()).into_par_iter().map(|k| c.potential(ChartPoint::new(lattice.coord(k)))).collect();
        Ok(LatticeConnection { lattice: lattice.clone(), values: values?, order })
    }

    /// ∂_kΓ_i at node `idx`, indexed [k][i].
    pub fn derivatives(&self, idx: usize) -> Result<[[ImQuaternion; 4]; 4]> {
        let mut d = [[ImQuaternion::ZERO; 4]; 4];
        for (k, row) in d.iter_mut().enumerate() {
            let st = self.lattice.stencil(idx, k, self.order)?;
            for (i, v) in row.iter_mut().enumerate() {
                *v = st.apply_potential(&self.values, i);
            }
        }
        Ok(d)
    }

    pub fn curvature_at(&self, idx: usize) -> Result<CurvatureField> {
        let d = self.derivatives(idx)?;
        let g = &self.values[idx].0;
        Ok(CurvatureField::from_upper(PAIRS.map(|(i, j)| d[i][j] - d[j][i] + bracket(g[i], g[j]))))
    }
}

/// The connection representations the crate evaluates.
#[derive(Clone, Debug, PartialEq)]
pub enum ConnectionModel {
    Flat,
    Adhm { xi: Quaternion, lambda: f64 },
    Radial(Arc<RadialProfile>),
    Lattice(Arc<LatticeConnection>),
    GaugeTransformed { base: Box<ConnectionModel>, transform: GaugeTransform },
    Pulledback { base: Box<ConnectionModel>, map: ConformalMap },
    Perturbed { base: Box<ConnectionModel>, perturbation: Perturbation },
}

impl ConnectionModel {
    /// The basic connection ∇̃ = ADHM(0, 1).
    pub fn basic() -> Self {
        ConnectionModel::Adhm { xi: Quaternion::ZERO, lambda: 1.0 }
    }

    pub fn adhm(xi: Quaternion, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(GaugeError::InvalidParameter(format!("ADHM scale {lambda}")));
        }
        Ok(ConnectionModel::Adhm { xi, lambda })
    }

    pub fn radial(profile: RadialProfile) -> Self {
        ConnectionModel::Radial(Arc::new(profile))
    }

    pub fn potential(&self, p: ChartPoint) -> Result<GaugePotential> {
        match self {
            ConnectionModel::Flat => Ok(GaugePotential::ZERO),
            ConnectionModel::Adhm { xi, lambda } => Ok(adhm_potential(*xi, *lambda, p)),
            ConnectionModel::Radial(f) => radial_potential(f, p),
            ConnectionModel::Lattice(l) => {
                let idx = l.lattice.locate(p.zeta).ok_or(GaugeError::StencilOutOfDomain(usize::MAX))?;
                Ok(l.values[idx])
            }
            ConnectionModel::GaugeTransformed { base, transform } => {
                let (s, mc) = transform.maurer_cartan(p)?;
                let g = base.potential(p)?.conjugate(s);
                Ok(GaugePotential(std::array::from_fn(|i| mc[i] + g.0[i])))
            }
            ConnectionModel::Pulledback { base, map } => {
                let q = map.apply_zeta(p.zeta)?;
                let jac = map.jacobian(p.zeta)?;
                let g = base.potential(ChartPoint::new(q))?;
                Ok(GaugePotential(std::array::from_fn(|i| {
                    let row = jac[i].to_array();
                    let mut acc = ImQuaternion::ZERO;
                    for j in 0..4 {
                        acc += g.0[j] * row[j];
                    }
                    acc
                })))
            }
            ConnectionModel::Perturbed { base, perturbation } => {
                let (a, _) = perturbation.value_and_derivative(p.zeta);
                Ok(base.potential(p)?.add(&a))
            }
        }
    }

    pub fn curvature(&self, p: ChartPoint) -> Result<CurvatureField> {
        match self {
            ConnectionModel::Flat => Ok(CurvatureField::ZERO),
            ConnectionModel::Adhm { xi, lambda } => Ok(adhm_curvature(*xi, *lambda, p)),
            ConnectionModel::Radial(f) => radial_curvature(f, p),
            ConnectionModel::Lattice(l) => {
                let idx = l.lattice.locate(p.zeta).ok_or(GaugeError::StencilOutOfDomain(usize::MAX))?;
                l.curvature_at(idx)
            }
            ConnectionModel::GaugeTransformed { base, transform } => {
                Ok(base.curvature(p)?.conjugate(transform.value(p)?))
            }
            ConnectionModel::Pulledback { base, map } => {
                let q = map.apply_zeta(p.zeta)?;
                let jac = map.jacobian(p.zeta)?.map(|r| r.to_array());
                let f = base.curvature(ChartPoint::new(q))?;
                Ok(CurvatureField::from_upper(PAIRS.map(|(i, j)| {
                    let mut acc = ImQuaternion::ZERO;
                    for (k, l) in PAIRS {
                        let c = jac[i][k] * jac[j][l] - jac[i][l] * jac[j][k];
                        acc += f.0[k][l] * c;
                    }
                    acc
                })))
            }
            ConnectionModel::Perturbed { base, perturbation } => {
                let (a, da) = perturbation.value_and_derivative(p.zeta);
                let g = base.potential(p)?;
                let f = base.curvature(p)?;
                Ok(CurvatureField::from_upper(PAIRS.map(|(i, j)| {
                    f.0[i][j] + da[i][j] - da[j][i]
                        + bracket(g.0[i], a.0[j])
                        + bracket(a.0[i], g.0[j])
                        + bracket(a.0[i], a.0[j])
                })))
            }
        }
    }

    /// True when |F|²_ḡ is a function of |ζ| alone and the 1D radial route applies.
    pub fn has_radial_density(&self) -> bool {
        match self {
            ConnectionModel::Flat | ConnectionModel::Radial(_) => true,
            ConnectionModel::Adhm { xi, .. } => xi.norm2() == 0.0,
            ConnectionModel::Pulledback { base, map } => {
                map.eps == 0 && map.xi1.norm2() == 0.0 && map.xi2.norm2() == 0.0 && base.has_radial_density()
            }
            _ => false,
        }
    }

    /// The model with gauge decorations stripped, and the accumulated transform if it is a
    /// single layer.
    pub fn undecorated(&self) -> &ConnectionModel {
        match self {
            ConnectionModel::GaugeTransformed { base, .. } => base.undecorated(),
            other => other,
        }
    }

    /// |F|²_ḡ at a chart point.
    pub fn density_round(&self, p: ChartPoint) -> Result<f64> {
        Ok(self.curvature(p)?.norm2_round(p.zeta))
    }
}

/// Centered second-order finite-difference curvature of a model's potential.
pub fn curvature_fd(c: &ConnectionModel, p: ChartPoint, h: f64) -> Result<CurvatureField> {
    if !(h > 0.0) {
        return Err(GaugeError::InvalidParameter(format!("step {h}")));
    }
    if let ConnectionModel::Lattice(l) = c {
        if (l.lattice.spacing() - h).abs() > 1e-12 * h {
            return Err(GaugeError::InvalidParameter("lattice step differs from the lattice spacing".into()));
        }
        let idx = l.lattice.locate(p.zeta).ok_or(GaugeError::StencilOutOfDomain(usize::MAX))?;
        let mut l2 = (**l).clone();
        l2.order = 2;
        return l2.curvature_at(idx);
    }
    let g = c.potential(p)?;
    let mut d = [[ImQuaternion::ZERO; 4]; 4];
    for (k, row) in d.iter_mut().enumerate() {
        let e = Quaternion::basis(k).scale(h);
        let plus = c.potential(ChartPoint::new(p.zeta + e))?;
        let minus = c.potential(ChartPoint::new(p.zeta - e))?;
        for i in 0..4 {
            row[i] = (plus.0[i] - minus.0[i]) * (0.5 / h);
        }
    }
    Ok(CurvatureField::from_upper(PAIRS.map(|(i, j)| d[i][j] - d[j][i] + bracket(g.0[i], g.0[j]))))
}

pub fn gauge_act(t: GaugeTransform, c: ConnectionModel) -> ConnectionModel {
    match t {
        GaugeTransform::Identity => c,
        t => ConnectionModel::GaugeTransformed { base: Box::new(c), transform: t },
    }
}

pub fn pullback(m: ConformalMap, c: ConnectionModel) -> ConnectionModel {
    if m == ConformalMap::identity() {
        return c;
    }
    ConnectionModel::Pulledback { base: Box::new(c), map: m }
}

pub fn perturb(c: ConnectionModel, perturbation: Perturbation) -> ConnectionModel {
    ConnectionModel::Perturbed { base: Box::new(c), perturbation }
}

pub fn radial_connection(f: RadialProfile) -> ConnectionModel {
    ConnectionModel::radial(f)
}

/// |F|² of the radial ansatz at |ζ|² = s in closed form: 24[(f+sf′)² + f²(1−sf)²].
pub fn radial_density_flat(f: f64, df: f64, s: f64) -> f64 {
    let a = f + s * df;
    let b = f * (1.0 - s * f);
    24.0 * (a * a + b * b)
}

/// Round conformal factor φ, re-exported for callers computing weights.
pub fn phi(zeta: Quaternion) -> f64 {
    conformal_factor(zeta)
}
