//! Gauge fixing against the basic connection: the lattice projection onto
//! D*_∇̃(ς[∇] − ∇̃) = 0, its diagnostics, and the search over conformal maps for
//! the gauge-fixed distance to ∇̃.
//!
//! Operators live on a ball lattice with second-order centered differences.
//! 1-forms are evaluated at depth ≥ 1, the gauge is solved for at active nodes
//! of depth ≥ 2 and held at its input value elsewhere (Dirichlet data). With
//! zero extension the discrete D̃ and D̃* are exact adjoints for the round
//! weights, so Δ̃ = D̃*D̃ is symmetric positive definite and CG applies.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GaugeError, Result};
use crate::forms::{CurvatureField, GaugePotential};
use crate::gauge::{adhm_potential, pullback, ConnectionModel, GaugeTransform, LatticeConnection};
use crate::lattice::Lattice4D;
use crate::quaternion::{bracket, exp_im, ImQuaternion, Quaternion};
use crate::sphere::{ChartPoint, ConformalMap};

/// Inputs must differ from ∇̃ only inside |ζ| ≤ 0.8R under [`SupportPolicy::Assert`].
pub const SUPPORT_FRACTION: f64 = 0.8;
/// Largest |c − ∇̃| tolerated outside the support ball.
pub const SUPPORT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupportPolicy {
    Assert,
    /// For inputs such as ADHM(ξ, λ) whose difference from ∇̃ only decays.
    Relaxed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoulombConfig {
    pub lattice: Lattice4D,
    /// Target for ‖D*_∇̃(ς[c] − ∇̃)‖_{L²}.
    pub tol: f64,
    pub max_outer: usize,
    /// CG stops when the preconditioned residual drops by this factor.
    pub cg_rel_tol: f64,
    pub cg_max_iter: usize,
    pub support: SupportPolicy,
}

impl Default for CoulombConfig {
    fn default() -> Self {
        CoulombConfig {
            lattice: Lattice4D { center: Quaternion::ZERO, half_width: 3.0, n: 16, ball_radius: Some(3.0) },
            tol: 1e-9,
            max_outer: 40,
            cg_rel_tol: 1e-4,
            cg_max_iter: 4000,
            support: SupportPolicy::Assert,
        }
    }
}

impl CoulombConfig {
    pub fn relaxed(self) -> Self {
        CoulombConfig { support: SupportPolicy::Relaxed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.cg_rel_tol > 0.0 && self.cg_rel_tol < 1.0) || self.max_outer == 0 || self.cg_max_iter == 0 {
            return Err(GaugeError::InvalidParameter("Coulomb tolerances and iteration caps must be positive".into()));
        }
        if self.lattice.ball_radius.is_none() {
            return Err(GaugeError::InvalidParameter("the Coulomb projection needs a ball lattice".into()));
        }
        Ok(())
    }
}

/// Per-lattice data of ∇̃ shared by every solve.
struct Frame {
    lattice: Lattice4D,
    h: f64,
    stride: [usize; 4],
    /// φ² = 4/(1+|ζ|²)².
    phi2: Vec<f64>,
    basic: Vec<GaugePotential>,
    /// Nodes of depth ≥ 1, where 1-forms are evaluated.
    inner: Vec<usize>,
    /// Unknowns of the elliptic solve: active nodes of depth ≥ 2.
    unknown: Vec<usize>,
    /// Jacobi preconditioner: inverse diagonal of the derivative part of Δ̃.
    precond: Vec<f64>,
}

impl Frame {
    fn new(lattice: &Lattice4D) -> Frame {
        let n = lattice.n;
        let h = lattice.spacing();
        let stride = [n * n * n, n * n, n, 1];
        let coords: Vec<Quaternion> = (0..lattice.len()).map(|k| lattice.coord(k)).collect();
        let phi2: Vec<f64> = coords.iter().map(|z| 4.0 / (1.0 + z.norm2()).powi(2)).collect();
        let basic = coords.iter().map(|&z| adhm_potential(Quaternion::ZERO, 1.0, ChartPoint::new(z))).collect();
        let inner: Vec<usize> = (0..lattice.len()).filter(|&k| lattice.depth(k) >= 1).collect();
        let unknown: Vec<usize> = inner.iter().copied().filter(|&k| lattice.depth(k) >= 2 && lattice.is_active(k)).collect();
        let mut precond = vec![0.0; lattice.len()];
        for &x in &unknown {
            let d: f64 = stride.iter().map(|&s| phi2[x + s] + phi2[x - s]).sum::<f64>() / (4.0 * h * h);
            precond[x] = phi2[x] * phi2[x] / d;
        }
        Frame { lattice: lattice.clone(), h, stride, phi2, basic, inner, unknown, precond }
    }

    /// τ[base] at a node of depth ≥ 1: Im(τ̄ ∂τ) + τ̄ Γ τ.
    fn gauged(&self, tau: &[Quaternion], base: &[GaugePotential], x: usize) -> GaugePotential {
        let t = tau[x];
        let tc = t.conj();
        GaugePotential(std::array::from_fn(|i| {
            let s = self.stride[i];
            let d = (tau[x + s] - tau[x - s]).scale(0.5 / self.h);
            (tc * d).im() + t.conjugate_im(base[x].0[i])
        }))
    }

    fn upsilon(&self, tau: &[Quaternion], base: &[GaugePotential]) -> Vec<GaugePotential> {
        let mut out = vec![GaugePotential::ZERO; self.lattice.len()];
        for &x in &self.inner {
            out[x] = self.gauged(tau, base, x).sub(&self.basic[x]);
        }
        out
    }

    /// D*_∇̃ Υ = −φ⁻⁴ Σ_i (∂_i(φ²Υ_i) + [Γ̃_i, φ²Υ_i]) at the listed nodes.
    fn dstar(&self, ups: &[GaugePotential], nodes: &[usize]) -> Vec<ImQuaternion> {
        let mut out = vec![ImQuaternion::ZERO; self.lattice.len()];
        let c = 0.5 / self.h;
        for &x in nodes {
            let mut acc = ImQuaternion::ZERO;
            for i in 0..4 {
                let s = self.stride[i];
                acc += (ups[x + s].0[i] * self.phi2[x + s] - ups[x - s].0[i] * self.phi2[x - s]) * c;
                acc += bracket(self.basic[x].0[i], ups[x].0[i] * self.phi2[x]);
            }
            out[x] = acc * (-1.0 / (self.phi2[x] * self.phi2[x]));
        }
        out
    }

    /// D_∇̃ δ for δ vanishing off the unknowns.
    fn d(&self, delta: &[ImQuaternion]) -> Vec<GaugePotential> {
        let mut out = vec![GaugePotential::ZERO; self.lattice.len()];
        let c = 0.5 / self.h;
        for &x in &self.inner {
            out[x] = GaugePotential(std::array::from_fn(|i| {
                let s = self.stride[i];
                (delta[x + s] - delta[x - s]) * c + bracket(self.basic[x].0[i], delta[x])
            }));
        }
        out
    }

    fn laplacian(&self, delta: &[ImQuaternion]) -> Vec<ImQuaternion> {
        self.dstar(&self.d(delta), &self.unknown)
    }

    /// Σ_U φ⁴ ⟨a, b⟩, the round pairing of sections without the h⁴.
    fn dot(&self, a: &[ImQuaternion], b: &[ImQuaternion]) -> f64 {
        self.unknown.iter().map(|&x| self.phi2[x] * self.phi2[x] * a[x].dot(b[x])).sum()
    }

    fn residual_norm(&self, r: &[ImQuaternion]) -> f64 {
        (self.dot(r, r) * self.h.powi(4)).sqrt()
    }

    /// Preconditioned CG for Δ̃δ = b in the φ⁴-weighted pairing.
    fn solve(&self, b: &[ImQuaternion], rel_tol: f64, max_iter: usize) -> Result<(Vec<ImQuaternion>, usize)> {
        let len = self.lattice.len();
        let mut x = vec![ImQuaternion::ZERO; len];
        let mut r = b.to_vec();
        let apply_m = |r: &[ImQuaternion]| -> Vec<ImQuaternion> {
            let mut z = vec![ImQuaternion::ZERO; len];
            for &k in &self.unknown {
                z[k] = r[k] * (self.precond[k] / (self.phi2[k] * self.phi2[k]));
            }
            z
        };
        let mut z = apply_m(&r);
        let mut p = z.clone();
        let mut rz = self.dot(&r, &z);
        let target = rel_tol * rel_tol * rz;
        if rz == 0.0 {
            return Ok((x, 0));
        }
        for it in 1..=max_iter {
            let ap = self.laplacian(&p);
            let alpha = rz / self.dot(&p, &ap);
            for &k in &self.unknown {
                x[k] += p[k] * alpha;
                r[k] -= ap[k] * alpha;
            }
            z = apply_m(&r);
            let rz_new = self.dot(&r, &z);
            if rz_new <= target {
                return Ok((x, it));
            }
            let beta = rz_new / rz;
            rz = rz_new;
            for &k in &self.unknown {
                p[k] = z[k] + p[k] * beta;
            }
        }
        Err(GaugeError::CgNotConverged((rz / (target / (rel_tol * rel_tol))).sqrt()))
    }

    fn sample(&self, c: &ConnectionModel) -> Result<Vec<GaugePotential>> {
        (0..self.lattice.len()).into_par_iter().map(|k| c.potential(ChartPoint::new(self.lattice.coord(k)))).collect()
    }
}

/// Undecorated base and the total gauge of a stack of gauge layers:
/// t₂[t₁[b]] = (t₁t₂)[b].
fn split_gauge(c: &ConnectionModel) -> (&ConnectionModel, Vec<&GaugeTransform>) {
    let mut layers = Vec::new();
    let mut cur = c;
    while let ConnectionModel::GaugeTransformed { base, transform } = cur {
        layers.push(transform);
        cur = base;
    }
    layers.reverse();
    (cur, layers)
}

/// D*_∇̃ Υ for a lattice 1-form, evaluated at every node of depth ≥ 1 (zero on the
/// outer layer, where the centered stencil does not fit).
pub fn dstar_against_basic(lattice: &Lattice4D, upsilon: &[GaugePotential]) -> Result<Vec<ImQuaternion>> {
    if upsilon.len() != lattice.len() {
        return Err(GaugeError::InvalidParameter("field does not live on the lattice".into()));
    }
    let f = Frame::new(lattice);
    Ok(f.dstar(upsilon, &f.inner))
}

/// W(σ, c) = e^{−σ}(c − ∇̃)e^{σ} at every lattice node.
pub fn w_operator(lattice: &Lattice4D, sigma: &[ImQuaternion], c: &ConnectionModel) -> Result<Vec<GaugePotential>> {
    if sigma.len() != lattice.len() {
        return Err(GaugeError::InvalidParameter("σ does not live on the lattice".into()));
    }
    (0..lattice.len())
        .into_par_iter()
        .map(|k| {
            let p = ChartPoint::new(lattice.coord(k));
            let ups = c.potential(p)?.sub(&adhm_potential(Quaternion::ZERO, 1.0, p));
            Ok(ups.conjugate(exp_im(sigma[k])))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoulombResult {
    pub lattice: Lattice4D,
    /// ς = exp_im(σ) relative to the input connection.
    pub sigma: Vec<ImQuaternion>,
    /// Π̃[c] sampled on the lattice (order-2 stencils).
    pub projected: LatticeConnection,
    /// ‖D*_∇̃(ς[c] − ∇̃)‖_{L²} before the first and after every outer iteration.
    pub residual_history: Vec<f64>,
    /// CG iterations per outer iteration (0 for the initial entry).
    pub cg_iterations: Vec<usize>,
    /// sup |σ| after every outer iteration.
    pub sigma_sup_history: Vec<f64>,
}

impl CoulombResult {
    pub fn connection(&self) -> ConnectionModel {
        ConnectionModel::Lattice(std::sync::Arc::new(self.projected.clone()))
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("history starts non-empty")
    }

    /// Ratios r_{ℓ+1}/r_ℓ of consecutive nonzero residuals.
    pub fn contraction_factors(&self) -> Vec<f64> {
        self.residual_history.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect()
    }

    pub fn distance_to_basic(&self) -> Result<(f64, f64)> {
        lattice_distance_to_basic(&self.projected)
    }

    /// ‖Π̃[c] − ∇̃‖ / ‖F_{Π̃[c]} − F_∇̃‖.
    pub fn bootstrap_ratio(&self) -> Result<f64> {
        let (a, b) = self.distance_to_basic()?;
        if b == 0.0 {
            return Err(GaugeError::ZeroField);
        }
        Ok(a / b)
    }
}

/// Round L² distances (‖c − ∇̃‖, ‖F_c − F_∇̃‖) of a lattice connection, with both
/// curvatures taken by the connection's own stencils so discretization cancels.
pub fn lattice_distance_to_basic(l: &LatticeConnection) -> Result<(f64, f64)> {
    let lat = &l.lattice;
    let basic = LatticeConnection::sample(&ConnectionModel::basic(), lat, l.order)?;
    let reach = Lattice4D::reach(l.order);
    let mut conn = 0.0;
    let mut curv = 0.0;
    for k in 0..lat.len() {
        if !lat.is_active(k) || lat.depth(k) < reach {
            continue;
        }
        let z = lat.coord(k);
        let w = lat.weight(k);
        conn += w * l.values[k].sub(&basic.values[k]).norm2_round(z);
        let d: CurvatureField = l.curvature_at(k)?.sub(&basic.curvature_at(k)?);
        curv += w * d.norm2_round(z);
    }
    Ok((conn.sqrt(), curv.sqrt()))
}

/// Π̃[c]: iterates ς ← ς·exp_im(δ) with Δ̃δ = −D*_∇̃(ς[c] − ∇̃) until the residual is
/// below `cfg.tol`. A step that raises the residual is retried at half length; two
/// consecutive increases abort.
pub fn coulomb_project(c: &ConnectionModel, cfg: &CoulombConfig) -> Result<CoulombResult> {
    cfg.validate()?;
    let f = Frame::new(&cfg.lattice);
    let lat = &f.lattice;
    let full = f.sample(c)?;
    if cfg.support == SupportPolicy::Assert {
        let r = SUPPORT_FRACTION * lat.ball_radius.unwrap_or(lat.half_width);
        let outside = (0..lat.len())
            .filter(|&k| lat.coord(k).norm() > r)
            .map(|k| full[k].sub(&f.basic[k]).norm2_flat().sqrt())
            .fold(0.0, f64::max);
        if outside > SUPPORT_TOL {
            return Err(GaugeError::SupportViolation(outside));
        }
    }
    let (base_model, layers) = split_gauge(c);
    let base = f.sample(base_model)?;
    let tau0: Vec<Quaternion> = (0..lat.len())
        .into_par_iter()
        .map(|k| {
            let p = ChartPoint::new(lat.coord(k));
            layers.iter().try_fold(Quaternion::ONE, |acc, t| Ok::<_, GaugeError>(acc * t.value(p)?))
        })
        .collect::<Result<_>>()?;

    let residual_of = |tau: &[Quaternion]| -> (Vec<ImQuaternion>, f64) {
        let r = f.dstar(&f.upsilon(tau, &base), &f.unknown);
        let n = f.residual_norm(&r);
        (r, n)
    };
    let sigma_sup = |tau: &[Quaternion]| -> f64 {
        f.unknown.iter().map(|&k| (tau0[k].conj() * tau[k]).log_unit().norm()).fold(0.0, f64::max)
    };

    let mut tau = tau0.clone();
    let (mut r, mut res) = residual_of(&tau);
    if !res.is_finite() {
        return Err(GaugeError::Diverged(0));
    }
    let mut residual_history = vec![res];
    let mut cg_iterations = vec![0];
    let mut sigma_sup_history = vec![0.0];
    let mut increases = 0;
    let mut outer = 0;
    while res > cfg.tol {
        if outer == cfg.max_outer {
            return Err(GaugeError::MaxOuterExceeded(outer));
        }
        outer += 1;
        let rhs: Vec<ImQuaternion> = r.iter().map(|v| -*v).collect();
        let (delta, its) = f.solve(&rhs, cfg.cg_rel_tol, cfg.cg_max_iter)?;
        let mut damping = 1.0;
        let (next, r_next, res_next) = loop {
            let mut cand = tau.clone();
            for &k in &f.unknown {
                cand[k] = tau[k] * exp_im(delta[k] * damping);
            }
            let (rn, resn) = residual_of(&cand);
            if (resn.is_finite() && resn <= res) || damping < 1.0 {
                break (cand, rn, resn);
            }
            damping = 0.5;
        };
        if !res_next.is_finite() {
            return Err(GaugeError::Diverged(outer));
        }
        if res_next > res {
            increases += 1;
            if increases >= 2 {
                return Err(GaugeError::Diverged(outer));
            }
        } else {
            increases = 0;
        }
        tau = next;
        r = r_next;
        res = res_next;
        residual_history.push(res);
        cg_iterations.push(its);
        sigma_sup_history.push(sigma_sup(&tau));
    }

    let mut values = full;
    for &k in &f.inner {
        values[k] = f.gauged(&tau, &base, k);
    }
    let sigma = (0..lat.len()).map(|k| (tau0[k].conj() * tau[k]).log_unit()).collect();
    Ok(CoulombResult {
        lattice: lat.clone(),
        sigma,
        projected: LatticeConnection { lattice: lat.clone(), values, order: 2 },
        residual_history,
        cg_iterations,
        sigma_sup_history,
    })
}

/// The lattice on which φ*Π̃[c] can be read off at the nodes of `lattice`: the same
/// lattice when φ permutes its nodes, the scaled ball for a pure dilation.
fn pulled_back_lattice(m: &ConformalMap, lattice: &Lattice4D) -> Result<Lattice4D> {
    m.validate()?;
    let maps_nodes = |target: &Lattice4D| -> Result<bool> {
        for k in 0..lattice.len() {
            if target.locate(m.apply_zeta(lattice.coord(k))?).is_none() {
                return Ok(false);
            }
        }
        Ok(true)
    };
    if lattice.center == Quaternion::ZERO && maps_nodes(lattice)? {
        return Ok(lattice.clone());
    }
    let pure_dilation = m.eps == 0
        && m.xi1 == Quaternion::ZERO
        && m.xi2 == Quaternion::ZERO
        && m.rot == (Quaternion::ONE, Quaternion::ONE);
    if pure_dilation && lattice.center == Quaternion::ZERO {
        let scaled = Lattice4D {
            center: Quaternion::ZERO,
            half_width: lattice.half_width * m.lambda,
            n: lattice.n,
            ball_radius: lattice.ball_radius.map(|r| r * m.lambda),
        };
        if maps_nodes(&scaled)? {
            return Ok(scaled);
        }
    }
    Err(GaugeError::InvalidParameter("commutation is checked for node-preserving rotations and dilations".into()))
}

/// ‖Π̃[φ*c] − φ*Π̃[c]‖_{L²}. For a dilation φ*Π̃[c] is projected on the ball of
/// radius λR, whose nodes φ maps the working lattice onto, and φ*c is projected
/// under the relaxed support policy since φ*∇̃ = ADHM(0, 1/λ) is not a compact
/// perturbation of ∇̃.
pub fn commute_check(c: &ConnectionModel, m: &ConformalMap, cfg: &CoulombConfig) -> Result<f64> {
    let lat = &cfg.lattice;
    let target = pulled_back_lattice(m, lat)?;
    let lhs_cfg = if target == *lat { cfg.clone() } else { cfg.clone().relaxed() };
    let lhs = coulomb_project(&pullback(*m, c.clone()), &lhs_cfg)?;
    let rhs = coulomb_project(c, &CoulombConfig { lattice: target.clone(), ..cfg.clone() })?;
    let mut acc = 0.0;
    for k in 0..lat.len() {
        if !lat.is_active(k) || lat.depth(k) < 1 {
            continue;
        }
        let z = lat.coord(k);
        let y = target.locate(m.apply_zeta(z)?).ok_or(GaugeError::StencilOutOfDomain(k))?;
        if target.depth(y) < 1 {
            continue;
        }
        let jac = m.jacobian(z)?.map(|r| r.to_array());
        let b = &rhs.projected.values[y];
        let pulled = GaugePotential(std::array::from_fn(|i| {
            let mut v = ImQuaternion::ZERO;
            for j in 0..4 {
                v += b.0[j] * jac[i][j];
            }
            v
        }));
        acc += lat.weight(k) * lhs.projected.values[k].sub(&pulled).norm2_round(z);
    }
    Ok(acc.sqrt())
}

pub const GAUGEFIX_CSV_HEADER: &str = "outer_iter,residual,cg_iters,sigma_sup_norm";

pub fn write_gaugefix_csv<W: Write>(mut w: W, result: &CoulombResult) -> std::io::Result<()> {
    writeln!(w, "{GAUGEFIX_CSV_HEADER}")?;
    for (k, ((r, its), s)) in result
        .residual_history
        .iter()
        .zip(&result.cg_iterations)
        .zip(&result.sigma_sup_history)
        .enumerate()
    {
        writeln!(w, "{k},{r:.17e},{its},{s:.17e}")?;
    }
    Ok(())
}

/// Search box for the conformal minimization: λ ∈ [1/λ_max, λ_max], |ξ| ≤ ξ_max.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZBox {
    pub lambda_max: f64,
    pub xi_max: f64,
}

impl ZBox {
    fn contains(&self, lambda: f64, xi: Quaternion) -> bool {
        lambda >= 1.0 / self.lambda_max && lambda <= self.lambda_max && xi.norm() <= self.xi_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZProbe {
    pub lambda: f64,
    pub xi: [f64; 4],
    /// None when the projection failed at this probe and it was skipped.
    pub z: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZReport {
    /// The minimizing map ζ ↦ ξ + λζ.
    pub map: ConformalMap,
    pub z: f64,
    pub trace: Vec<ZProbe>,
}

/// 𝒵(φ) = ‖F_{Π̃[φ*c]} − F_∇̃‖² + ‖Π̃[φ*c] − ∇̃‖².
pub fn z_value(c: &ConnectionModel, m: &ConformalMap, cfg: &CoulombConfig) -> Result<f64> {
    let (a, b) = coulomb_project(&pullback(*m, c.clone()), cfg)?.distance_to_basic()?;
    Ok(a * a + b * b)
}

/// Minimizes 𝒵 over maps ζ ↦ ξ + λζ in the box: a coarse grid over (log λ, ξ), then
/// Nelder–Mead from the best probe. Probes whose projection fails are skipped.
pub fn minimize_conformal_distance(c: &ConnectionModel, zbox: &ZBox, cfg: &CoulombConfig) -> Result<ZReport> {
    if !(zbox.lambda_max >= 1.0) || !(zbox.xi_max >= 0.0) {
        return Err(GaugeError::InvalidParameter("Z search box".into()));
    }
    let mut trace = Vec::new();
    let mut eval = |u: &[f64; 5]| -> f64 {
        let lambda = u[0].exp();
        let xi = Quaternion::new(u[1], u[2], u[3], u[4]);
        if !zbox.contains(lambda, xi) {
            return f64::INFINITY;
        }
        let z = z_value(c, &ConformalMap::affine(lambda, xi), cfg).ok();
        trace.push(ZProbe { lambda, xi: xi.to_array(), z });
        z.unwrap_or(f64::INFINITY)
    };

    let ll = zbox.lambda_max.ln();
    let mut best = ([0.0; 5], f64::INFINITY);
    for a in [-ll, -0.5 * ll, 0.0, 0.5 * ll, ll] {
        for dir in 0..9 {
            let mut u = [a, 0.0, 0.0, 0.0, 0.0];
            if dir > 0 {
                u[1 + (dir - 1) / 2] = if dir % 2 == 1 { 0.5 } else { -0.5 } * zbox.xi_max;
            }
            let z = eval(&u);
            if z < best.1 {
                best = (u, z);
            }
        }
    }
    if !best.1.is_finite() {
        return Err(GaugeError::NotConverged(f64::INFINITY));
    }
    let steps = [0.25 * ll.max(0.05), 0.25 * zbox.xi_max.max(0.05), 0.25 * zbox.xi_max.max(0.05), 0.25 * zbox.xi_max.max(0.05), 0.25 * zbox.xi_max.max(0.05)];
    let (u, z) = nelder_mead(&mut eval, best.0, best.1, steps, 1e-7, 600);
    Ok(ZReport { map: ConformalMap::affine(u[0].exp(), Quaternion::new(u[1], u[2], u[3], u[4])), z, trace })
}

/// Nelder–Mead with standard coefficients, stopping when the simplex diameter is
/// below `xtol` or after `max_eval` evaluations.
fn nelder_mead<const N: usize>(
    f: &mut impl FnMut(&[f64; N]) -> f64,
    x0: [f64; N],
    f0: f64,
    steps: [f64; N],
    xtol: f64,
    max_eval: usize,
) -> ([f64; N], f64) {
    let mut simplex: Vec<([f64; N], f64)> = vec![(x0, f0)];
    for k in 0..N {
        let mut x = x0;
        x[k] += steps[k];
        simplex.push((x, f(&x)));
    }
    let mut evals = N;
    let lerp = |a: &[f64; N], b: &[f64; N], t: f64| -> [f64; N] { std::array::from_fn(|k| a[k] + t * (b[k] - a[k])) };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diam = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diam < xtol || evals >= max_eval {
            return simplex[0];
        }
        let centroid: [f64; N] = std::array::from_fn(|k| simplex[..N].iter().map(|(x, _)| x[k]).sum::<f64>() / N as f64);
        let worst = simplex[N];
        let xr = lerp(&centroid, &worst.0, -1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &worst.0, -2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = lerp(&centroid, &worst.0, -0.5);
                (x, f(&x))
            } else {
                let x = lerp(&centroid, &worst.0, 0.5);
                (x, f(&x))
            };
            evals += 1;
            if fc < worst.1.min(fr) {
                simplex[N] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    v.0 = lerp(&best, &v.0, 0.5);
                    v.1 = f(&v.0);
                }
                evals += N;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{gauge_act, perturb, GaugeBump, Perturbation};
    use crate::random::{random_perturbation, seeded_rng, uniform_ball, uniform_im};
    use rand::Rng;

    fn small(n: usize) -> CoulombConfig {
        CoulombConfig { lattice: Lattice4D::ball(3.0, n).unwrap(), ..CoulombConfig::default() }
    }

    fn decorated(seed: u64) -> ConnectionModel {
        let mut rng = seeded_rng(seed, 11);
        let bumps = (0..3)
            .map(|_| GaugeBump { center: uniform_ball(&mut rng, 0.5), width: 0.4, amplitude: uniform_im(&mut rng, 0.6) })
            .collect();
        gauge_act(GaugeTransform::Bumps(bumps), ConnectionModel::basic())
    }

    fn perturbed(seed: u64) -> ConnectionModel {
        let mut rng = seeded_rng(seed, 12);
        perturb(ConnectionModel::basic(), random_perturbation(&mut rng, 3, 0.1, 0.4, (0.3, 0.45)))
    }

    #[test]
    fn discrete_d_and_dstar_are_adjoint() {
        let f = Frame::new(&Lattice4D::ball(1.5, 9).unwrap());
        let mut rng = seeded_rng(1, 0);
        let mut delta = vec![ImQuaternion::ZERO; f.lattice.len()];
        for &k in &f.unknown {
            delta[k] = uniform_im(&mut rng, 1.0);
        }
        let mut ups = vec![GaugePotential::ZERO; f.lattice.len()];
        for &k in &f.inner {
            ups[k] = crate::random::random_potential(&mut rng, 1.0);
        }
        let lhs: f64 = f.d(&delta).iter().enumerate().map(|(k, a)| f.phi2[k] * a.dot_flat(&ups[k])).sum();
        let rhs = f.dot(&delta, &f.dstar(&ups, &f.unknown));
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} {rhs}");
    }

    #[test]
    fn dstar_of_zero_is_zero() {
        let lat = Lattice4D::ball(1.0, 7).unwrap();
        let out = dstar_against_basic(&lat, &vec![GaugePotential::ZERO; lat.len()]).unwrap();
        assert!(out.iter().all(|v| *v == ImQuaternion::ZERO));
    }

    #[test]
    fn dstar_matches_the_continuum_divergence_at_second_order() {
        let pert = Perturbation {
            bumps: vec![crate::gauge::PotentialBump {
                center: Quaternion::new(0.1, -0.2, 0.05, 0.15),
                width: 0.6,
                coefficients: [ImQuaternion::I * 0.3, ImQuaternion::J * -0.2, ImQuaternion::K * 0.25, ImQuaternion::new(0.1, 0.1, -0.1)],
            }],
        };
        // −φ⁻⁴ Σ_i (∂_i(φ²a_i) + [Γ̃_i, φ²a_i]) with ∂_iφ² = −16ζ_i/(1+|ζ|²)³
        let exact = |z: Quaternion| {
            let (a, da) = pert.value_and_derivative(z);
            let g = adhm_potential(Quaternion::ZERO, 1.0, ChartPoint::new(z));
            let s = z.norm2();
            let phi2 = 4.0 / (1.0 + s).powi(2);
            let za = z.to_array();
            let mut acc = ImQuaternion::ZERO;
            for i in 0..4 {
                acc += da[i][i] * phi2 + a.0[i] * (-16.0 * za[i] / (1.0 + s).powi(3)) + bracket(g.0[i], a.0[i] * phi2);
            }
            acc * (-1.0 / (phi2 * phi2))
        };
        let probe = Quaternion::new(0.25, 0.0, -0.25, 0.25);
        let mut errs = Vec::new();
        for n in [9, 17, 33] {
            let lat = Lattice4D::new(Quaternion::ZERO, 1.0, n).unwrap();
            let ups: Vec<GaugePotential> = (0..lat.len()).map(|k| pert.value_and_derivative(lat.coord(k)).0).collect();
            let out = dstar_against_basic(&lat, &ups).unwrap();
            let k = lat.locate(probe).unwrap();
            errs.push((out[k] - exact(probe)).norm());
        }
        let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        assert!(orders.iter().all(|o| *o > 1.8) && orders[1] > 1.9, "{errs:?}");
    }

    #[test]
    fn w_operator_conjugates_isometrically() {
        let lat = Lattice4D::ball(1.0, 5).unwrap();
        let c = perturbed(2);
        let zero = vec![ImQuaternion::ZERO; lat.len()];
        let ups = w_operator(&lat, &zero, &c).unwrap();
        let mut rng = seeded_rng(3, 0);
        let big: Vec<ImQuaternion> = (0..lat.len()).map(|_| uniform_im(&mut rng, 2.0)).collect();
        let w = w_operator(&lat, &big, &c).unwrap();
        for k in 0..lat.len() {
            let p = ChartPoint::new(lat.coord(k));
            let direct = c.potential(p).unwrap().sub(&adhm_potential(Quaternion::ZERO, 1.0, p));
            assert!(ups[k].sub(&direct).norm2_flat() < 1e-28);
            assert!((w[k].norm2_flat() - ups[k].norm2_flat()).abs() < 1e-12);
        }
        // W − (Υ − [σ, Υ]) = O(|σ|²)
        let dir: Vec<ImQuaternion> = (0..lat.len()).map(|_| uniform_im(&mut rng, 1.0)).collect();
        let mut prev = f64::INFINITY;
        for t in [1e-2, 5e-3] {
            let sig: Vec<ImQuaternion> = dir.iter().map(|v| *v * t).collect();
            let w = w_operator(&lat, &sig, &c).unwrap();
            let err = (0..lat.len())
                .map(|k| {
                    let lin = GaugePotential(std::array::from_fn(|i| ups[k].0[i] - bracket(sig[k], ups[k].0[i])));
                    w[k].sub(&lin).norm2_flat().sqrt()
                })
                .fold(0.0, f64::max);
            assert!(err < 10.0 * t * t);
            if prev.is_finite() {
                assert!(prev / err > 3.5, "{prev} {err}");
            }
            prev = err;
        }
    }

    #[test]
    fn basic_connection_is_its_own_projection() {
        let r = coulomb_project(&ConnectionModel::basic(), &small(9)).unwrap();
        assert_eq!(r.residual_history, vec![0.0]);
        assert!(r.sigma.iter().all(|s| *s == ImQuaternion::ZERO));
        assert_eq!(r.distance_to_basic().unwrap(), (0.0, 0.0));
    }

    #[test]
    fn gauge_decoration_is_undone() {
        let r = coulomb_project(&decorated(1), &small(12)).unwrap();
        assert!(r.final_residual() <= 1e-8, "{:?}", r.residual_history);
        let (a, b) = r.distance_to_basic().unwrap();
        assert!(a <= 1e-6 && b <= 1e-6, "{a} {b}");
        assert!(r.contraction_factors().iter().all(|q| *q < 0.5), "{:?}", r.residual_history);
        assert!(r.sigma_sup_history.last().unwrap() > &0.1);
    }

    #[test]
    fn projection_is_a_retraction() {
        let cfg = small(12);
        let first = coulomb_project(&perturbed(4), &cfg).unwrap();
        let mut rng = seeded_rng(9, 0);
        let t = GaugeTransform::Bumps(vec![GaugeBump { center: uniform_ball(&mut rng, 0.3), width: 0.4, amplitude: uniform_im(&mut rng, 0.5) }]);
        // the projecting gauge is harmonic out to the Dirichlet sphere, so Π̃[c] − ∇̃
        // is no longer supported inside 0.8R
        let again = coulomb_project(&gauge_act(t, first.connection()), &cfg.clone().relaxed()).unwrap();
        let diff: f64 = (0..cfg.lattice.len())
            .filter(|&k| cfg.lattice.is_active(k) && cfg.lattice.depth(k) >= 1)
            .map(|k| cfg.lattice.weight(k) * again.projected.values[k].sub(&first.projected.values[k]).norm2_round(cfg.lattice.coord(k)))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-7, "{diff}");
    }

    #[test]
    fn rotations_commute_with_the_projection() {
        let cfg = small(12);
        let gap = commute_check(&perturbed(5), &ConformalMap::rotation(Quaternion::basis(1), Quaternion::ONE), &cfg).unwrap();
        assert!(gap <= 10.0 * cfg.tol, "{gap}");
        assert_eq!(commute_check(&perturbed(5), &ConformalMap::identity(), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn dilation_gap_is_a_discretization_error() {
        // radial differences are Coulomb in the continuum, so Π̃[φ*∇̃] = φ*∇̃ there
        let m = ConformalMap::dilation(1.1);
        let coarse = commute_check(&ConnectionModel::basic(), &m, &small(12)).unwrap();
        let fine = commute_check(&ConnectionModel::basic(), &m, &small(16)).unwrap();
        assert!(coarse / fine > 1.8, "{coarse} {fine}");
    }

    #[test]
    fn unsupported_input_and_iteration_caps_are_reported() {
        let adhm = ConnectionModel::adhm(Quaternion::ZERO, 1.05).unwrap();
        assert!(matches!(coulomb_project(&adhm, &small(9)), Err(GaugeError::SupportViolation(_))));
        let r = coulomb_project(&adhm, &small(12).relaxed()).unwrap();
        assert!(r.final_residual() <= 1e-9);
        let ratio = r.bootstrap_ratio().unwrap();
        assert!(ratio > 0.0 && ratio.is_finite());
        let capped = CoulombConfig { max_outer: 1, ..small(12) };
        assert!(matches!(coulomb_project(&decorated(1), &capped), Err(GaugeError::MaxOuterExceeded(1))));
        let no_cg = CoulombConfig { cg_max_iter: 2, ..small(12) };
        assert!(matches!(coulomb_project(&decorated(1), &no_cg), Err(GaugeError::CgNotConverged(_))));
        assert!(coulomb_project(&adhm, &CoulombConfig { tol: 0.0, ..small(9) }).is_err());
    }

    #[test]
    fn gaugefix_log_has_one_row_per_outer_iteration() {
        let r = coulomb_project(&decorated(1), &small(9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gaugefix.csv");
        write_gaugefix_csv(std::fs::File::create(&path).unwrap(), &r).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], GAUGEFIX_CSV_HEADER);
        assert_eq!(lines.len(), r.residual_history.len() + 1);
        assert!(lines[1].starts_with("0,"));
    }

    #[test]
    fn nelder_mead_finds_a_shifted_quadratic() {
        let mut f = |x: &[f64; 3]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.1).powi(2) + 0.5 * (x[2] - 0.7).powi(2) + 0.1 * x[0] * x[2];
        let x0 = [0.0; 3];
        let f0 = f(&x0);
        let (x, _) = nelder_mead(&mut f, x0, f0, [0.2; 3], 1e-9, 2000);
        let mut rng = seeded_rng(0, 0);
        // compare with a brute-force check of first-order optimality
        for _ in 0..20 {
            let d: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1e-4..1e-4));
            let y = [x[0] + d[0], x[1] + d[1], x[2] + d[2]];
            assert!(f(&y) >= f(&x) - 1e-14);
        }
    }

    #[test]
    fn z_vanishes_at_the_identity_for_the_basic_connection() {
        let cfg = small(9).relaxed();
        assert_eq!(z_value(&ConnectionModel::basic(), &ConformalMap::identity(), &cfg).unwrap(), 0.0);
        let z = z_value(&ConnectionModel::basic(), &ConformalMap::affine(1.1, Quaternion::ZERO), &cfg).unwrap();
        assert!(z > 1e-4);
    }
}
