//! The Yang-Mills α-flow ∂_t∇ = −Grad YM_{α,λ}(∇) for the radial ansatz.
//!
//! The state is the profile q = (1+s)f on the nodes of a [`RadialGrid`]. The
//! energy that is descended is the node quadrature of the YM_{α,λ} density,
//! with q′ from the spectral differentiation matrix, and its gradient is the
//! exact derivative of that sum. Dividing by the lumped L² metric of the
//! ansatz, M_j = ¾ W_j s_j (|δA|²_ḡ = 3s(1+s)²/4·δf²), turns it into the L²
//! gradient of the connection.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::energy::{is_radial_ansatz, lp_difference_norm, topological_charge, Quadrature};
use crate::error::{GaugeError, Result};
use crate::gauge::{radial_curvature_from, ConnectionModel, RadialProfile};
use crate::quadrature::{pairwise_sum, RadialGrid, SphereGrid};
use crate::quaternion::Quaternion;
use crate::sphere::{chi_lambda, ChartPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    /// Armijo factor: a step must lower the energy by at least safety·dt·‖Grad‖².
    pub safety: f64,
    pub max_time: f64,
    pub grad_tol: f64,
    /// Relative change of the distance to ∇̃ allowed over the last 100 steps.
    pub dist_tol: f64,
    /// Interior profile nodes.
    pub nodes: usize,
    /// Trajectory rows are written every `log_every` accepted steps.
    pub log_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            alpha: 1.1,
            lambda: 1.0,
            dt_init: 0.05,
            dt_min: 1e-12,
            safety: 1e-4,
            max_time: 5e4,
            grad_tol: 1e-6,
            dist_tol: 1e-8,
            nodes: 16,
            log_every: 50,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        crate::energy::check_alpha_lambda(self.alpha, self.lambda)?;
        let positive = [self.dt_init, self.dt_min, self.max_time, self.grad_tol, self.dist_tol];
        if positive.iter().any(|v| !(*v > 0.0)) || self.dt_min > self.dt_init || !(self.safety >= 0.0) {
            return Err(GaugeError::InvalidParameter("flow step sizes and thresholds must be positive".into()));
        }
        if self.nodes < 4 || self.log_every == 0 {
            return Err(GaugeError::InvalidParameter("flow needs ≥ 4 nodes and log_every ≥ 1".into()));
        }
        Ok(())
    }
}

/// Node data that stays fixed along a flow.
#[derive(Clone, Debug, PartialEq)]
struct NodeFrame {
    s: Vec<f64>,
    v: Vec<f64>,
    weight: Vec<f64>,
    metric: Vec<f64>,
    chi: Vec<f64>,
    /// Differentiation matrix of the profile interpolant (interior nodes plus the pinned end).
    diff: Vec<Vec<f64>>,
}

impl NodeFrame {
    fn new(grid: &RadialGrid, profile: &RadialProfile, lambda: f64) -> Self {
        let n = grid.len();
        let u = &profile.u[..n];
        let v: Vec<f64> = u.iter().map(|x| 1.0 - x).collect();
        let s: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a / b).collect();
        let weight: Vec<f64> = (0..n).map(|k| grid.volume_weight(k)).collect();
        let metric = (0..n).map(|k| 0.75 * weight[k] * s[k]).collect();
        let chi = s.iter().map(|&x| chi_lambda(ChartPoint::radial(x.sqrt()), lambda)).collect();
        NodeFrame { s, v, weight, metric, chi, diff: profile.differentiation_matrix() }
    }

    fn f_and_fp(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.s.len();
        let mut f = vec![0.0; n];
        let mut fp = vec![0.0; n];
        for k in 0..n {
            // the pinned end q = 1 is the last column
            let dq: f64 = (0..n).map(|j| self.diff[k][j] * q[j]).sum::<f64>() + self.diff[k][n];
            f[k] = q[k] * self.v[k];
            fp[k] = (dq * self.v[k] - q[k]) * self.v[k] * self.v[k];
        }
        (f, fp)
    }
}

/// Discrete energy, its q-gradient (coefficient form) and the L² gradient.
fn energy_and_gradient(frame: &NodeFrame, q: &[f64], alpha: f64) -> (f64, Vec<f64>) {
    let n = q.len();
    let (f, fp) = frame.f_and_fp(q);
    let mut e = vec![0.0; n];
    let mut e_f = vec![0.0; n];
    let mut e_fp = vec![0.0; n];
    for k in 0..n {
        let s = frame.s[k];
        let chi = frame.chi[k];
        let a = f[k] + s * fp[k];
        let b = f[k] * (1.0 - s * f[k]);
        let cs = 24.0 * chi * (1.0 + s).powi(4) / 16.0;
        let p = 3.0 + cs * (a * a + b * b);
        e[k] = frame.weight[k] * 0.5 * p.powf(alpha) / chi;
        let de_dp = frame.weight[k] * 0.5 * alpha * p.powf(alpha - 1.0) / chi;
        e_f[k] = de_dp * cs * (2.0 * a + 2.0 * b * (1.0 - 2.0 * s * f[k]));
        e_fp[k] = de_dp * cs * 2.0 * a * s;
    }
    let big_a: Vec<f64> = (0..n).map(|k| e_fp[k] * frame.v[k] * frame.v[k]).collect();
    let grad = (0..n)
        .map(|j| {
            let mut g = e_f[j] * frame.v[j] - big_a[j];
            for k in 0..n {
                g += big_a[k] * frame.v[k] * frame.diff[k][j];
            }
            g / frame.metric[j]
        })
        .collect();
    (pairwise_sum(&e), grad)
}

fn metric_norm(frame: &NodeFrame, g: &[f64]) -> f64 {
    g.iter().zip(&frame.metric).map(|(x, m)| m * x * x).sum::<f64>().sqrt()
}

/// (‖c − ∇̃‖, ‖F_c − F_∇̃‖) in round L² from node values of q.
fn node_distances(frame: &NodeFrame, q: &[f64]) -> (f64, f64) {
    let (f, fp) = frame.f_and_fp(q);
    let mut conn = 0.0;
    let mut curv = 0.0;
    for k in 0..q.len() {
        conn += frame.metric[k] * (q[k] - 1.0).powi(2);
        let z = Quaternion::real(frame.s[k].sqrt());
        let basic_f = 1.0 / (1.0 + frame.s[k]);
        let basic_fp = -basic_f * basic_f;
        let d = radial_curvature_from(f[k], fp[k], z).sub(&radial_curvature_from(basic_f, basic_fp, z));
        curv += frame.weight[k] * d.norm2_round(z);
    }
    (conn.sqrt(), curv.sqrt())
}

/// One logged point of a flow trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub dt: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub dist_conn: f64,
    pub dist_curv: f64,
    pub charge: f64,
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,dt,energy,grad_norm,dist_conn,dist_curv,charge";

impl TrajectoryRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.12e},{:.6e},{:.15e},{:.6e},{:.6e},{:.6e},{:.12}",
            self.t, self.dt, self.energy, self.grad_norm, self.dist_conn, self.dist_curv, self.charge
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub grid: RadialGrid,
    pub profile: RadialProfile,
    pub t: f64,
    pub dt: f64,
    pub steps: usize,
    pub energy: f64,
    pub grad_norm: f64,
    /// Largest step RK4 takes stably: 2/λ_max of the linearized flow at the start.
    pub dt_cap: f64,
    /// (t, energy) after every accepted step.
    pub energy_history: Vec<(f64, f64)>,
    pub grad_history: Vec<f64>,
    /// (‖c − ∇̃‖, ‖F_c − F_∇̃‖) after every accepted step.
    pub distance_history: Vec<(f64, f64)>,
    frame: NodeFrame,
}

impl FlowState {
    pub fn new(profile: RadialProfile, grid: RadialGrid, cfg: &FlowConfig) -> Result<Self> {
        cfg.validate()?;
        if profile.interior().len() != grid.len() {
            return Err(GaugeError::InvalidParameter("profile does not live on the flow grid".into()));
        }
        let frame = NodeFrame::new(&grid, &profile, cfg.lambda);
        let (energy, g) = energy_and_gradient(&frame, profile.interior(), cfg.alpha);
        let grad_norm = metric_norm(&frame, &g);
        let dist = node_distances(&frame, profile.interior());
        let dt_cap = cfg.dt_init.min(2.0 / stiffness(&frame, profile.interior(), cfg.alpha)).max(cfg.dt_min);
        Ok(FlowState {
            grid,
            profile,
            t: 0.0,
            dt: dt_cap,
            steps: 0,
            energy,
            grad_norm,
            dt_cap,
            energy_history: vec![(0.0, energy)],
            grad_history: vec![grad_norm],
            distance_history: vec![dist],
            frame,
        })
    }

    /// The state of a radial-ansatz model sampled on a grid of `cfg.nodes` nodes.
    pub fn from_model(c: &ConnectionModel, cfg: &FlowConfig) -> Result<Self> {
        let grid = RadialGrid::new(cfg.nodes);
        FlowState::new(radial_profile_of(c, &grid)?, grid, cfg)
    }

    pub fn connection(&self) -> ConnectionModel {
        ConnectionModel::radial(self.profile.clone())
    }

    pub fn distance(&self) -> (f64, f64) {
        *self.distance_history.last().expect("history starts non-empty")
    }

    fn row(&self, quad: &Quadrature) -> Result<TrajectoryRow> {
        let (dist_conn, dist_curv) = self.distance();
        Ok(TrajectoryRow {
            t: self.t,
            dt: self.dt,
            energy: self.energy,
            grad_norm: self.grad_norm,
            dist_conn,
            dist_curv,
            charge: topological_charge(&self.connection(), quad)?,
        })
    }
}

/// Samples f(s) = Γ₂(r)·i / r on the real axis for models of radial-ansatz form.
pub fn radial_profile_of(c: &ConnectionModel, grid: &RadialGrid) -> Result<RadialProfile> {
    if let ConnectionModel::Radial(p) = c {
        if p.interior().len() == grid.len() && p.u.iter().zip(&grid.theta).all(|(u, t)| *u == (0.5 * t).sin().powi(2)) {
            return Ok((**p).clone());
        }
    }
    if !is_radial_ansatz(c) {
        return Err(GaugeError::InvalidParameter("the radial flow needs a connection of radial-ansatz form".into()));
    }
    let q: Result<Vec<f64>> = (0..grid.len())
        .map(|k| {
            let r = grid.radius(k);
            let g = c.potential(ChartPoint::radial(r))?;
            // Im(ζ̄ e₁) = r·i on the real axis
            Ok(g.0[1].x / r * (1.0 + r * r))
        })
        .collect();
    RadialProfile::from_interior(grid, &q?)
}

fn rk4_update(frame: &NodeFrame, q: &[f64], k1: &[f64], dt: f64, alpha: f64) -> Vec<f64> {
    let shift = |base: &[f64], k: &[f64], c: f64| -> Vec<f64> { base.iter().zip(k).map(|(a, b)| a - c * b).collect() };
    let k2 = energy_and_gradient(frame, &shift(q, k1, 0.5 * dt), alpha).1;
    let k3 = energy_and_gradient(frame, &shift(q, &k2, 0.5 * dt), alpha).1;
    let k4 = energy_and_gradient(frame, &shift(q, &k3, dt), alpha).1;
    (0..q.len()).map(|j| q[j] - dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])).collect()
}

/// Largest eigenvalue of the linearized L² gradient at q, by power iteration on
/// directional differences of the gradient. RK4 is stable for dt·λ ≤ 2.78.
fn stiffness(frame: &NodeFrame, q: &[f64], alpha: f64) -> f64 {
    let n = q.len();
    let g0 = energy_and_gradient(frame, q, alpha).1;
    let mut v: Vec<f64> = (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut lam = 0.0;
    for _ in 0..60 {
        let nv = metric_norm(frame, &v);
        v.iter_mut().for_each(|x| *x /= nv);
        let eps = 1e-6;
        let qp: Vec<f64> = q.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
        let g1 = energy_and_gradient(frame, &qp, alpha).1;
        let hv: Vec<f64> = g1.iter().zip(&g0).map(|(a, b)| (a - b) / eps).collect();
        let next = metric_norm(frame, &hv);
        let done = (next - lam).abs() <= 1e-4 * next;
        lam = next;
        v = hv;
        if done {
            break;
        }
    }
    lam
}

/// One RK4 step of the negative gradient flow, halving dt until the energy drops by
/// the Armijo margin; after acceptance dt grows by 1.25 up to the stability cap.
pub fn flow_step(s: &mut FlowState, cfg: &FlowConfig) -> Result<()> {
    let q = s.profile.interior().to_vec();
    let (e0, k1) = energy_and_gradient(&s.frame, &q, cfg.alpha);
    let g2 = metric_norm(&s.frame, &k1).powi(2);
    let mut dt = s.dt;
    loop {
        let q_new = rk4_update(&s.frame, &q, &k1, dt, cfg.alpha);
        let (e1, g_new) = energy_and_gradient(&s.frame, &q_new, cfg.alpha);
        // a relative slack of 1e-13 absorbs rounding once the gradient is tiny
        let accept = e1.is_finite() && e1 <= e0 - cfg.safety * dt * g2 + 1e-13 * e0.abs();
        if accept {
            s.profile = s.profile.with_interior(&q_new);
            s.t += dt;
            s.dt = (1.25 * dt).min(s.dt_cap);
            s.steps += 1;
            s.energy = e1;
            s.grad_norm = metric_norm(&s.frame, &g_new);
            s.energy_history.push((s.t, e1));
            s.grad_history.push(s.grad_norm);
            s.distance_history.push(node_distances(&s.frame, &q_new));
            return Ok(());
        }
        dt *= 0.5;
        if dt < cfg.dt_min {
            return Err(GaugeError::StepRejectedAtMinimum(dt));
        }
    }
}

fn distance_stabilized(s: &FlowState, dist_tol: f64) -> bool {
    let h = &s.distance_history;
    if h.len() <= 100 {
        return false;
    }
    let (now, then) = (h[h.len() - 1].0, h[h.len() - 101].0);
    (now - then).abs() <= dist_tol * now + 1e-14
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowRun {
    pub state: FlowState,
    pub trajectory: Vec<TrajectoryRow>,
}

/// Runs the flow until the gradient norm is below `grad_tol` and the distance to ∇̃
/// has stabilized, logging every `log_every` steps and the final state.
pub fn run_flow(c0: &ConnectionModel, cfg: &FlowConfig, quad: &Quadrature) -> Result<FlowRun> {
    let mut state = FlowState::from_model(c0, cfg)?;
    let mut trajectory = vec![state.row(quad)?];
    loop {
        if state.grad_norm <= cfg.grad_tol && distance_stabilized(&state, cfg.dist_tol) {
            if trajectory.last().map(|r| r.t) != Some(state.t) {
                trajectory.push(state.row(quad)?);
            }
            return Ok(FlowRun { state, trajectory });
        }
        if state.t >= cfg.max_time {
            return Err(GaugeError::NotConverged(state.t));
        }
        flow_step(&mut state, cfg)?;
        if state.steps % cfg.log_every == 0 {
            trajectory.push(state.row(quad)?);
        }
    }
}

pub fn write_trajectory_csv<W: Write>(mut w: W, rows: &[TrajectoryRow]) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// (‖c − ∇̃‖_{L²}, ‖F_c − F_∇̃‖_{L²}) in the chart gauge of `c`. Radial-ansatz models
/// use the polar rule, others the product rule on S⁴.
pub fn distance_to_basic(c: &ConnectionModel, quad: &Quadrature) -> Result<(f64, f64)> {
    let basic = ConnectionModel::basic();
    let density = |z: Quaternion| -> Result<f64> {
        let p = ChartPoint::new(z);
        Ok(c.potential(p)?.sub(&basic.potential(p)?).norm2_round(z))
    };
    let conn = if is_radial_ansatz(c) {
        let grid = RadialGrid::new(quad.radial_nodes);
        let parts: Result<Vec<f64>> =
            (0..grid.len()).map(|k| Ok(grid.volume_weight(k) * density(Quaternion::real(grid.radius(k)))?)).collect();
        pairwise_sum(&parts?)
    } else {
        integrate_sphere(&quad.sphere, &density)?
    };
    let curv = lp_difference_norm(c, &basic, 2.0, quad)?;
    Ok((conn.max(0.0).sqrt(), curv))
}

fn integrate_sphere(grid: &SphereGrid, g: &(impl Fn(Quaternion) -> Result<f64> + Sync)) -> Result<f64> {
    let failed = std::sync::Mutex::new(None);
    let v = grid.integrate(|z| match g(z) {
        Ok(x) => x,
        Err(e) => {
            failed.lock().unwrap().get_or_insert(e);
            0.0
        }
    });
    match failed.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Relative size of the part of the full 4D lattice gradient that leaves the radial
/// ansatz: at each node the gradient is split against the ansatz direction Im(ζ̄e_i).
pub fn ansatz_closure_residual(c: &ConnectionModel, alpha: f64, lambda: f64, lattice: &crate::lattice::Lattice4D, order: usize) -> Result<f64> {
    use crate::gauge::LatticeConnection;
    use crate::variational::{gradient_lattice, interior_nodes};
    let lc = LatticeConnection::sample(c, lattice, order)?;
    let nodes: Vec<usize> = interior_nodes(lattice, 2 * crate::lattice::Lattice4D::reach(order))
        .into_iter()
        .filter(|&k| lattice.coord(k).norm2() > 0.0)
        .collect();
    let mut perp = Vec::with_capacity(nodes.len());
    let mut full = Vec::with_capacity(nodes.len());
    for &k in &nodes {
        let z = lattice.coord(k);
        let g = gradient_lattice(&lc, alpha, lambda, k)?.total;
        let a: [crate::quaternion::ImQuaternion; 4] = std::array::from_fn(|i| (z.conj() * Quaternion::basis(i)).im());
        let aa: f64 = a.iter().map(|x| x.norm2()).sum();
        let c: f64 = (0..4).map(|i| g.0[i].dot(a[i])).sum::<f64>() / aa;
        let w = crate::forms::conformal_factor(z).powi(2);
        let res: f64 = (0..4).map(|i| (g.0[i] - a[i] * c).norm2()).sum();
        perp.push(w * res);
        full.push(w * g.norm2_flat());
    }
    let total = pairwise_sum(&full);
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok((pairwise_sum(&perp) / total).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{lower_bound, ym_alpha_lambda};
    use crate::gauge::pullback;
    use crate::sphere::ConformalMap;

    fn quick() -> FlowConfig {
        FlowConfig::default()
    }

    #[test]
    fn discrete_energy_matches_quadrature_and_gradient_is_exact() {
        let cfg = FlowConfig { nodes: 32, ..quick() };
        let grid = RadialGrid::new(cfg.nodes);
        let prof = RadialProfile::from_q_fn(&grid, |u| 1.0 + 0.2 * u * (1.0 - u) * (3.0 * u).sin()).unwrap();
        for (alpha, lambda) in [(1.1, 1.0), (1.6, 1.7)] {
            let c = FlowConfig { alpha, lambda, ..cfg.clone() };
            let st = FlowState::new(prof.clone(), grid.clone(), &c).unwrap();
            let e = ym_alpha_lambda(&st.connection(), alpha, lambda, &Quadrature::default()).unwrap().value;
            assert!((st.energy / e - 1.0).abs() < 1e-7, "{} {}", st.energy, e);
            let q = prof.interior().to_vec();
            let (_, g) = energy_and_gradient(&st.frame, &q, alpha);
            let central = |j: usize, h: f64| {
                let mut qp = q.clone();
                qp[j] += h;
                let mut qm = q.clone();
                qm[j] -= h;
                (energy_and_gradient(&st.frame, &qp, alpha).0 - energy_and_gradient(&st.frame, &qm, alpha).0) / (2.0 * h)
            };
            for j in [0, 7, 19, 31] {
                // Richardson-extrapolated: the end nodes are stiff, so plain central
                // differences carry a visible O(h²) term
                let fd = (4.0 * central(j, 5e-6) - central(j, 1e-5)) / 3.0;
                let an = g[j] * st.frame.metric[j];
                // an O(10²) energy leaves ~1e-8 rounding noise in the differences
                assert!((fd - an).abs() <= 1e-6 * an.abs() + 1e-7, "node {j}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn basic_connection_is_a_fixed_point() {
        let cfg = quick();
        let st = FlowState::from_model(&ConnectionModel::basic(), &cfg).unwrap();
        assert!(st.grad_norm < 1e-10, "{}", st.grad_norm);
        let mut next = st.clone();
        flow_step(&mut next, &cfg).unwrap();
        let d = next.profile.interior().iter().map(|q| (q - 1.0).abs()).fold(0.0, f64::max);
        assert!(d < 1e-10);
        assert!(next.t > st.t);
        let run = run_flow(&ConnectionModel::basic(), &cfg, &Quadrature::default()).unwrap();
        assert!(run.state.steps <= 101);
        assert!((run.state.energy / lower_bound(1.1) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_state_only_advances_time() {
        // at λ = 1 the gradient of the basic profile vanishes to rounding
        let cfg = FlowConfig { grad_tol: 1.0, ..quick() };
        let st = FlowState::from_model(&ConnectionModel::basic(), &cfg).unwrap();
        let mut next = st.clone();
        flow_step(&mut next, &cfg).unwrap();
        assert_eq!(next.steps, 1);
        for (a, b) in next.profile.interior().iter().zip(st.profile.interior()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dilated_start_flows_back_monotonically() {
        let cfg = quick();
        let c0 = ConnectionModel::adhm(Quaternion::ZERO, 1.05).unwrap();
        let run = run_flow(&c0, &cfg, &Quadrature::default()).unwrap();
        let s = &run.state;
        eprintln!("steps {} t {} E-LB {:e} dist {:?}", s.steps, s.t, s.energy - lower_bound(1.1), s.distance());
        for w in s.energy_history.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-10);
        }
        assert!(s.distance().0 <= 1e-3);
        assert!((s.energy - lower_bound(1.1)).abs() <= 1e-4);
        for r in &run.trajectory {
            assert!((r.charge - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn dilated_basic_is_stationary_for_its_own_lambda() {
        let cfg = FlowConfig { lambda: 2.0, ..quick() };
        let c0 = pullback(ConformalMap::dilation(2.0), ConnectionModel::basic());
        let run = run_flow(&c0, &cfg, &Quadrature::default()).unwrap();
        assert!(run.state.grad_norm <= cfg.grad_tol);
    }

    #[test]
    fn distances_vanish_at_basic_and_grow_linearly() {
        let quad = Quadrature::default();
        let (a, b) = distance_to_basic(&ConnectionModel::basic(), &quad).unwrap();
        assert!(a == 0.0 && b < 1e-12);
        let d1 = distance_to_basic(&ConnectionModel::adhm(Quaternion::ZERO, 1.01).unwrap(), &quad).unwrap();
        let d2 = distance_to_basic(&ConnectionModel::adhm(Quaternion::ZERO, 1.02).unwrap(), &quad).unwrap();
        assert!((d2.0 / d1.0 - 2.0).abs() < 0.05 && (d2.1 / d1.1 - 2.0).abs() < 0.05, "{d1:?} {d2:?}");
    }

    #[test]
    fn radial_data_keeps_the_lattice_gradient_in_the_ansatz() {
        let grid = RadialGrid::new(32);
        let prof = RadialProfile::from_q_fn(&grid, |u| 1.0 + 0.1 * u * (1.0 - u)).unwrap();
        let lat = crate::lattice::Lattice4D::new(Quaternion::new(0.05, 0.03, -0.02, 0.01), 1.5, 17).unwrap();
        let r = ansatz_closure_residual(&ConnectionModel::radial(prof), 1.1, 1.0, &lat, 8).unwrap();
        eprintln!("closure {r:e}");
        assert!(r <= 1e-3);
    }
}

