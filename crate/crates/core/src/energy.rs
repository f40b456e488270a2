//! The Yang-Mills energies, curvature L^p norms and the topological charge.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GaugeError, Result};
use crate::forms::CurvatureField;
use crate::gauge::{ConnectionModel, LatticeConnection};
use crate::quadrature::{pairwise_sum, RadialGrid, SphereGrid};
use crate::quaternion::Quaternion;
use crate::sphere::{chi_lambda, hodge_split, two_form_weight, ChartPoint};

/// 6^α·(4/3)π², the minimum of YM_α over the charge-one bundle.
pub fn lower_bound(alpha: f64) -> f64 {
    6f64.powf(alpha) * 4.0 / 3.0 * PI * PI
}

/// Quadrature settings shared by every integral over S⁴.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub radial_nodes: usize,
    pub sphere: SphereGrid,
    /// Relative residual above which an integral is reported as not converged.
    pub tol: f64,
    /// Grid refinements tried before giving up: the radial rule doubles, the sphere
    /// rule grows by 4/3 per direction. The residual compares consecutive grids.
    pub max_refinements: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { radial_nodes: 96, sphere: SphereGrid::default(), tol: 1e-8, max_refinements: 3 }
    }
}

impl Quadrature {
    pub fn with_tol(tol: f64) -> Self {
        Quadrature { tol, ..Quadrature::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub value: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub residual: f64,
    pub grid: String,
}

/// An integral with its residual estimate and the grid it used.
#[derive(Clone, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub residual: f64,
    pub grid: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Route {
    Radial,
    Sphere,
    Lattice,
}

fn route_for(models: &[&ConnectionModel]) -> Route {
    if models.iter().any(|c| matches!(c, ConnectionModel::Lattice(_))) {
        Route::Lattice
    } else if models.len() == 1 && models[0].has_radial_density() {
        Route::Radial
    } else if models.iter().all(|c| is_radial_ansatz(c)) {
        Route::Radial
    } else {
        Route::Sphere
    }
}

/// Models whose curvature is the radial ansatz in the fixed chart gauge, so pointwise
/// differences between two of them are radial too.
pub(crate) fn is_radial_ansatz(c: &ConnectionModel) -> bool {
    match c {
        ConnectionModel::Flat | ConnectionModel::Radial(_) => true,
        ConnectionModel::Adhm { xi, .. } => xi.norm2() == 0.0,
        ConnectionModel::Pulledback { base, map } => {
            map.eps == 0
                && map.xi1.norm2() == 0.0
                && map.xi2.norm2() == 0.0
                && map.rot == (Quaternion::ONE, Quaternion::ONE)
                && is_radial_ansatz(base)
        }
        _ => false,
    }
}

/// ∫_{S⁴} g dV_ḡ where g is built from the curvatures of `models` at a chart point.
pub fn integrate_curvatures<G>(models: &[&ConnectionModel], quad: &Quadrature, g: G) -> Result<Integral>
where
    G: Fn(ChartPoint, &[CurvatureField]) -> f64 + Sync,
{
    let eval = |p: ChartPoint| -> Result<f64> {
        let fs: Result<Vec<CurvatureField>> = models.iter().map(|c| c.curvature(p)).collect();
        Ok(g(p, &fs?))
    };
    let converged = |i: &Integral| i.residual <= quad.tol * i.value.abs().max(1.0);
    // two rules agreeing to the last bit still carry rounding error
    let finish = |value: f64, prev: f64, grid: String| Integral {
        value,
        residual: (value - prev).abs().max(4.0 * f64::EPSILON * value.abs()),
        grid,
    };
    let out = match route_for(models) {
        Route::Radial => {
            let mut n = quad.radial_nodes;
            let mut prev = radial_sum(&RadialGrid::new((n / 2).max(2)), &eval)?;
            let mut level = 0;
            loop {
                let fine = RadialGrid::new(n);
                let out = finish(radial_sum(&fine, &eval)?, prev, fine.descriptor());
                if converged(&out) || level == quad.max_refinements {
                    break out;
                }
                prev = out.value;
                n *= 2;
                level += 1;
            }
        }
        Route::Sphere => {
            let mut grid = quad.sphere.clone();
            let mut prev = sphere_sum(&grid.coarsened(), &eval)?;
            let mut level = 0;
            loop {
                let out = finish(sphere_sum(&grid, &eval)?, prev, grid.descriptor());
                if converged(&out) || level == quad.max_refinements {
                    break out;
                }
                prev = out.value;
                let up = |n: usize| (4 * n).div_ceil(3);
                grid = SphereGrid::new(up(grid.n_theta), up(grid.n_v), up(grid.n_phi));
                level += 1;
            }
        }
        Route::Lattice => {
            let lat = models
                .iter()
                .find_map(|c| match c {
                    ConnectionModel::Lattice(l) => Some(l.clone()),
                    _ => None,
                })
                .expect("lattice route has a lattice model");
            let out = lattice_sum(&lat, &eval)?;
            finish(out.value, out.value + out.residual, out.grid)
        }
    };
    if !converged(&out) {
        return Err(GaugeError::QuadratureNotConverged { residual: out.residual, requested: quad.tol });
    }
    Ok(out)
}

fn radial_sum<E: Fn(ChartPoint) -> Result<f64> + Sync>(grid: &RadialGrid, eval: &E) -> Result<f64> {
    let parts: Result<Vec<f64>> =
        (0..grid.len()).into_par_iter().map(|k| Ok(grid.volume_weight(k) * eval(ChartPoint::radial(grid.radius(k)))?)).collect();
    Ok(pairwise_sum(&parts?))
}

fn sphere_sum<E: Fn(ChartPoint) -> Result<f64> + Sync>(grid: &SphereGrid, eval: &E) -> Result<f64> {
    // the grid integrator takes infallible closures; carry the first error out of band
    let failed = std::sync::Mutex::new(None);
    let v = grid.integrate(|z| match eval(ChartPoint::new(z)) {
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

/// Sum over active lattice nodes whose stencils fit; residual against the
/// every-other-node sublattice.
fn lattice_sum<E: Fn(ChartPoint) -> Result<f64> + Sync>(lat: &LatticeConnection, eval: &E) -> Result<Integral> {
    let l = &lat.lattice;
    let reach = crate::lattice::Lattice4D::reach(lat.order);
    let terms: Vec<(usize, f64)> = (0..l.len())
        .into_par_iter()
        .filter(|&k| l.is_active(k) && l.depth(k) >= reach)
        .map(|k| Ok((k, l.weight(k) * eval(ChartPoint::new(l.coord(k)))?)))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<f64> = terms.iter().map(|t| t.1).collect();
    let sub: Vec<f64> = terms
        .iter()
        .filter(|(k, _)| l.multi_index(*k).iter().all(|m| m % 2 == 0))
        .map(|t| 16.0 * t.1)
        .collect();
    let a = pairwise_sum(&all);
    let b = pairwise_sum(&sub);
    Ok(Integral {
        value: a,
        residual: (a - b).abs(),
        grid: format!("lattice-n{}-h{:.4}", l.n, l.spacing()),
    })
}

/// YM(∇) = ½∫|F|²_ḡ dV_ḡ.
pub fn ym_energy(c: &ConnectionModel, quad: &Quadrature) -> Result<EnergyReport> {
    let i = integrate_curvatures(&[c], quad, |p, f| 0.5 * f[0].norm2_round(p.zeta))?;
    Ok(EnergyReport { value: i.value, alpha: 1.0, lambda: 1.0, residual: i.residual, grid: i.grid })
}

/// YM_α(∇) = ½∫(3+|F|²_ḡ)^α dV_ḡ.
pub fn ym_alpha(c: &ConnectionModel, alpha: f64, quad: &Quadrature) -> Result<EnergyReport> {
    ym_alpha_lambda(c, alpha, 1.0, quad)
}

/// YM_{α,λ}(∇) = ½∫(3+χ_λ|F|²_ḡ)^α χ_λ⁻¹ dV_ḡ.
pub fn ym_alpha_lambda(c: &ConnectionModel, alpha: f64, lambda: f64, quad: &Quadrature) -> Result<EnergyReport> {
    check_alpha_lambda(alpha, lambda)?;
    let i = integrate_curvatures(&[c], quad, |p, f| {
        let chi = chi_lambda(p, lambda);
        0.5 * (3.0 + chi * f[0].norm2_round(p.zeta)).powf(alpha) / chi
    })?;
    Ok(EnergyReport { value: i.value, alpha, lambda, residual: i.residual, grid: i.grid })
}

pub(crate) fn check_alpha_lambda(alpha: f64, lambda: f64) -> Result<()> {
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(GaugeError::InvalidParameter(format!("alpha = {alpha} must be ≥ 1")));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(GaugeError::InvalidParameter(format!("lambda = {lambda} must be > 0")));
    }
    Ok(())
}

/// Pointwise density of tr(F∧F) against d⁴ζ, with tr(ab) = −2⟨a,b⟩ on Im ℍ.
pub fn charge_density_flat(f: &CurvatureField) -> f64 {
    -0.5 * f.wedge_density()
}

/// (1/8π²)∫tr(F∧F).
pub fn topological_charge(c: &ConnectionModel, quad: &Quadrature) -> Result<f64> {
    Ok(topological_charge_integral(c, quad)?.value)
}

pub fn topological_charge_integral(c: &ConnectionModel, quad: &Quadrature) -> Result<Integral> {
    integrate_curvatures(&[c], quad, |p, f| charge_density_flat(&f[0]) * two_form_weight(p) / (8.0 * PI * PI))
}

/// (1/8π²)∫(|F⁻|² − |F⁺|²) dV_ḡ, the same number through the Hodge split.
pub fn charge_from_hodge_split(c: &ConnectionModel, quad: &Quadrature) -> Result<f64> {
    Ok(integrate_curvatures(&[c], quad, |p, f| {
        let (plus, minus) = hodge_split(&f[0], p);
        (minus.norm2_round(p.zeta) - plus.norm2_round(p.zeta)) / (8.0 * PI * PI)
    })?
    .value)
}

/// ‖F⁺‖_{L²}.
pub fn self_dual_norm(c: &ConnectionModel, quad: &Quadrature) -> Result<f64> {
    let i = integrate_curvatures(&[c], quad, |p, f| hodge_split(&f[0], p).0.norm2_round(p.zeta))?;
    Ok(i.value.max(0.0).sqrt())
}

/// (∫|F|^p_ḡ dV_ḡ)^{1/p}.
pub fn lp_curvature_norm(c: &ConnectionModel, p: f64, quad: &Quadrature) -> Result<f64> {
    check_exponent(p)?;
    let i = integrate_curvatures(&[c], quad, |pt, f| f[0].norm2_round(pt.zeta).powf(0.5 * p))?;
    Ok(i.value.max(0.0).powf(1.0 / p))
}

/// (∫|F₁ − F₂|^p_ḡ dV_ḡ)^{1/p} with both curvatures in the chart gauge.
pub fn lp_difference_norm(c1: &ConnectionModel, c2: &ConnectionModel, p: f64, quad: &Quadrature) -> Result<f64> {
    check_exponent(p)?;
    let i = integrate_curvatures(&[c1, c2], quad, |pt, f| f[0].sub(&f[1]).norm2_round(pt.zeta).powf(0.5 * p))?;
    Ok(i.value.max(0.0).powf(1.0 / p))
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(GaugeError::InvalidParameter(format!("exponent {p} must be ≥ 1")));
    }
    Ok(())
}
