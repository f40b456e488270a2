//! Artifact commands: each writes one JSON document or CSV table.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use s4gauge::coulomb::{coulomb_project, write_gaugefix_csv, CoulombConfig};
use s4gauge::dilation::{profile_sweep, write_profile_csv, ProfileQuadrature};
use s4gauge::energy::{charge_from_hodge_split, lower_bound, self_dual_norm, topological_charge, ym_alpha_lambda, Quadrature};
use s4gauge::flow::{run_flow, write_trajectory_csv, FlowConfig};
use s4gauge::lattice::Lattice4D;
use s4gauge::quadrature::RadialGrid;
use s4gauge::random::seeded_rng;
use s4gauge::{ConnectionModel, GaugeError, Quaternion};

use crate::config::ConfigError;
use crate::suite::{gauge_decorated_basic, radial_perturbation};

pub const ALPHA_RANGE: (f64, f64) = (1.0, 2.0);
pub const LAMBDA_RANGE: (f64, f64) = (1.0, 1e4);

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn in_range(name: &str, v: f64, (lo, hi): (f64, f64)) -> Result<f64, String> {
    if v >= lo && v <= hi {
        Ok(v)
    } else {
        Err(format!("{name} = {v} is outside [{lo}, {hi}]"))
    }
}

fn number(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("{s:?} is not a number"))
}

pub fn parse_alpha(s: &str) -> Result<f64, String> {
    in_range("alpha", number(s)?, ALPHA_RANGE)
}

pub fn parse_lambda(s: &str) -> Result<f64, String> {
    in_range("lambda", number(s)?, LAMBDA_RANGE)
}

/// `start:end:count`, evenly spaced and inclusive of both ends.
pub fn parse_lambda_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(format!("{s:?} is not start:end:count"));
    };
    let (a, b) = (parse_lambda(a)?, parse_lambda(b)?);
    let n: usize = n.trim().parse().map_err(|_| format!("{n:?} is not a count"))?;
    match n {
        0 => Err("the grid needs at least one point".into()),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()),
    }
}

/// A center given as one number (on the real axis) or four comma-separated components.
pub fn parse_center(s: &str) -> Result<Quaternion, String> {
    let v = s.split(',').map(number).collect::<Result<Vec<f64>, String>>()?;
    match v.as_slice() {
        [w] => Ok(Quaternion::real(*w)),
        [w, x, y, z] => Ok(Quaternion::new(*w, *x, *y, *z)),
        _ => Err(format!("{s:?} needs 1 or 4 components")),
    }
}

pub fn parse_positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyOutput {
    pub alpha: f64,
    pub lambda: f64,
    pub center: [f64; 4],
    pub scale: f64,
    pub value: f64,
    pub residual: f64,
    pub grid: String,
    pub lower_bound: f64,
}

/// YM_{α,λ} of the ADHM instanton with the given center and scale.
pub fn energy(alpha: f64, center: Quaternion, scale: f64, lambda: f64, quad: &Quadrature) -> Result<EnergyOutput, CliError> {
    let c = ConnectionModel::adhm(center, scale)?;
    let r = ym_alpha_lambda(&c, alpha, lambda, quad)?;
    Ok(EnergyOutput {
        alpha,
        lambda,
        center: center.to_array(),
        scale,
        value: r.value,
        residual: r.residual,
        grid: r.grid,
        lower_bound: lower_bound(alpha),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChargeOutput {
    pub center: [f64; 4],
    pub scale: f64,
    pub charge: f64,
    pub charge_from_hodge_split: f64,
    pub self_dual_norm: f64,
}

pub fn charge(center: Quaternion, scale: f64, quad: &Quadrature) -> Result<ChargeOutput, CliError> {
    let c = ConnectionModel::adhm(center, scale)?;
    Ok(ChargeOutput {
        center: center.to_array(),
        scale,
        charge: topological_charge(&c, quad)?,
        charge_from_hodge_split: charge_from_hodge_split(&c, quad)?,
        self_dual_norm: self_dual_norm(&c, quad)?,
    })
}

pub fn profile<W: Write>(w: W, alpha: f64, lambdas: &[f64], pq: &ProfileQuadrature) -> Result<(), CliError> {
    let points = profile_sweep(alpha, lambdas, pq)?;
    write_profile_csv(w, &points)?;
    Ok(())
}

/// Flows a seeded radial perturbation of the basic connection with coefficients of
/// size `amplitude` and writes the trajectory.
pub fn flow<W: Write>(w: W, alpha: f64, amplitude: f64, seed: u64, nodes: usize, quad: &Quadrature) -> Result<(), CliError> {
    let cfg = FlowConfig { alpha, nodes, ..FlowConfig::default() };
    let mut rng = seeded_rng(seed, 0);
    let c0 = ConnectionModel::radial(radial_perturbation(&mut rng, &RadialGrid::new(nodes), amplitude)?);
    let run = run_flow(&c0, &cfg, quad)?;
    write_trajectory_csv(w, &run.trajectory)?;
    Ok(())
}

/// Projects a seeded gauge decoration of the basic connection and writes the iteration log.
pub fn gaugefix<W: Write>(w: W, amplitude: f64, seed: u64, nodes: usize, tol: f64) -> Result<(), CliError> {
    let cfg = CoulombConfig { lattice: Lattice4D::ball(3.0, nodes)?, tol, ..CoulombConfig::default() };
    let mut rng = seeded_rng(seed, 0);
    let r = coulomb_project(&gauge_decorated_basic(&mut rng, amplitude), &cfg)?;
    write_gaugefix_csv(w, &r)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_ranges() {
        assert_eq!(parse_alpha("1.5"), Ok(1.5));
        assert!(parse_alpha("2.5").is_err());
        assert!(parse_alpha("x").is_err());
        assert!(parse_lambda("0.5").is_err());
        assert!(parse_lambda("2e4").is_err());
        assert_eq!(parse_lambda_grid("1:10:4").unwrap(), vec![1.0, 4.0, 7.0, 10.0]);
        assert_eq!(parse_lambda_grid("1:10:20").unwrap().len(), 20);
        assert!(parse_lambda_grid("1:1e5:3").is_err());
        assert!(parse_lambda_grid("1:2").is_err());
        assert_eq!(parse_center("0").unwrap(), Quaternion::ZERO);
        assert_eq!(parse_center("1,2,3,4").unwrap(), Quaternion::new(1.0, 2.0, 3.0, 4.0));
        assert!(parse_center("1,2").is_err());
        assert!(parse_positive("0").is_err());
    }

    #[test]
    fn energy_of_the_basic_connection() {
        let out = energy(1.5, Quaternion::ZERO, 1.0, 1.0, &Quadrature::default()).unwrap();
        assert!((out.value / out.lower_bound - 1.0).abs() < 1e-8);
    }
}
