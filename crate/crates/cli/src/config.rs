//! Suite configuration: a flat `key = value` file (TOML syntax, no tables) plus
//! `key=value` overrides from the command line.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use s4gauge::coulomb::CoulombConfig;
use s4gauge::dilation::ProfileQuadrature;
use s4gauge::energy::Quadrature;
use s4gauge::lattice::Lattice4D;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("malformed override {0:?}, expected key=value")]
    Override(String),
    #[error("invalid config value: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Every random draw in the suite derives from this seed.
    pub seed: u64,
    /// Relative residual accepted from the S⁴ quadratures.
    pub quadrature_tol: f64,
    /// Relative residual accepted from the one-dimensional profile integrals.
    pub profile_tol: f64,
    /// Nodes per axis of the Jacobi lattice; the refinement partner uses 3 fewer.
    pub lattice_nodes: usize,
    /// Interior profile nodes of the radial flow.
    pub flow_nodes: usize,
    /// Nodes per axis of the Coulomb lattice on the ball of radius 3.
    pub coulomb_nodes: usize,
    pub coulomb_tol: f64,
    /// Lattice of the conformal minimization, on the ball of radius `z_radius`.
    pub z_nodes: usize,
    pub z_radius: f64,
    /// Random connections tested against the lower bound.
    pub random_connections: usize,
    /// Criteria to run, 1 through 12.
    pub criteria: Vec<u32>,
    /// Wall-clock times make reports differ between runs, so they are opt-in.
    pub record_runtime: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 20_241_019,
            quadrature_tol: 1e-8,
            profile_tol: 1e-10,
            lattice_nodes: 32,
            flow_nodes: 16,
            coulomb_nodes: 16,
            coulomb_tol: 1e-9,
            z_nodes: 12,
            z_radius: 2.0,
            random_connections: 200,
            criteria: (1..=12).collect(),
            record_runtime: false,
        }
    }
}

impl SuiteConfig {
    pub fn from_str_with_overrides(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        if let Some((k, _)) = table.iter().find(|(_, v)| v.is_table()) {
            return Err(ConfigError::Parse(format!("key {k} is a table; the config is flat")));
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            let value: toml::Table =
                format!("v = {}", v.trim()).parse().or_else(|_| format!("v = {:?}", v.trim()).parse()).map_err(|_| ConfigError::Override(o.clone()))?;
            table.insert(k.trim().to_string(), value["v"].clone());
        }
        let cfg: SuiteConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_str_with_overrides(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        for (name, v) in [("quadrature_tol", self.quadrature_tol), ("profile_tol", self.profile_tol), ("coulomb_tol", self.coulomb_tol), ("z_radius", self.z_radius)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(&format!("{name} must be positive"));
            }
        }
        if self.lattice_nodes < 24 || self.lattice_nodes > 64 {
            return bad("lattice_nodes must lie in 24..=64");
        }
        if self.flow_nodes < 4 || self.coulomb_nodes < 9 || self.z_nodes < 9 {
            return bad("flow_nodes ≥ 4, coulomb_nodes ≥ 9 and z_nodes ≥ 9 are required");
        }
        if self.random_connections == 0 {
            return bad("random_connections must be positive");
        }
        if let Some(c) = self.criteria.iter().find(|c| !(1..=12).contains(*c)) {
            return bad(&format!("unknown criterion {c}"));
        }
        Ok(())
    }

    pub fn quadrature(&self) -> Quadrature {
        Quadrature::with_tol(self.quadrature_tol)
    }

    pub fn profile_quadrature(&self) -> ProfileQuadrature {
        ProfileQuadrature::with_tol(self.profile_tol)
    }

    pub fn coulomb(&self) -> CoulombConfig {
        CoulombConfig {
            lattice: Lattice4D::ball(3.0, self.coulomb_nodes).expect("validated node count"),
            tol: self.coulomb_tol,
            ..CoulombConfig::default()
        }
    }

    /// The file form of this config, which [`SuiteConfig::load`] reads back unchanged.
    pub fn to_file_string(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(SuiteConfig::from_str_with_overrides("", &[]).unwrap(), SuiteConfig::default());
    }

    #[test]
    fn file_round_trips_and_overrides_win() {
        let text = SuiteConfig::default().to_file_string();
        let cfg = SuiteConfig::from_str_with_overrides(&text, &["seed=5".into(), "criteria=[1, 4]".into()]).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.criteria, vec![1, 4]);
        assert_eq!(cfg.quadrature_tol, 1e-8);
    }

    #[test]
    fn unknown_keys_tables_and_bad_values_are_rejected() {
        assert!(matches!(SuiteConfig::from_str_with_overrides("sed = 3", &[]), Err(ConfigError::Parse(_))));
        assert!(matches!(SuiteConfig::from_str_with_overrides("[x]\nseed = 3", &[]), Err(ConfigError::Parse(_))));
        assert!(matches!(SuiteConfig::from_str_with_overrides("quadrature_tol = -1.0", &[]), Err(ConfigError::Invalid(_))));
        assert!(matches!(SuiteConfig::from_str_with_overrides("", &["seed".into()]), Err(ConfigError::Override(_))));
        assert!(matches!(SuiteConfig::from_str_with_overrides("criteria = [13]", &[]), Err(ConfigError::Invalid(_))));
    }
}
