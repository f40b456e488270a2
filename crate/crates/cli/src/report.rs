//! Machine-readable verification reports.

use serde::{Deserialize, Serialize};

use crate::config::SuiteConfig;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// How a computed value is judged against its target and tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// |computed − target| ≤ tol·|target|
    Relative,
    /// |computed − target| ≤ tol
    Absolute,
    /// computed ≤ target + tol
    AtMost,
    /// computed ≥ target − tol
    AtLeast,
    /// computed < target
    Below,
    /// computed > target
    Above,
}

impl Comparison {
    /// Non-finite values never pass.
    pub fn holds(self, computed: f64, target: f64, tol: f64) -> bool {
        if !computed.is_finite() {
            return false;
        }
        match self {
            Comparison::Relative => (computed - target).abs() <= tol * target.abs(),
            Comparison::Absolute => (computed - target).abs() <= tol,
            Comparison::AtMost => computed <= target + tol,
            Comparison::AtLeast => computed >= target - tol,
            Comparison::Below => computed < target,
            Comparison::Above => computed > target,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub criterion: u32,
    /// The mathematical statement the check tests.
    pub anchor: String,
    /// NaN (null in JSON) when the computation failed.
    pub computed: f64,
    pub comparison: Comparison,
    pub target: f64,
    pub tol: f64,
    pub pass: bool,
    /// Seconds spent on the whole criterion; only recorded on request.
    pub runtime: Option<f64>,
    pub error: Option<String>,
}

impl Check {
    pub fn new(id: impl Into<String>, anchor: &str, computed: f64, comparison: Comparison, target: f64, tol: f64) -> Check {
        Check {
            id: id.into(),
            criterion: 0,
            anchor: anchor.to_string(),
            computed,
            comparison,
            target,
            tol,
            pass: comparison.holds(computed, target, tol),
            runtime: None,
            error: None,
        }
    }

    /// Stands in for the checks of a criterion whose computation returned an error.
    pub fn crashed(criterion: u32, anchor: &str, error: String) -> Check {
        Check {
            id: format!("criterion_{criterion}_crashed"),
            criterion,
            anchor: anchor.to_string(),
            computed: f64::NAN,
            comparison: Comparison::Absolute,
            target: 0.0,
            tol: 0.0,
            pass: false,
            runtime: None,
            error: Some(error),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub version: String,
    pub config: SuiteConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub metadata: ReportMetadata,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(config: &SuiteConfig, checks: Vec<Check>) -> Self {
        VerificationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            metadata: ReportMetadata {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: config.clone(),
            },
            pass: !checks.is_empty() && checks.iter().all(|c| c.pass),
            checks,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}
