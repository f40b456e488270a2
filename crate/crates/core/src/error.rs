use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaugeError {
    #[error("conformal map hits its pole at the queried point")]
    PoleHit,
    #[error("stencil leaves the lattice at node {0}")]
    StencilOutOfDomain(usize),
    #[error("radial profile is not sampled at u = {0}")]
    ProfileNotSampled(f64),
    #[error("quadrature not converged: residual {residual:e} exceeds {requested:e}")]
    QuadratureNotConverged { residual: f64, requested: f64 },
    #[error("dilation factor {0:e} exceeds the overflow guard")]
    LambdaOverflow(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sample (alpha={alpha}, lambda={lambda}) fits no regime")]
    RegimeMisclassified { alpha: f64, lambda: f64 },
    #[error("field is identically zero")]
    ZeroField,
    #[error("flow step rejected at the minimum step size {0:e}")]
    StepRejectedAtMinimum(f64),
    #[error("flow did not converge before t = {0}")]
    NotConverged(f64),
    #[error("Coulomb iteration diverged after {0} outer iterations")]
    Diverged(usize),
    #[error("Coulomb iteration exceeded {0} outer iterations")]
    MaxOuterExceeded(usize),
    #[error("conjugate gradient did not converge: residual {0:e}")]
    CgNotConverged(f64),
    #[error("perturbation is not supported inside 0.8R (shell fraction {0:e})")]
    SupportViolation(f64),
    #[error("malformed lattice data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, GaugeError>;
