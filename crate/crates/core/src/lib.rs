//! Numerics for the SU(2) Yang-Mills α-energy on the round four-sphere.
//!
//! Gauge fields live in the stereographic chart ζ ∈ ℍ with Lie-algebra values
//! in Im ℍ. The crate evaluates ADHM instantons and their decorations, the
//! energies YM, YM_α and YM_{α,λ}, the one-dimensional dilation profile, the
//! first and second variations, a radial α-flow, and the Coulomb gauge
//! projection against the basic connection.

pub mod coulomb;
pub mod dilation;
pub mod energy;
pub mod error;
pub mod flow;
pub mod forms;
pub mod gauge;
pub mod lattice;
pub mod quadrature;
pub mod quaternion;
pub mod random;
pub mod sphere;
pub mod variational;

pub use error::{GaugeError, Result};
pub use forms::{CurvatureField, GaugePotential};
pub use gauge::ConnectionModel;
pub use quaternion::{ImQuaternion, Quaternion};
pub use sphere::{ChartPoint, ConformalMap};
