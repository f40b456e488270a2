//! Round-sphere geometry in the stereographic chart ζ ∈ ℍ.
//!
//! The round metric is ḡ = 4(1+|ζ|²)⁻² δ on the unit four-sphere.

use serde::{Deserialize, Serialize};

use crate::error::{GaugeError, Result};
use crate::forms::CurvatureField;
use crate::quaternion::Quaternion;

/// A point of the stereographic chart. The north pole is never a chart point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub zeta: Quaternion,
}

impl ChartPoint {
    pub fn new(zeta: Quaternion) -> Self {
        ChartPoint { zeta }
    }

    /// The point on the real axis at distance `r` from the origin.
    pub fn radial(r: f64) -> Self {
        ChartPoint { zeta: Quaternion::real(r) }
    }

    pub fn r(&self) -> f64 {
        self.zeta.norm()
    }

    pub fn s(&self) -> f64 {
        self.zeta.norm2()
    }
}

impl From<Quaternion> for ChartPoint {
    fn from(zeta: Quaternion) -> Self {
        ChartPoint { zeta }
    }
}

/// Volume density dV_ḡ / d⁴ζ = 16(1+|ζ|²)⁻⁴.
pub fn round_weight(p: ChartPoint) -> f64 {
    16.0 / (1.0 + p.s()).powi(4)
}

/// Weight converting the flat |F|² of a 2-form into |F|²_ḡ: (1+|ζ|²)⁴/16.
pub fn two_form_weight(p: ChartPoint) -> f64 {
    (1.0 + p.s()).powi(4) / 16.0
}

/// χ_λ(ζ) = λ⁻⁴((1+|λζ|²)/(1+|ζ|²))⁴.
pub fn chi_lambda(p: ChartPoint, lambda: f64) -> f64 {
    let s = p.s();
    ((1.0 + lambda * lambda * s) / (lambda * (1.0 + s))).powi(4)
}

/// ∂χ_λ/∂log λ = χ_λ · 4(λ²|ζ|² − 1)/(λ²|ζ|² + 1).
pub fn dchi_dloglambda(p: ChartPoint, lambda: f64) -> f64 {
    let t = lambda * lambda * p.s();
    chi_lambda(p, lambda) * 4.0 * (t - 1.0) / (t + 1.0)
}

/// μ(ζ) = (|ζ|²−1)/(|ζ|²+1).
pub fn mu(p: ChartPoint) -> f64 {
    let s = p.s();
    (s - 1.0) / (s + 1.0)
}

/// A conformal automorphism ζ ↦ ξ₂ + λ·p (ζ−ξ₁)/|ζ−ξ₁|^ε q̄.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalMap {
    pub xi1: Quaternion,
    pub xi2: Quaternion,
    pub lambda: f64,
    pub rot: (Quaternion, Quaternion),
    /// Inversion exponent, 0 or 2.
    pub eps: u8,
}

impl Default for ConformalMap {
    fn default() -> Self {
        ConformalMap::identity()
    }
}

impl ConformalMap {
    pub fn identity() -> Self {
        ConformalMap {
            xi1: Quaternion::ZERO,
            xi2: Quaternion::ZERO,
            lambda: 1.0,
            rot: (Quaternion::ONE, Quaternion::ONE),
            eps: 0,
        }
    }

    pub fn dilation(lambda: f64) -> Self {
        ConformalMap { lambda, ..ConformalMap::identity() }
    }

    /// ζ ↦ ξ + λζ.
    pub fn affine(lambda: f64, xi: Quaternion) -> Self {
        ConformalMap { lambda, xi2: xi, ..ConformalMap::identity() }
    }

    pub fn rotation(p: Quaternion, q: Quaternion) -> Self {
        ConformalMap { rot: (p.normalized(), q.normalized()), ..ConformalMap::identity() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(GaugeError::InvalidParameter(format!("dilation factor {}", self.lambda)));
        }
        for u in [self.rot.0, self.rot.1] {
            if (u.norm() - 1.0).abs() > 1e-12 {
                return Err(GaugeError::InvalidParameter("rotation factors must be unit".into()));
            }
        }
        if self.eps != 0 && self.eps != 2 {
            return Err(GaugeError::InvalidParameter(format!("inversion exponent {}", self.eps)));
        }
        Ok(())
    }

    fn inner(&self, zeta: Quaternion) -> Result<Quaternion> {
        let w = zeta - self.xi1;
        if self.eps == 2 {
            let n2 = w.norm2();
            if n2 == 0.0 {
                return Err(GaugeError::PoleHit);
            }
            Ok(w.scale(1.0 / n2))
        } else {
            Ok(w)
        }
    }

    pub fn apply_zeta(&self, zeta: Quaternion) -> Result<Quaternion> {
        let w = self.inner(zeta)?;
        Ok(self.xi2 + (self.rot.0 * w * self.rot.1.conj()).scale(self.lambda))
    }

    /// Rows ∂_iφ (as quaternions whose components are j = 1..4).
    pub fn jacobian(&self, zeta: Quaternion) -> Result<[Quaternion; 4]> {
        let w = zeta - self.xi1;
        let n2 = w.norm2();
        if self.eps == 2 && n2 == 0.0 {
            return Err(GaugeError::PoleHit);
        }
        Ok(std::array::from_fn(|i| {
            let v = Quaternion::basis(i);
            let dw = if self.eps == 2 {
                v.scale(1.0 / n2) - w.scale(2.0 * w.dot(v) / (n2 * n2))
            } else {
                v
            };
            (self.rot.0 * dw * self.rot.1.conj()).scale(self.lambda)
        }))
    }

    /// `self ∘ other` for maps without inversion.
    pub fn compose(&self, other: &ConformalMap) -> Result<ConformalMap> {
        if self.eps != 0 || other.eps != 0 {
            return Err(GaugeError::InvalidParameter("composition with inversions".into()));
        }
        let (pa, qa) = self.rot;
        let (pb, qb) = other.rot;
        let shift = pa * (other.xi2 - self.xi1) * qa.conj();
        Ok(ConformalMap {
            xi1: other.xi1,
            xi2: self.xi2 + shift.scale(self.lambda),
            lambda: self.lambda * other.lambda,
            rot: (pa * pb, qa * qb),
            eps: 0,
        })
    }

    /// Inverse of a map without inversion.
    pub fn inverse(&self) -> Result<ConformalMap> {
        if self.eps != 0 {
            return Err(GaugeError::InvalidParameter("inverse of an inversion".into()));
        }
        let (p, q) = self.rot;
        Ok(ConformalMap {
            xi1: self.xi2,
            xi2: self.xi1,
            lambda: 1.0 / self.lambda,
            rot: (p.conj(), q.conj()),
            eps: 0,
        })
    }
}

pub fn conformal_apply(m: &ConformalMap, p: ChartPoint) -> Result<ChartPoint> {
    m.apply_zeta(p.zeta).map(ChartPoint::new)
}

/// Splits F into self-dual and anti-self-dual parts. The star on 2-forms is
/// conformally invariant, so the chart point only fixes where F lives.
pub fn hodge_split(f: &CurvatureField, _p: ChartPoint) -> (CurvatureField, CurvatureField) {
    let s = f.star();
    (f.add(&s).scale(0.5), f.sub(&s).scale(0.5))
}

/// Geodesic distance on the unit sphere between two chart points.
pub fn geodesic_distance(a: Quaternion, b: Quaternion) -> f64 {
    let chord = 2.0 * (a - b).norm() / ((1.0 + a.norm2()) * (1.0 + b.norm2())).sqrt();
    2.0 * (0.5 * chord).min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_values() {
        assert_eq!(round_weight(ChartPoint::radial(0.0)), 16.0);
        assert_eq!(round_weight(ChartPoint::radial(1.0)), 1.0);
    }

    #[test]
    fn chi_values() {
        let z = ChartPoint::new(Quaternion::new(0.3, -0.1, 0.7, 0.2));
        assert!((chi_lambda(z, 1.0) - 1.0).abs() < 1e-15);
        assert!((chi_lambda(ChartPoint::radial(0.0), 2.0) - 1.0 / 16.0).abs() < 1e-15);
        assert!((dchi_dloglambda(ChartPoint::radial(0.0), 2.0) + 4.0 / 16.0).abs() < 1e-15);
        assert!(dchi_dloglambda(ChartPoint::radial(0.5), 2.0).abs() < 1e-15);
    }

    #[test]
    fn mu_values() {
        assert_eq!(mu(ChartPoint::radial(0.0)), -1.0);
        assert_eq!(mu(ChartPoint::radial(1.0)), 0.0);
        let mut last = -1.0;
        for k in 1..50 {
            let m = mu(ChartPoint::radial(k as f64 * 0.5));
            assert!(m > last && m < 1.0);
            last = m;
        }
    }

    #[test]
    fn maps() {
        let z = Quaternion::new(0.2, 0.4, -0.3, 1.1);
        assert_eq!(ConformalMap::identity().apply_zeta(z).unwrap(), z);
        assert_eq!(ConformalMap::dilation(3.0).apply_zeta(Quaternion::I).unwrap(), Quaternion::I.scale(3.0));
        let back = ConformalMap::dilation(1.0 / 3.0).compose(&ConformalMap::dilation(3.0)).unwrap();
        assert!((back.apply_zeta(z).unwrap() - z).norm() < 1e-12);
        let inv = ConformalMap { eps: 2, ..ConformalMap::identity() };
        assert_eq!(inv.apply_zeta(Quaternion::ZERO), Err(GaugeError::PoleHit));
    }
}
