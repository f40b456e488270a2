//! Pointwise Lie-algebra-valued 1-forms and 2-forms in chart coordinates.

use serde::{Deserialize, Serialize};

use crate::quaternion::{bracket, ImQuaternion, Quaternion};

/// Four chart components A_1..A_4 of an Im ℍ-valued 1-form at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaugePotential(pub [ImQuaternion; 4]);

/// Antisymmetric array F_ij of Im ℍ values at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurvatureField(pub [[ImQuaternion; 4]; 4]);

/// Index pairs (i, j) with i < j.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Conformal factor φ of the round metric ḡ = φ² δ, φ = 2/(1+|ζ|²).
pub fn conformal_factor(zeta: Quaternion) -> f64 {
    2.0 / (1.0 + zeta.norm2())
}

impl GaugePotential {
    pub const ZERO: GaugePotential = GaugePotential([ImQuaternion::ZERO; 4]);

    pub fn add(&self, o: &GaugePotential) -> GaugePotential {
        let mut r = *self;
        for i in 0..4 {
            r.0[i] += o.0[i];
        }
        r
    }

    pub fn sub(&self, o: &GaugePotential) -> GaugePotential {
        let mut r = *self;
        for i in 0..4 {
            r.0[i] -= o.0[i];
        }
        r
    }

    pub fn scale(&self, s: f64) -> GaugePotential {
        let mut r = *self;
        for a in r.0.iter_mut() {
            *a *= s;
        }
        r
    }

    /// Σ_i |A_i|² with the flat coordinate metric.
    pub fn norm2_flat(&self) -> f64 {
        self.0.iter().map(|a| a.norm2()).sum()
    }

    /// |A|²_ḡ at `zeta`.
    pub fn norm2_round(&self, zeta: Quaternion) -> f64 {
        let phi = conformal_factor(zeta);
        self.norm2_flat() / (phi * phi)
    }

    pub fn dot_flat(&self, o: &GaugePotential) -> f64 {
        (0..4).map(|i| self.0[i].dot(o.0[i])).sum()
    }

    /// Pointwise `q⁻¹ A q`.
    pub fn conjugate(&self, q: Quaternion) -> GaugePotential {
        GaugePotential(self.0.map(|a| q.conjugate_im(a)))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
    }
}

impl CurvatureField {
    pub const ZERO: CurvatureField = CurvatureField([[ImQuaternion::ZERO; 4]; 4]);

    /// Builds an antisymmetric field from its six upper-triangular entries (order of [`PAIRS`]).
    pub fn from_upper(v: [ImQuaternion; 6]) -> CurvatureField {
        let mut f = CurvatureField::ZERO;
        for (n, &(i, j)) in PAIRS.iter().enumerate() {
            f.0[i][j] = v[n];
            f.0[j][i] = -v[n];
        }
        f
    }

    pub fn upper(&self) -> [ImQuaternion; 6] {
        PAIRS.map(|(i, j)| self.0[i][j])
    }

    pub fn add(&self, o: &CurvatureField) -> CurvatureField {
        CurvatureField::from_upper(std::array::from_fn(|n| self.upper()[n] + o.upper()[n]))
    }

    pub fn sub(&self, o: &CurvatureField) -> CurvatureField {
        CurvatureField::from_upper(std::array::from_fn(|n| self.upper()[n] - o.upper()[n]))
    }

    pub fn scale(&self, s: f64) -> CurvatureField {
        CurvatureField::from_upper(self.upper().map(|a| a * s))
    }

    /// Σ_{i,j} |F_ij|² over ordered pairs, flat coordinate metric.
    pub fn norm2_flat(&self) -> f64 {
        2.0 * self.upper().iter().map(|a| a.norm2()).sum::<f64>()
    }

    /// |F|²_ḡ at `zeta`: the flat value times (1+|ζ|²)⁴/16.
    pub fn norm2_round(&self, zeta: Quaternion) -> f64 {
        let phi = conformal_factor(zeta);
        self.norm2_flat() / phi.powi(4)
    }

    /// Σ_{i,j} ⟨F_ij, G_ij⟩ over ordered pairs, flat metric.
    pub fn dot_flat(&self, o: &CurvatureField) -> f64 {
        let (a, b) = (self.upper(), o.upper());
        2.0 * (0..6).map(|n| a[n].dot(b[n])).sum::<f64>()
    }

    /// Hodge star with orientation dζ¹∧dζ²∧dζ³∧dζ⁴; conformally invariant on 2-forms.
    pub fn star(&self) -> CurvatureField {
        let f = &self.0;
        CurvatureField::from_upper([f[2][3], -f[1][3], f[1][2], f[0][3], -f[0][2], f[0][1]])
    }

    pub fn conjugate(&self, q: Quaternion) -> CurvatureField {
        CurvatureField::from_upper(self.upper().map(|a| q.conjugate_im(a)))
    }

    /// Σ_{ijkl} ε_{ijkl} ⟨F_ij, F_kl⟩, the density of −2 tr(F∧F) against d⁴ζ.
    pub fn wedge_density(&self) -> f64 {
        let u = self.upper();
        // pairs (01,23), (02,13), (03,12) with signs +, −, +; each appears 8 times in the full sum
        8.0 * (u[0].dot(u[5]) - u[1].dot(u[4]) + u[2].dot(u[3]))
    }

    pub fn is_finite(&self) -> bool {
        self.upper().iter().all(|a| a.is_finite())
    }
}

/// Curvature of a constant-coefficient potential: F_ij = [A_i, A_j].
pub fn commutator_curvature(a: &GaugePotential) -> CurvatureField {
    CurvatureField::from_upper(PAIRS.map(|(i, j)| bracket(a.0[i], a.0[j])))
}
