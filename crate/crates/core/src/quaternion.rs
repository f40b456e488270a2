//! Quaternion and imaginary-quaternion algebra.
//!
//! Imaginary quaternions carry every Lie-algebra value in the crate. The
//! norm convention is |i| = |j| = |k| = 1.

use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A real quaternion `w + x i + y j + z k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// A purely imaginary quaternion `x i + y j + z k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImQuaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion { w: 0.0, x: 0.0, y: 0.0, z: 0.0 };
    pub const ONE: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };
    pub const I: Quaternion = Quaternion { w: 0.0, x: 1.0, y: 0.0, z: 0.0 };
    pub const J: Quaternion = Quaternion { w: 0.0, x: 0.0, y: 1.0, z: 0.0 };
    pub const K: Quaternion = Quaternion { w: 0.0, x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub const fn real(w: f64) -> Self {
        Quaternion { w, x: 0.0, y: 0.0, z: 0.0 }
    }

    /// Coordinates as `[w, x, y, z]`, matching the chart coordinates ζ¹..ζ⁴.
    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }

    /// Basis element e_k with e = (1, i, j, k).
    pub fn basis(k: usize) -> Self {
        let mut a = [0.0; 4];
        a[k] = 1.0;
        Quaternion::from_array(a)
    }

    pub fn conj(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm2(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, o: Quaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Multiplicative inverse; panics on zero in debug builds only through NaN propagation.
    pub fn inverse(self) -> Self {
        self.conj().scale(1.0 / self.norm2())
    }

    pub fn im(self) -> ImQuaternion {
        ImQuaternion::new(self.x, self.y, self.z)
    }

    pub fn normalized(self) -> Self {
        self.scale(1.0 / self.norm())
    }

    /// `q⁻¹ a q` for a unit quaternion `q`.
    pub fn conjugate_im(self, a: ImQuaternion) -> ImQuaternion {
        (self.conj() * a.to_quaternion() * self).im()
    }

    /// Logarithm of a unit quaternion as an imaginary quaternion of norm ≤ π.
    pub fn log_unit(self) -> ImQuaternion {
        let v = self.im();
        let s = v.norm();
        if s < 1e-300 {
            return ImQuaternion::ZERO;
        }
        let angle = s.atan2(self.w);
        v.scale(angle / s)
    }
}

/// Hamilton product.
pub fn mul(a: Quaternion, b: Quaternion) -> Quaternion {
    Quaternion::new(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )
}

/// Drops the scalar part.
pub fn im_part(q: Quaternion) -> ImQuaternion {
    q.im()
}

/// Commutator `ab − ba`.
pub fn bracket(a: ImQuaternion, b: ImQuaternion) -> ImQuaternion {
    a.cross(b).scale(2.0)
}

/// `cos|s| + (s/|s|) sin|s|`.
pub fn exp_im(s: ImQuaternion) -> Quaternion {
    let t = s.norm();
    if t < 1e-8 {
        // sin t / t to machine precision for small t
        let sinc = 1.0 - t * t / 6.0;
        return Quaternion::new(t.cos(), s.x * sinc, s.y * sinc, s.z * sinc);
    }
    let k = t.sin() / t;
    Quaternion::new(t.cos(), s.x * k, s.y * k, s.z * k)
}

impl ImQuaternion {
    pub const ZERO: ImQuaternion = ImQuaternion { x: 0.0, y: 0.0, z: 0.0 };
    pub const I: ImQuaternion = ImQuaternion { x: 1.0, y: 0.0, z: 0.0 };
    pub const J: ImQuaternion = ImQuaternion { x: 0.0, y: 1.0, z: 0.0 };
    pub const K: ImQuaternion = ImQuaternion { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        ImQuaternion { x, y, z }
    }

    pub fn to_quaternion(self) -> Quaternion {
        Quaternion::new(0.0, self.x, self.y, self.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        ImQuaternion::new(a[0], a[1], a[2])
    }

    pub fn dot(self, o: ImQuaternion) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        ImQuaternion::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn cross(self, o: ImQuaternion) -> Self {
        ImQuaternion::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn bracket(self, o: ImQuaternion) -> Self {
        bracket(self, o)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, o: Quaternion) -> Quaternion {
        mul(self, o)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, s: f64) -> Quaternion {
        self.scale(s)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

impl Add for ImQuaternion {
    type Output = ImQuaternion;
    fn add(self, o: ImQuaternion) -> ImQuaternion {
        ImQuaternion::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for ImQuaternion {
    fn add_assign(&mut self, o: ImQuaternion) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for ImQuaternion {
    type Output = ImQuaternion;
    fn sub(self, o: ImQuaternion) -> ImQuaternion {
        ImQuaternion::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for ImQuaternion {
    fn sub_assign(&mut self, o: ImQuaternion) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

impl Neg for ImQuaternion {
    type Output = ImQuaternion;
    fn neg(self) -> ImQuaternion {
        self.scale(-1.0)
    }
}

impl Mul<f64> for ImQuaternion {
    type Output = ImQuaternion;
    fn mul(self, s: f64) -> ImQuaternion {
        self.scale(s)
    }
}

impl MulAssign<f64> for ImQuaternion {
    fn mul_assign(&mut self, s: f64) {
        self.x *= s;
        self.y *= s;
        self.z *= s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamilton_table() {
        let (i, j, k) = (Quaternion::I, Quaternion::J, Quaternion::K);
        assert_eq!(i * j, k);
        assert_eq!(j * k, i);
        assert_eq!(k * i, j);
        assert_eq!(i * i, -Quaternion::ONE);
        let q = Quaternion::new(0.3, -1.2, 2.0, 0.7);
        assert_eq!(q * Quaternion::ONE, q);
    }

    #[test]
    fn product_of_sums() {
        let p = (Quaternion::ONE + Quaternion::I) * (Quaternion::ONE + Quaternion::J);
        assert_eq!(p, Quaternion::new(1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn im_part_drops_scalar() {
        assert_eq!(im_part(Quaternion::new(3.0, 2.0, 0.0, 0.0)), ImQuaternion::new(2.0, 0.0, 0.0));
        assert_eq!(im_part(Quaternion::real(5.0)), ImQuaternion::ZERO);
        assert_eq!(im_part(Quaternion::new(0.0, 1.0, 1.0, 1.0)), ImQuaternion::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn bracket_values() {
        assert_eq!(bracket(ImQuaternion::I, ImQuaternion::J), ImQuaternion::new(0.0, 0.0, 2.0));
        let a = ImQuaternion::new(0.4, -0.2, 1.1);
        assert_eq!(bracket(a, a), ImQuaternion::ZERO);
        assert_eq!(
            bracket(ImQuaternion::I + ImQuaternion::J, ImQuaternion::K),
            ImQuaternion::new(2.0, -2.0, 0.0)
        );
        let b = ImQuaternion::new(-0.3, 0.9, 0.25);
        let direct = a.to_quaternion() * b.to_quaternion() - b.to_quaternion() * a.to_quaternion();
        assert!((direct.w).abs() < 1e-15);
        assert!((direct.im() - bracket(a, b)).norm() < 1e-15);
    }

    #[test]
    fn exp_values() {
        assert_eq!(exp_im(ImQuaternion::ZERO), Quaternion::ONE);
        let q = exp_im(ImQuaternion::I.scale(std::f64::consts::FRAC_PI_2));
        assert!((q - Quaternion::I).norm() < 1e-15);
    }

    #[test]
    fn log_inverts_exp() {
        let s = ImQuaternion::new(0.3, -1.0, 0.8);
        assert!((exp_im(s).log_unit() - s).norm() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn quat() -> impl Strategy<Value = Quaternion> {
            prop::array::uniform4(-3.0..3.0f64).prop_map(Quaternion::from_array)
        }

        fn im() -> impl Strategy<Value = ImQuaternion> {
            prop::array::uniform3(-3.0..3.0f64).prop_map(ImQuaternion::from_array)
        }

        proptest! {
            #[test]
            fn norm_is_multiplicative(a in quat(), b in quat()) {
                prop_assert!(((a * b).norm() - a.norm() * b.norm()).abs() <= 1e-12 * (1.0 + a.norm() * b.norm()));
            }

            #[test]
            fn product_is_associative(a in quat(), b in quat(), c in quat()) {
                prop_assert!(((a * b) * c - a * (b * c)).norm() <= 1e-12 * (1.0 + a.norm() * b.norm() * c.norm()));
            }

            #[test]
            fn bracket_is_the_commutator(a in im(), b in im()) {
                let (qa, qb) = (a.to_quaternion(), b.to_quaternion());
                let c = qa * qb - qb * qa;
                prop_assert!(c.w.abs() < 1e-12);
                prop_assert!((c.im() - bracket(a, b)).norm() < 1e-12);
            }

            #[test]
            fn bracket_satisfies_jacobi(a in im(), b in im(), c in im()) {
                let j = bracket(a, bracket(b, c)) + bracket(b, bracket(c, a)) + bracket(c, bracket(a, b));
                prop_assert!(j.norm() < 1e-11);
            }

            #[test]
            fn exp_lands_on_unit_sphere_and_log_inverts(s in prop::array::uniform3(-1.0..1.0f64)) {
                let s = ImQuaternion::from_array(s);
                let g = exp_im(s);
                prop_assert!((g.norm() - 1.0).abs() < 1e-14);
                prop_assert!((g.log_unit() - s).norm() < 1e-13);
            }

            #[test]
            fn adjoint_action_preserves_norm(q in quat(), a in im()) {
                prop_assume!(q.norm() > 1e-3);
                let u = q.normalized();
                prop_assert!((u.conjugate_im(a).norm() - a.norm()).abs() < 1e-12);
            }
        }
    }
}
