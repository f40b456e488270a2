//! Seeded random draws. Every stochastic routine takes a ChaCha8 generator
//! derived from one 64-bit seed and a stream id, so runs are reproducible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::forms::GaugePotential;
use crate::gauge::{Perturbation, PotentialBump};
use crate::quaternion::{ImQuaternion, Quaternion};

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn uniform_im<R: Rng>(rng: &mut R, scale: f64) -> ImQuaternion {
    ImQuaternion::new(rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale))
}

/// A point drawn uniformly from the ball |ζ| ≤ radius.
pub fn uniform_ball<R: Rng>(rng: &mut R, radius: f64) -> Quaternion {
    loop {
        let q = Quaternion::new(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        );
        if q.norm2() <= 1.0 {
            return q.scale(radius);
        }
    }
}

pub fn random_potential<R: Rng>(rng: &mut R, scale: f64) -> GaugePotential {
    GaugePotential(std::array::from_fn(|_| uniform_im(rng, scale)))
}

/// Gaussian bumps with centers in |ζ| ≤ `center_radius`, widths in `widths` and
/// coefficients uniform in [−amplitude, amplitude].
pub fn random_perturbation<R: Rng>(
    rng: &mut R,
    count: usize,
    amplitude: f64,
    center_radius: f64,
    widths: (f64, f64),
) -> Perturbation {
    let bumps = (0..count)
        .map(|_| PotentialBump {
            center: uniform_ball(rng, center_radius),
            width: rng.gen_range(widths.0..=widths.1),
            coefficients: std::array::from_fn(|_| uniform_im(rng, amplitude)),
        })
        .collect();
    Perturbation { bumps }
}
