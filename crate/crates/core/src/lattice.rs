//! Axis-aligned 4D lattices in the stereographic chart, finite-difference
//! stencils, and the binary field format.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GaugeError, Result};
use crate::forms::GaugePotential;
use crate::quaternion::{ImQuaternion, Quaternion};

pub const DEFAULT_RADIUS: f64 = 3.0;
pub const DEFAULT_NODES: usize = 32;

/// A cube `center + [−a, a]⁴` sampled with `n` nodes per axis.
///
/// Nodes with |ζ| ≥ `ball_radius` are inactive: they carry data (boundary
/// values) but are excluded from sums and solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice4D {
    pub center: Quaternion,
    pub half_width: f64,
    pub n: usize,
    pub ball_radius: Option<f64>,
}

impl Lattice4D {
    pub fn new(center: Quaternion, half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) || n < 5 {
            return Err(GaugeError::InvalidParameter(format!("lattice a={half_width}, n={n}")));
        }
        Ok(Lattice4D { center, half_width, n, ball_radius: None })
    }

    /// Cube of half-width R about the origin, masked to the ball |ζ| < R.
    pub fn ball(radius: f64, n: usize) -> Result<Self> {
        let mut l = Lattice4D::new(Quaternion::ZERO, radius, n)?;
        l.ball_radius = Some(radius);
        Ok(l)
    }

    /// The default ball lattice: R = 3 with 32 nodes per axis (h ≈ 0.19).
    pub fn default_ball() -> Self {
        Lattice4D { center: Quaternion::ZERO, half_width: DEFAULT_RADIUS, n: DEFAULT_NODES, ball_radius: Some(DEFAULT_RADIUS) }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(4)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn index(&self, i: [usize; 4]) -> usize {
        ((i[0] * self.n + i[1]) * self.n + i[2]) * self.n + i[3]
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 4] {
        let mut out = [0; 4];
        for d in (0..4).rev() {
            out[d] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn coord(&self, idx: usize) -> Quaternion {
        let m = self.multi_index(idx);
        let h = self.spacing();
        let c = self.center.to_array();
        Quaternion::from_array(std::array::from_fn(|d| c[d] - self.half_width + m[d] as f64 * h))
    }

    /// Node index nearest to `zeta` if it lies on the lattice (within 1e-9 h).
    pub fn locate(&self, zeta: Quaternion) -> Option<usize> {
        let h = self.spacing();
        let (z, c) = (zeta.to_array(), self.center.to_array());
        let mut m = [0usize; 4];
        for d in 0..4 {
            let t = (z[d] - c[d] + self.half_width) / h;
            let k = t.round();
            if (t - k).abs() > 1e-9 || k < 0.0 || k > (self.n - 1) as f64 {
                return None;
            }
            m[d] = k as usize;
        }
        Some(self.index(m))
    }

    pub fn is_active(&self, idx: usize) -> bool {
        match self.ball_radius {
            Some(r) => self.coord(idx).norm() < r,
            None => true,
        }
    }

    /// Round-volume weight 16(1+|ζ|²)⁻⁴ h⁴.
    pub fn weight(&self, idx: usize) -> f64 {
        let h = self.spacing();
        16.0 / (1.0 + self.coord(idx).norm2()).powi(4) * h.powi(4)
    }

    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> Option<usize> {
        let mut m = self.multi_index(idx);
        let k = m[axis] as isize + offset;
        if k < 0 || k >= self.n as isize {
            return None;
        }
        m[axis] = k as usize;
        Some(self.index(m))
    }

    /// Distance in nodes from `idx` to the nearest cube face.
    pub fn depth(&self, idx: usize) -> usize {
        self.multi_index(idx).iter().map(|&k| k.min(self.n - 1 - k)).min().unwrap_or(0)
    }

    /// Centered first-derivative stencil along `axis`: (node, coefficient) pairs.
    pub fn stencil(&self, idx: usize, axis: usize, order: usize) -> Result<Stencil> {
        let h = self.spacing();
        let taps: &[(isize, f64)] = match order {
            2 => &[(-1, -0.5), (1, 0.5)],
            4 => &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)],
            6 => &[(-3, -1.0 / 60.0), (-2, 0.15), (-1, -0.75), (1, 0.75), (2, -0.15), (3, 1.0 / 60.0)],
            8 => &[
                (-4, 1.0 / 280.0),
                (-3, -4.0 / 105.0),
                (-2, 0.2),
                (-1, -0.8),
                (1, 0.8),
                (2, -0.2),
                (3, 4.0 / 105.0),
                (4, -1.0 / 280.0),
            ],
            _ => return Err(GaugeError::InvalidParameter(format!("stencil order {order}"))),
        };
        let mut s = Stencil { taps: [(0, 0.0); 8], len: taps.len() };
        for (t, &(off, c)) in taps.iter().enumerate() {
            let nb = self.neighbor(idx, axis, off).ok_or(GaugeError::StencilOutOfDomain(idx))?;
            s.taps[t] = (nb, c / h);
        }
        Ok(s)
    }

    /// Stencil half-width in nodes for a given order.
    pub fn reach(order: usize) -> usize {
        order / 2
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    taps: [(usize, f64); 8],
    len: usize,
}

impl Stencil {
    pub fn taps(&self) -> &[(usize, f64)] {
        &self.taps[..self.len]
    }

    pub fn apply_im(&self, v: &[ImQuaternion]) -> ImQuaternion {
        let mut acc = ImQuaternion::ZERO;
        for &(k, c) in self.taps() {
            acc += v[k] * c;
        }
        acc
    }

    pub fn apply_f64(&self, v: &[f64]) -> f64 {
        self.taps().iter().map(|&(k, c)| v[k] * c).sum()
    }

    pub fn apply_quat(&self, v: &[Quaternion]) -> Quaternion {
        let mut acc = Quaternion::ZERO;
        for &(k, c) in self.taps() {
            acc = acc + v[k] * c;
        }
        acc
    }

    pub fn apply_potential(&self, v: &[GaugePotential], comp: usize) -> ImQuaternion {
        let mut acc = ImQuaternion::ZERO;
        for &(k, c) in self.taps() {
            acc += v[k].0[comp] * c;
        }
        acc
    }
}

/// Metadata written next to a binary lattice field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSidecar {
    pub half_width: f64,
    pub spacing: f64,
    pub counts: [u64; 4],
    pub center: [f64; 4],
    pub ball_radius: Option<f64>,
    pub components_per_node: usize,
    pub layout: String,
    pub endianness: String,
}

const DOUBLES_PER_NODE: usize = 12;

/// Writes a 1-form lattice field: header (R, h, four axis counts, center,
/// ball radius or NaN) then 12 little-endian doubles per node, node-major.
pub fn write_potential_field(path: &Path, lattice: &Lattice4D, values: &[GaugePotential]) -> Result<()> {
    if values.len() != lattice.len() {
        return Err(GaugeError::Format(format!("{} values for {} nodes", values.len(), lattice.len())));
    }
    let io = |e: std::io::Error| GaugeError::Format(e.to_string());
    let mut buf: Vec<u8> = Vec::with_capacity(96 + values.len() * DOUBLES_PER_NODE * 8);
    buf.extend_from_slice(&lattice.half_width.to_le_bytes());
    buf.extend_from_slice(&lattice.spacing().to_le_bytes());
    for _ in 0..4 {
        buf.extend_from_slice(&(lattice.n as u64).to_le_bytes());
    }
    for c in lattice.center.to_array() {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    buf.extend_from_slice(&lattice.ball_radius.unwrap_or(f64::NAN).to_le_bytes());
    for v in values {
        for a in v.0 {
            for x in a.to_array() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&buf).map_err(io)?;

    let side = LatticeSidecar {
        half_width: lattice.half_width,
        spacing: lattice.spacing(),
        counts: [lattice.n as u64; 4],
        center: lattice.center.to_array(),
        ball_radius: lattice.ball_radius,
        components_per_node: DOUBLES_PER_NODE,
        layout: "node-major, then 1-form component, then i/j/k".into(),
        endianness: "little".into(),
    };
    let json = serde_json::to_string_pretty(&side).map_err(|e| GaugeError::Format(e.to_string()))?;
    std::fs::write(sidecar_path(path), json).map_err(io)?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    p.into()
}

pub fn read_potential_field(path: &Path) -> Result<(Lattice4D, Vec<GaugePotential>)> {
    let io = |e: std::io::Error| GaugeError::Format(e.to_string());
    let mut raw = Vec::new();
    std::fs::File::open(path).map_err(io)?.read_to_end(&mut raw).map_err(io)?;
    let mut pos = 0usize;
    let mut next8 = || -> Result<[u8; 8]> {
        let s = raw.get(pos..pos + 8).ok_or_else(|| GaugeError::Format("truncated file".into()))?;
        pos += 8;
        Ok(s.try_into().unwrap())
    };
    let half_width = f64::from_le_bytes(next8()?);
    let _spacing = f64::from_le_bytes(next8()?);
    let mut counts = [0u64; 4];
    for c in counts.iter_mut() {
        *c = u64::from_le_bytes(next8()?);
    }
    if counts.iter().any(|&c| c != counts[0]) {
        return Err(GaugeError::Format("non-cubic lattice".into()));
    }
    let mut center = [0.0; 4];
    for c in center.iter_mut() {
        *c = f64::from_le_bytes(next8()?);
    }
    let ball = f64::from_le_bytes(next8()?);
    let mut lattice = Lattice4D::new(Quaternion::from_array(center), half_width, counts[0] as usize)?;
    lattice.ball_radius = if ball.is_nan() { None } else { Some(ball) };
    let mut values = Vec::with_capacity(lattice.len());
    for _ in 0..lattice.len() {
        let mut comps = [ImQuaternion::ZERO; 4];
        for c in comps.iter_mut() {
            let x = f64::from_le_bytes(next8()?);
            let y = f64::from_le_bytes(next8()?);
            let z = f64::from_le_bytes(next8()?);
            *c = ImQuaternion::new(x, y, z);
        }
        values.push(GaugePotential(comps));
    }
    if pos != raw.len() {
        return Err(GaugeError::Format("trailing bytes".into()));
    }
    Ok((lattice, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let l = Lattice4D::ball(3.0, 9).unwrap();
        for idx in [0, 17, 4000, l.len() - 1] {
            assert_eq!(l.index(l.multi_index(idx)), idx);
            assert_eq!(l.locate(l.coord(idx)), Some(idx));
        }
        assert_eq!(l.coord(l.index([4, 4, 4, 4])), Quaternion::ZERO);
    }

    #[test]
    fn stencil_orders() {
        let l = Lattice4D::new(Quaternion::ZERO, 1.0, 21).unwrap();
        let f: Vec<f64> = (0..l.len()).map(|k| l.coord(k).y.sin()).collect();
        let idx = l.index([10, 10, 10, 10]);
        let d2 = l.stencil(idx, 2, 2).unwrap().apply_f64(&f);
        let d4 = l.stencil(idx, 2, 4).unwrap().apply_f64(&f);
        assert!((d2 - 1.0).abs() < 2e-3);
        assert!((d4 - 1.0).abs() < 1e-5);
        assert!(l.stencil(l.index([0, 3, 3, 3]), 0, 2).is_err());
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let l = Lattice4D::ball(2.0, 6).unwrap();
        let vals: Vec<GaugePotential> = (0..l.len())
            .map(|k| {
                let z = l.coord(k);
                GaugePotential(std::array::from_fn(|i| {
                    ImQuaternion::new(z.w.sin() + i as f64, z.x * 1e-300, 1.0 / 3.0 + z.y * z.z)
                }))
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bin");
        write_potential_field(&path, &l, &vals).unwrap();
        let (l2, v2) = read_potential_field(&path).unwrap();
        assert_eq!(l, l2);
        for (a, b) in vals.iter().zip(&v2) {
            for i in 0..4 {
                for (x, y) in a.0[i].to_array().iter().zip(b.0[i].to_array()) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
        assert!(sidecar_path(&path).exists());
    }
}
