//! Sampling grids, scalar images and affine maps.
//!
//! All geometry is expressed in SR-pitch units (the SR pixel spacing is 1).
//! SR pixel `(i, j)` is the unit square centred at `(i, j)`. With a
//! magnification factor `L`, detector `(n, l)` of an LR frame covers the
//! half-open square `[nL - 1/2, nL + L - 1/2) x [lL - 1/2, lL + L - 1/2)` of
//! its acquisition plane, i.e. exactly the SR-pitch positions
//! `nL .. nL + L - 1` along each axis when the motion is the identity.
//!
//! Images are stored row-major: sample `(u, v)` lives at `v * width + u`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    width: usize,
    height: usize,
    pitch: f64,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, pitch: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::invalid(format!("grid pitch must be positive, got {pitch}")));
        }
        Ok(Self {
            width,
            height,
            pitch,
        })
    }

    /// SR grid (pitch 1).
    pub fn sr(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, 1.0)
    }

    /// LR detector grid whose pitch is `l` SR pixels.
    pub fn lr(width: usize, height: usize, l: MagnificationFactor) -> Result<Self> {
        Self::new(width, height, l.get() as f64)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        debug_assert!(u < self.width && v < self.height);
        v * self.width + u
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    /// Index of `(u, v)` when both lie inside the grid.
    #[inline]
    pub fn checked_index(&self, u: i64, v: i64) -> Option<usize> {
        if u < 0 || v < 0 || u >= self.width as i64 || v >= self.height as i64 {
            None
        } else {
            Some(v as usize * self.width + u as usize)
        }
    }

    /// Geometric centre in SR-pitch coordinates of a pitch-1 grid.
    pub fn center(&self) -> [f64; 2] {
        [
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        ]
    }
}

/// Practical magnification factor `L`, the LR/SR pitch ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MagnificationFactor(u32);

impl MagnificationFactor {
    pub fn new(l: u32) -> Result<Self> {
        if l == 0 {
            return Err(Error::invalid("magnification factor must be at least 1"));
        }
        Ok(Self(l))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_usize(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    grid: GridSpec,
    samples: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(grid: GridSpec, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "image samples",
                expected: grid.len(),
                got: samples.len(),
            });
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {pos}")));
        }
        Ok(Self { grid, samples })
    }

    pub fn filled(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            samples: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut samples = Vec::with_capacity(grid.len());
        for v in 0..grid.height() {
            for u in 0..grid.width() {
                samples.push(f(u, v));
            }
        }
        Self::new(grid, samples)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.samples[self.grid.index(u, v)]
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
}

/// Affine warp `w(v) = M v + t` from a frame's acquisition plane to the
/// reference plane, both in SR-pitch units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap2D {
    m: [[f64; 2]; 2],
    t: [f64; 2],
}

impl AffineMap2D {
    pub fn new(m: [[f64; 2]; 2], t: [f64; 2]) -> Result<Self> {
        if m.iter().flatten().chain(t.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("affine map entries must be finite"));
        }
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det == 0.0 {
            return Err(Error::invalid("affine map is not invertible (det = 0)"));
        }
        Ok(Self { m, t })
    }

    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0], [0.0, 1.0]],
            t: [0.0, 0.0],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Result<Self> {
        Self::new([[1.0, 0.0], [0.0, 1.0]], [tx, ty])
    }

    /// Rotation by `angle_rad` combined with an isotropic `scale`, both about
    /// the fixed point `center`: `w(v) = scale * R (v - c) + c`.
    pub fn rotation_zoom(angle_rad: f64, scale: f64, center: [f64; 2]) -> Result<Self> {
        let (s, c) = angle_rad.sin_cos();
        let m = [[scale * c, -scale * s], [scale * s, scale * c]];
        let t = [
            center[0] - (m[0][0] * center[0] + m[0][1] * center[1]),
            center[1] - (m[1][0] * center[0] + m[1][1] * center[1]),
        ];
        Self::new(m, t)
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.m
    }

    pub fn translation_part(&self) -> [f64; 2] {
        self.t
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    #[inline]
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * p[0] + self.m[0][1] * p[1] + self.t[0],
            self.m[1][0] * p[0] + self.m[1][1] * p[1] + self.t[1],
        ]
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        let mi = [
            [self.m[1][1] / d, -self.m[0][1] / d],
            [-self.m[1][0] / d, self.m[0][0] / d],
        ];
        let ti = [
            -(mi[0][0] * self.t[0] + mi[0][1] * self.t[1]),
            -(mi[1][0] * self.t[0] + mi[1][1] * self.t[1]),
        ];
        Self { m: mi, t: ti }
    }

    /// `self ∘ inner`: apply `inner` first, then `self`.
    pub fn compose(&self, inner: &AffineMap2D) -> Self {
        let a = self.m;
        let b = inner.m;
        let m = [
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ];
        let t = self.apply(inner.t);
        Self { m, t }
    }

    /// Largest absolute entrywise difference, translation included.
    pub fn max_abs_diff(&self, other: &AffineMap2D) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .chain(self.t.iter().zip(other.t.iter()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_empty_and_bad_pitch() {
        assert!(GridSpec::new(0, 3, 1.0).is_err());
        assert!(GridSpec::new(3, 3, 0.0).is_err());
        assert!(GridSpec::new(3, 3, f64::NAN).is_err());
        let g = GridSpec::sr(4, 3).unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(g.index(1, 2), 9);
        assert_eq!(g.coords(9), (1, 2));
        assert_eq!(g.checked_index(-1, 0), None);
        assert_eq!(g.checked_index(3, 2), Some(11));
    }

    #[test]
    fn image_rejects_non_finite() {
        let g = GridSpec::sr(2, 1).unwrap();
        assert!(ImageBuffer::new(g, vec![0.0, f64::INFINITY]).is_err());
        assert!(ImageBuffer::new(g, vec![0.0]).is_err());
    }

    #[test]
    fn affine_inverse_and_compose() {
        let w = AffineMap2D::new([[1.2, 0.3], [-0.4, 0.9]], [2.0, -1.0]).unwrap();
        let id = w.compose(&w.inverse());
        assert!(id.max_abs_diff(&AffineMap2D::identity()) < 1e-14);
        let p = [3.0, 7.0];
        let q = w.apply(p);
        let back = w.inverse().apply(q);
        assert!((back[0] - p[0]).abs() < 1e-12 && (back[1] - p[1]).abs() < 1e-12);
    }

    #[test]
    fn rotation_zoom_fixes_center() {
        let c = [10.5, 4.0];
        let w = AffineMap2D::rotation_zoom(0.3, 1.6, c).unwrap();
        let q = w.apply(c);
        assert!((q[0] - c[0]).abs() < 1e-12 && (q[1] - c[1]).abs() < 1e-12);
        assert!((w.det() - 1.6 * 1.6).abs() < 1e-12);
    }

    #[test]
    fn singular_map_rejected() {
        assert!(AffineMap2D::new([[1.0, 2.0], [2.0, 4.0]], [0.0, 0.0]).is_err());
    }
}
