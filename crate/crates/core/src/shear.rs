//! Two-shear factorisation of planar affine maps and the separable image
//! operators that realise each shear.
//!
//! A horizontal shear maps `(u, v) -> (alpha u + beta v + eps, v)` and a
//! vertical shear maps `(u, v) -> (u, beta u + alpha v + eps)`. Any invertible
//! affine map with a non-vanishing diagonal pivot is the composition of one of
//! each; of the two possible orderings the one with the milder 1-D scale
//! changes is kept.

use crate::bspline1d::{resample_operator, Affine1D};
use crate::error::{Error, Result};
use crate::grid::{AffineMap2D, GridSpec};
use crate::sparse::SparseOperator;

/// Pivots below this magnitude are treated as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShearAxis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shear1D {
    axis: ShearAxis,
    alpha: f64,
    beta: f64,
    eps: f64,
}

impl Shear1D {
    pub fn new(axis: ShearAxis, alpha: f64, beta: f64, eps: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && eps.is_finite()) {
            return Err(Error::invalid("shear parameters must be finite"));
        }
        if alpha.abs() < PIVOT_THRESHOLD {
            return Err(Error::DegenerateShear(format!(
                "{axis:?} shear scale {alpha:e} is below {PIVOT_THRESHOLD:e}"
            )));
        }
        Ok(Self {
            axis,
            alpha,
            beta,
            eps,
        })
    }

    pub fn identity(axis: ShearAxis) -> Self {
        Self {
            axis,
            alpha: 1.0,
            beta: 0.0,
            eps: 0.0,
        }
    }

    pub fn axis(&self) -> ShearAxis {
        self.axis
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        match self.axis {
            ShearAxis::Horizontal => [self.alpha * p[0] + self.beta * p[1] + self.eps, p[1]],
            ShearAxis::Vertical => [p[0], self.beta * p[0] + self.alpha * p[1] + self.eps],
        }
    }

    pub fn as_affine(&self) -> AffineMap2D {
        let (m, t) = match self.axis {
            ShearAxis::Horizontal => ([[self.alpha, self.beta], [0.0, 1.0]], [self.eps, 0.0]),
            ShearAxis::Vertical => ([[1.0, 0.0], [self.beta, self.alpha]], [0.0, self.eps]),
        };
        AffineMap2D::new(m, t).expect("shear with non-zero alpha is invertible")
    }
}

/// Which shear acts first on points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShearOrder {
    HorizontalFirst,
    VerticalFirst,
}

/// Two shears of opposite axes; as a point map the pair is
/// `v -> second(first(v))`. Resampling an image by the pair applies them in
/// the opposite order: the image is first resampled along `second`'s axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearPair {
    first: Shear1D,
    second: Shear1D,
}

impl ShearPair {
    pub fn new(first: Shear1D, second: Shear1D) -> Result<Self> {
        if first.axis == second.axis {
            return Err(Error::invalid("a shear pair needs one horizontal and one vertical shear"));
        }
        Ok(Self { first, second })
    }

    pub fn first(&self) -> &Shear1D {
        &self.first
    }

    pub fn second(&self) -> &Shear1D {
        &self.second
    }

    pub fn order(&self) -> ShearOrder {
        match self.first.axis {
            ShearAxis::Horizontal => ShearOrder::HorizontalFirst,
            ShearAxis::Vertical => ShearOrder::VerticalFirst,
        }
    }

    /// `max(s, 1/s)` over the two 1-D scale magnitudes.
    pub fn scale_spread(&self) -> f64 {
        spread(self.first.alpha).max(spread(self.second.alpha))
    }
}

fn spread(alpha: f64) -> f64 {
    let s = alpha.abs();
    s.max(1.0 / s)
}

/// Horizontal shear applied first, vertical second: pivot is `m11`.
fn horizontal_first(w: &AffineMap2D) -> Option<ShearPair> {
    let m = w.matrix();
    let t = w.translation_part();
    if m[0][0].abs() < PIVOT_THRESHOLD {
        return None;
    }
    let beta1 = m[1][0] / m[0][0];
    let alpha1 = w.det() / m[0][0];
    let h = Shear1D::new(ShearAxis::Horizontal, m[0][0], m[0][1], t[0]).ok()?;
    let v = Shear1D::new(ShearAxis::Vertical, alpha1, beta1, t[1] - beta1 * t[0]).ok()?;
    Some(ShearPair {
        first: h,
        second: v,
    })
}

/// Vertical shear applied first, horizontal second: pivot is `m22`.
fn vertical_first(w: &AffineMap2D) -> Option<ShearPair> {
    let m = w.matrix();
    let t = w.translation_part();
    if m[1][1].abs() < PIVOT_THRESHOLD {
        return None;
    }
    let beta2 = m[0][1] / m[1][1];
    let alpha2 = w.det() / m[1][1];
    let v = Shear1D::new(ShearAxis::Vertical, m[1][1], m[1][0], t[1]).ok()?;
    let h = Shear1D::new(ShearAxis::Horizontal, alpha2, beta2, t[0] - beta2 * t[1]).ok()?;
    Some(ShearPair {
        first: v,
        second: h,
    })
}

/// Factors `w` into two shears, keeping the ordering with the smaller scale
/// spread. Ties go to horizontal-first.
pub fn decompose(w: &AffineMap2D) -> Result<ShearPair> {
    match (horizontal_first(w), vertical_first(w)) {
        (Some(h), Some(v)) => {
            if v.scale_spread() < h.scale_spread() - 1e-12 {
                Ok(v)
            } else {
                Ok(h)
            }
        }
        (Some(h), None) => Ok(h),
        (None, Some(v)) => Ok(v),
        (None, None) => {
            let m = w.matrix();
            Err(Error::DegenerateShear(format!(
                "both pivots vanish (m11 = {:e}, m22 = {:e}); the warp is too close to a quarter turn",
                m[0][0], m[1][1]
            )))
        }
    }
}

pub fn recompose(p: &ShearPair) -> AffineMap2D {
    p.second.as_affine().compose(&p.first.as_affine())
}

/// Operator resampling an image on `grid` by `s`: output pixel `p` holds the
/// L2 projection of `x(s(p))`.
pub fn shear_image_operator(s: &Shear1D, grid: GridSpec) -> Result<SparseOperator> {
    shear_operator_between(s, grid, grid)
}

/// As [`shear_image_operator`] with distinct source and destination grids.
/// The unsheared coordinate is shared: destination row `v` of a horizontal
/// shear reads source row `v` (zero when out of range).
pub fn shear_operator_between(
    s: &Shear1D,
    src: GridSpec,
    dst: GridSpec,
) -> Result<SparseOperator> {
    Shear1D::new(s.axis, s.alpha, s.beta, s.eps)?;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dst.len()];
    match s.axis {
        ShearAxis::Horizontal => {
            for v in 0..dst.height().min(src.height()) {
                let t = Affine1D::from_source_map(s.alpha, s.beta * v as f64 + s.eps)?;
                let line = resample_operator(dst.width(), src.width(), t)?;
                for u in 0..dst.width() {
                    let (c, w) = line.row(u);
                    rows[dst.index(u, v)] =
                        c.iter().zip(w).map(|(&c, &w)| (src.index(c, v), w)).collect();
                }
            }
        }
        ShearAxis::Vertical => {
            for u in 0..dst.width().min(src.width()) {
                let t = Affine1D::from_source_map(s.alpha, s.beta * u as f64 + s.eps)?;
                let line = resample_operator(dst.height(), src.height(), t)?;
                for v in 0..dst.height() {
                    let (c, w) = line.row(v);
                    rows[dst.index(u, v)] =
                        c.iter().zip(w).map(|(&c, &w)| (src.index(u, c), w)).collect();
                }
            }
        }
    }
    SparseOperator::from_rows(src.len(), rows)
}

/// Operator resampling an image on `src` into `x ∘ w` on `dst`, with
/// `w = recompose(pair)`. The intermediate image shares the unsheared axis
/// with each neighbour, so its grid is `src`-sized along the axis of the
/// shear applied to the image first and `dst`-sized along the other.
pub fn pair_image_operator(
    pair: &ShearPair,
    src: GridSpec,
    dst: GridSpec,
) -> Result<SparseOperator> {
    let (image_first, image_second) = (&pair.second, &pair.first);
    let mid = match image_first.axis {
        ShearAxis::Horizontal => GridSpec::sr(dst.width(), src.height())?,
        ShearAxis::Vertical => GridSpec::sr(src.width(), dst.height())?,
    };
    let stage1 = shear_operator_between(image_first, src, mid)?;
    let stage2 = shear_operator_between(image_second, mid, dst)?;
    stage2.compose(&stage1)
}
