//! Approximate observation models: convolve-then-warp, warp-then-convolve
//! with pointwise interpolation, and the two-shear L2 model.

use rayon::prelude::*;

use super::{
    check_geometry, detector_center, detector_integration, detector_mask, frame_fine_grid,
    FrameModel, ModelKind,
};
use crate::error::Result;
use crate::grid::{AffineMap2D, GridSpec, MagnificationFactor};
use crate::shear::{decompose, pair_image_operator};
use crate::sparse::SparseOperator;

/// How the convolve-then-warp footprint is positioned on the SR grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CwPlacement {
    /// `L x L` box at the exact warped centre, weights by area overlap.
    #[default]
    Bilinear,
    /// Box snapped to whole SR pixels: `L` pixels per axis, weight `1/L^2`.
    Rounded,
}

/// Pointwise interpolation kernel of the warp-then-convolve model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpOrder {
    Nearest,
    Linear,
    /// Cubic convolution with `a = -0.5`.
    Cubic,
}

impl InterpOrder {
    /// 1-D weights `(index, weight)` for sampling at coordinate `p`.
    fn taps(self, p: f64, out: &mut Vec<(i64, f64)>) {
        out.clear();
        match self {
            InterpOrder::Nearest => out.push(((p + 0.5).floor() as i64, 1.0)),
            InterpOrder::Linear => {
                let j = p.floor();
                let f = p - j;
                out.push((j as i64, 1.0 - f));
                out.push((j as i64 + 1, f));
            }
            InterpOrder::Cubic => {
                let j = p.floor();
                for k in -1..=2 {
                    let idx = j as i64 + k;
                    out.push((idx, keys(p - idx as f64)));
                }
            }
        }
    }
}

fn keys(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x < 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Overlap length of `[a0, a1]` with the unit cell centred at `i`.
fn overlap(a0: f64, a1: f64, i: i64) -> f64 {
    let (c0, c1) = (i as f64 - 0.5, i as f64 + 0.5);
    (a1.min(c1) - a0.max(c0)).max(0.0)
}

/// Convolve-then-warp: the detector is treated as an axis-aligned `L x L`
/// box around the warped detector centre, ignoring rotation and zoom.
pub fn assemble_cw(
    w: &AffineMap2D,
    lr: GridSpec,
    sr: GridSpec,
    l: MagnificationFactor,
    placement: CwPlacement,
) -> Result<FrameModel> {
    check_geometry(lr, sr, l)?;
    let lf = l.get() as f64;
    let norm = 1.0 / (lf * lf);
    let rows = (0..lr.len())
        .into_par_iter()
        .map(|r| {
            let (n, m) = lr.coords(r);
            let c = w.apply(detector_center(n, m, l));
            let axis = |centre: f64| -> Vec<(i64, f64)> {
                match placement {
                    CwPlacement::Bilinear => {
                        let (a0, a1) = (centre - 0.5 * lf, centre + 0.5 * lf);
                        let lo = (a0 + 0.5).floor() as i64;
                        let hi = (a1 + 0.5).ceil() as i64;
                        (lo..=hi)
                            .map(|i| (i, overlap(a0, a1, i)))
                            .filter(|&(_, len)| len > 0.0)
                            .collect()
                    }
                    CwPlacement::Rounded => {
                        let start = (centre - 0.5 * (lf - 1.0)).round() as i64;
                        (start..start + l.get() as i64).map(|i| (i, 1.0)).collect()
                    }
                }
            };
            let (xs, ys) = (axis(c[0]), axis(c[1]));
            let mut row = Vec::with_capacity(xs.len() * ys.len());
            for &(j, wy) in &ys {
                for &(i, wx) in &xs {
                    if let Some(idx) = sr.checked_index(i, j) {
                        row.push((idx, wx * wy * norm));
                    }
                }
            }
            row
        })
        .collect();
    let op = SparseOperator::from_rows(sr.len(), rows)?;
    FrameModel::new(
        ModelKind::ConvolveThenWarp,
        op,
        detector_mask(w, lr, sr, l),
    )
}

/// Pointwise warp operator `W`: row `q` of the fine frame grid interpolates
/// the SR image at `w(q)`, with zero padding.
pub fn interpolation_warp(
    order: InterpOrder,
    w: &AffineMap2D,
    fine: GridSpec,
    sr: GridSpec,
) -> Result<SparseOperator> {
    let rows = (0..fine.len())
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(tx, ty), q| {
                let (u, v) = fine.coords(q);
                let p = w.apply([u as f64, v as f64]);
                order.taps(p[0], tx);
                order.taps(p[1], ty);
                let mut row = Vec::with_capacity(tx.len() * ty.len());
                for &(j, wy) in ty.iter() {
                    for &(i, wx) in tx.iter() {
                        if let Some(idx) = sr.checked_index(i, j) {
                            row.push((idx, wx * wy));
                        }
                    }
                }
                row
            },
        )
        .collect();
    SparseOperator::from_rows(sr.len(), rows)
}

/// Warp-then-convolve model `D H W`.
pub fn assemble_ef(
    order: InterpOrder,
    w: &AffineMap2D,
    lr: GridSpec,
    sr: GridSpec,
    l: MagnificationFactor,
) -> Result<FrameModel> {
    check_geometry(lr, sr, l)?;
    let fine = frame_fine_grid(lr, l)?;
    let warp = interpolation_warp(order, w, fine, sr)?;
    let op = detector_integration(lr, l)?.compose(&warp)?;
    let kind = match order {
        InterpOrder::Nearest => ModelKind::Ef0,
        InterpOrder::Linear => ModelKind::Ef1,
        InterpOrder::Cubic => ModelKind::Ef3,
    };
    FrameModel::new(kind, op, detector_mask(w, lr, sr, l))
}

/// Two-shear model `D H S1 S2` with order-0 L2 resampling in each pass.
pub fn assemble_ts0(
    w: &AffineMap2D,
    lr: GridSpec,
    sr: GridSpec,
    l: MagnificationFactor,
) -> Result<FrameModel> {
    check_geometry(lr, sr, l)?;
    let pair = decompose(w)?;
    let fine = frame_fine_grid(lr, l)?;
    let shears = pair_image_operator(&pair, sr, fine)?;
    let op = detector_integration(lr, l)?.compose(&shears)?;
    FrameModel::new(ModelKind::Ts0, op, detector_mask(w, lr, sr, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obsmodels::assemble_exact;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grids(l: u32, lr_side: usize) -> (GridSpec, GridSpec, MagnificationFactor) {
        let l = MagnificationFactor::new(l).unwrap();
        let lr = GridSpec::lr(lr_side, lr_side, l).unwrap();
        let sr = GridSpec::sr(lr_side * l.as_usize(), lr_side * l.as_usize()).unwrap();
        (lr, sr, l)
    }

    #[test]
    fn keys_kernel_values() {
        assert_eq!(keys(0.0), 1.0);
        assert_eq!(keys(1.0), 0.0);
        assert_eq!(keys(2.0), 0.0);
        assert!(keys(1.5) < 0.0);
        for f in [0.1, 0.37, 0.5, 0.93] {
            let s: f64 = (-1..=2).map(|k| keys(f - k as f64)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn translations_collapse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for l in [2, 3] {
            let (lr, sr, l) = grids(l, 6);
            for _ in 0..5 {
                let w = AffineMap2D::translation(
                    rng.random_range(-1.5..1.5),
                    rng.random_range(-1.5..1.5),
                )
                .unwrap();
                let exact = assemble_exact(&w, lr, sr, l).unwrap();
                let cw = assemble_cw(&w, lr, sr, l, CwPlacement::Bilinear).unwrap();
                assert!(exact.op().max_abs_diff(cw.op()).unwrap() < 1e-9);
                let ef1 = assemble_ef(InterpOrder::Linear, &w, lr, sr, l).unwrap();
                let ts0 = assemble_ts0(&w, lr, sr, l).unwrap();
                assert!(ef1.op().max_abs_diff(ts0.op()).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn rounded_cw_snaps_to_pixels() {
        let (lr, sr, l) = grids(2, 5);
        let w = AffineMap2D::translation(0.3, 0.0).unwrap();
        let m = assemble_cw(&w, lr, sr, l, CwPlacement::Rounded).unwrap();
        let (c, v) = m.op().row(lr.index(2, 2));
        assert_eq!(c.len(), 4);
        assert!(v.iter().all(|&v| v == 0.25));
        let id = assemble_cw(&AffineMap2D::identity(), lr, sr, l, CwPlacement::Rounded).unwrap();
        let exact = assemble_exact(&AffineMap2D::identity(), lr, sr, l).unwrap();
        assert!(id.op().max_abs_diff(exact.op()).unwrap() < 1e-15);
    }

    #[test]
    fn rows_sum_to_one_and_signs() {
        let (lr, sr, l) = grids(3, 10);
        let w = AffineMap2D::rotation_zoom(0.4, 1.2, sr.center()).unwrap();
        for kind in ModelKind::ALL {
            let m = crate::obsmodels::assemble(kind, &w, lr, sr, l).unwrap();
            assert!(m.masked_rows().count() > 0);
            for r in m.masked_rows() {
                assert!((m.op().row_sum(r) - 1.0).abs() < 1e-9, "{kind} row {r}");
            }
            if kind != ModelKind::Ef3 {
                for r in 0..lr.len() {
                    assert!(m.op().row(r).1.iter().all(|&v| v >= -1e-12), "{kind}");
                }
            }
        }
    }

    #[test]
    fn warp_rows_interpolate_linear_ramp() {
        // linear interpolation reproduces affine functions exactly
        let sr = GridSpec::sr(12, 12).unwrap();
        let fine = GridSpec::sr(12, 12).unwrap();
        let w = AffineMap2D::rotation_zoom(0.3, 0.9, sr.center()).unwrap();
        let x: Vec<f64> = (0..sr.len())
            .map(|i| {
                let (u, v) = sr.coords(i);
                2.0 * u as f64 - 0.5 * v as f64 + 3.0
            })
            .collect();
        for order in [InterpOrder::Linear, InterpOrder::Cubic] {
            let op = interpolation_warp(order, &w, fine, sr).unwrap();
            let y = op.apply(&x).unwrap();
            for q in 0..fine.len() {
                let (u, v) = fine.coords(q);
                let p = w.apply([u as f64, v as f64]);
                if p.iter().all(|&c| (2.0..9.0).contains(&c)) {
                    let want = 2.0 * p[0] - 0.5 * p[1] + 3.0;
                    assert!((y[q] - want).abs() < 1e-10);
                }
            }
        }
    }
}
