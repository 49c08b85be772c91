use rayon::prelude::*;

use super::polygon::{clip, ConvexPolygon};
use super::{check_geometry, detector_mask, detector_square, FrameModel, ModelKind};
use crate::error::Result;
use crate::grid::{AffineMap2D, GridSpec, MagnificationFactor};
use crate::sparse::SparseOperator;

/// Exact box-detector / box-pixel model under an affine warp.
///
/// With `h` the unit-integral box of side `L` and unit pixel boxes, the
/// coefficient `a[n, i] = ∫ phi(w(v) - i) h(c_n - v) dv` becomes, after the
/// change of variables `u = w(v)`,
/// `area(w(D_n) ∩ P_i) / (|det M| L^2)`.
pub fn assemble_exact(
    w: &AffineMap2D,
    lr: GridSpec,
    sr: GridSpec,
    l: MagnificationFactor,
) -> Result<FrameModel> {
    check_geometry(lr, sr, l)?;
    let norm = 1.0 / (w.det().abs() * (l.get() as f64).powi(2));
    let flip = w.det() < 0.0;
    let rows: Vec<Vec<(usize, f64)>> = (0..lr.len())
        .into_par_iter()
        .map(|r| {
            let (n, m) = lr.coords(r);
            let [x0, y0, x1, y1] = detector_square(n, m, l);
            let mut quad: Vec<[f64; 2]> = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
                .iter()
                .map(|&p| w.apply(p))
                .collect();
            if flip {
                quad.reverse();
            }
            let footprint = ConvexPolygon::from_ccw_unchecked(quad);
            let (lo, hi) = bounding_pixels(footprint.vertices(), sr);
            let mut row = Vec::new();
            let (Some((ilo, jlo)), Some((ihi, jhi))) = (lo, hi) else {
                return row;
            };
            for j in jlo..=jhi {
                for i in ilo..=ihi {
                    let (cx, cy) = (i as f64, j as f64);
                    let pixel = ConvexPolygon::from_ccw_unchecked(vec![
                        [cx - 0.5, cy - 0.5],
                        [cx + 0.5, cy - 0.5],
                        [cx + 0.5, cy + 0.5],
                        [cx - 0.5, cy + 0.5],
                    ]);
                    if let Some(common) = clip(&footprint, &pixel) {
                        row.push((sr.index(i, j), common.area() * norm));
                    }
                }
            }
            row
        })
        .collect();
    let op = SparseOperator::from_rows(sr.len(), rows)?;
    FrameModel::new(ModelKind::Exact, op, detector_mask(w, lr, sr, l))
}

type PixelCorner = Option<(usize, usize)>;

/// Inclusive pixel-index bounding box of `pts`, clamped to the grid.
fn bounding_pixels(pts: &[[f64; 2]], sr: GridSpec) -> (PixelCorner, PixelCorner) {
    let (mut xmin, mut ymin) = (f64::INFINITY, f64::INFINITY);
    let (mut xmax, mut ymax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        xmin = xmin.min(p[0]);
        xmax = xmax.max(p[0]);
        ymin = ymin.min(p[1]);
        ymax = ymax.max(p[1]);
    }
    let clamp = |v: f64, n: usize| -> Option<usize> {
        let i = (v + 0.5).floor();
        if i < 0.0 || i >= n as f64 {
            None
        } else {
            Some(i as usize)
        }
    };
    let (w, h) = (sr.width(), sr.height());
    if xmax < -0.5 || ymax < -0.5 || xmin >= w as f64 - 0.5 || ymin >= h as f64 - 0.5 {
        return (None, None);
    }
    let lo = Some((
        clamp(xmin.max(-0.5), w).unwrap_or(0),
        clamp(ymin.max(-0.5), h).unwrap_or(0),
    ));
    let hi = Some((
        clamp(xmax.min(w as f64 - 0.5 - 1e-12), w).unwrap_or(w - 1),
        clamp(ymax.min(h as f64 - 0.5 - 1e-12), h).unwrap_or(h - 1),
    ));
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grids(l: u32, lr_side: usize) -> (GridSpec, GridSpec, MagnificationFactor) {
        let l = MagnificationFactor::new(l).unwrap();
        let lr = GridSpec::lr(lr_side, lr_side, l).unwrap();
        let sr = GridSpec::sr(lr_side * l.as_usize(), lr_side * l.as_usize()).unwrap();
        (lr, sr, l)
    }

    #[test]
    fn identity_l5_uniform_block() {
        let (lr, sr, l) = grids(5, 3);
        let m = assemble_exact(&AffineMap2D::identity(), lr, sr, l).unwrap();
        let (c, v) = m.op().row(lr.index(1, 1));
        assert_eq!(c.len(), 25);
        for &v in v {
            assert!((v - 1.0 / 25.0).abs() < 1e-15);
        }
        let patch = m.op().densify_row(lr.index(1, 1), sr).unwrap();
        assert!((patch.samples().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for u in 5..10 {
            for v in 5..10 {
                assert!(patch.get(u, v) > 0.0);
            }
        }
    }

    #[test]
    fn half_pixel_translation_splits_weights() {
        let (lr, sr, l) = grids(1, 6);
        let m = assemble_exact(&AffineMap2D::translation(0.5, 0.0).unwrap(), lr, sr, l).unwrap();
        let (c, v) = m.op().row(lr.index(2, 3));
        assert_eq!(c, &[sr.index(2, 3), sr.index(3, 3)]);
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mirrored_warp_keeps_positive_weights() {
        let (lr, sr, l) = grids(2, 8);
        let w = AffineMap2D::new([[-1.0, 0.0], [0.0, 1.0]], [15.0, 0.0]).unwrap();
        let m = assemble_exact(&w, lr, sr, l).unwrap();
        for r in m.masked_rows() {
            assert!((m.op().row_sum(r) - 1.0).abs() < 1e-12);
            assert!(m.op().row(r).1.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn matches_monte_carlo_integral() {
        let (lr, sr, l) = grids(3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let c = sr.center();
        for _ in 0..3 {
            let w = AffineMap2D::rotation_zoom(
                rng.random_range(-0.7..0.7),
                rng.random_range(0.7..1.3),
                c,
            )
            .unwrap();
            let m = assemble_exact(&w, lr, sr, l).unwrap();
            let r = m.masked_rows().next().unwrap();
            let (n, mm) = lr.coords(r);
            let [x0, y0, x1, y1] = detector_square(n, mm, l);
            let samples = 200_000;
            let mut hist = vec![0usize; sr.len()];
            for _ in 0..samples {
                let p = w.apply([rng.random_range(x0..x1), rng.random_range(y0..y1)]);
                let (i, j) = ((p[0] + 0.5).floor() as i64, (p[1] + 0.5).floor() as i64);
                if let Some(idx) = sr.checked_index(i, j) {
                    hist[idx] += 1;
                }
            }
            let dense = m.op().densify_row(r, sr).unwrap();
            for (idx, &h) in hist.iter().enumerate() {
                let mc = h as f64 / samples as f64;
                assert!((mc - dense.samples()[idx]).abs() < 3.0 / (samples as f64).sqrt());
            }
        }
    }
}
