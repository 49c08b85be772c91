//! Single-detector footprints: the SR coefficients one detector integrates
//! under a rotation/zoom warp, normalised so the exact interior reads 1.

use super::{assemble, assemble_exact, ModelKind};
use crate::error::{Error, Result};
use crate::grid::{AffineMap2D, GridSpec, ImageBuffer, MagnificationFactor};

/// Detectors per side of the small LR frame used for footprints.
const LR_SIDE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootprintSpec {
    pub kind: ModelKind,
    pub l: MagnificationFactor,
    pub rotation_deg: f64,
    pub zoom: f64,
    /// Row-major index into the 3x3 detector block; 4 is the centre.
    pub detector: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootprintStats {
    pub min: f64,
    pub max: f64,
    pub interior_mean: f64,
    pub interior_std: f64,
    pub rms_vs_exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub patch: ImageBuffer,
    pub exact: ImageBuffer,
    pub stats: FootprintStats,
}

/// Warp and grids for a footprint: the frame centre maps onto the SR centre.
pub fn footprint_geometry(
    spec: &FootprintSpec,
) -> Result<(AffineMap2D, GridSpec, GridSpec)> {
    if !(spec.zoom > 0.0 && spec.zoom.is_finite() && spec.rotation_deg.is_finite()) {
        return Err(Error::invalid(format!(
            "footprint needs a finite positive zoom and finite angle, got zoom {} angle {}",
            spec.zoom, spec.rotation_deg
        )));
    }
    if spec.detector >= LR_SIDE * LR_SIDE {
        return Err(Error::invalid(format!(
            "detector index {} out of range 0..{}",
            spec.detector,
            LR_SIDE * LR_SIDE
        )));
    }
    let lf = spec.l.get() as f64;
    let lr = GridSpec::lr(LR_SIDE, LR_SIDE, spec.l)?;
    let reach = 1.5 * lf * spec.zoom * std::f64::consts::SQRT_2 + 6.0;
    let side = 2 * reach.ceil() as usize + 1;
    let sr = GridSpec::sr(side, side)?;
    let cf = 0.5 * (LR_SIDE as f64 * lf - 1.0);
    let cs = 0.5 * (side as f64 - 1.0);
    let (s, c) = spec.rotation_deg.to_radians().sin_cos();
    let m = [[spec.zoom * c, -spec.zoom * s], [spec.zoom * s, spec.zoom * c]];
    let t = [
        cs - (m[0][0] * cf + m[0][1] * cf),
        cs - (m[1][0] * cf + m[1][1] * cf),
    ];
    Ok((AffineMap2D::new(m, t)?, lr, sr))
}

pub fn footprint(spec: &FootprintSpec) -> Result<Footprint> {
    let (w, lr, sr) = footprint_geometry(spec)?;
    let scale = (spec.l.get() as f64).powi(2) * w.det().abs();
    let normalised = |img: ImageBuffer| {
        let g = img.grid();
        ImageBuffer::new(g, img.into_samples().into_iter().map(|v| v * scale).collect())
    };
    let exact = normalised(
        assemble_exact(&w, lr, sr, spec.l)?
            .op()
            .densify_row(spec.detector, sr)?,
    )?;
    let patch = normalised(
        assemble(spec.kind, &w, lr, sr, spec.l)?
            .op()
            .densify_row(spec.detector, sr)?,
    )?;
    let stats = footprint_stats(&patch, &exact);
    Ok(Footprint { patch, exact, stats })
}

/// Statistics of a normalised patch against the normalised exact patch.
/// The interior is the set of pixels the exact footprint fully covers.
pub fn footprint_stats(patch: &ImageBuffer, exact: &ImageBuffer) -> FootprintStats {
    let interior: Vec<f64> = patch
        .samples()
        .iter()
        .zip(exact.samples())
        .filter(|(_, &e)| e >= 1.0 - 1e-9)
        .map(|(&p, _)| p)
        .collect();
    let (interior_mean, interior_std) = if interior.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let n = interior.len() as f64;
        let mean = interior.iter().sum::<f64>() / n;
        let var = interior.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let (mut sq, mut count) = (0.0, 0usize);
    for (&p, &e) in patch.samples().iter().zip(exact.samples()) {
        if p != 0.0 || e != 0.0 {
            sq += (p - e).powi(2);
            count += 1;
        }
    }
    FootprintStats {
        min: patch.min(),
        max: patch.max(),
        interior_mean,
        interior_std,
        rms_vs_exact: if count == 0 { 0.0 } else { (sq / count as f64).sqrt() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ModelKind, l: u32, rotation_deg: f64, zoom: f64) -> FootprintSpec {
        FootprintSpec {
            kind,
            l: MagnificationFactor::new(l).unwrap(),
            rotation_deg,
            zoom,
            detector: 4,
        }
    }

    #[test]
    fn exact_aligned_patch_is_uniform() {
        let f = footprint(&spec(ModelKind::Exact, 5, 0.0, 1.0)).unwrap();
        assert_eq!(f.patch.samples().iter().filter(|&&v| v > 0.0).count(), 25);
        assert!(f.stats.interior_std < 1e-12);
        assert!((f.stats.interior_mean - 1.0).abs() < 1e-12);
        assert_eq!(f.stats.rms_vs_exact, 0.0);
    }

    #[test]
    fn nearest_neighbour_doubles_some_coefficients() {
        let f = footprint(&spec(ModelKind::Ef0, 5, 45.0, 1.0)).unwrap();
        assert!((f.stats.max - 2.0).abs() < 1e-9, "{}", f.stats.max);
    }

    #[test]
    fn cubic_has_negative_lobes() {
        let f = footprint(&spec(ModelKind::Ef3, 5, 45.0, 1.6)).unwrap();
        assert!(f.stats.min < 0.0);
    }

    #[test]
    fn two_shear_interior_is_flat() {
        let ts0 = footprint(&spec(ModelKind::Ts0, 5, 30.0, 1.6)).unwrap();
        let ef1 = footprint(&spec(ModelKind::Ef1, 5, 30.0, 1.6)).unwrap();
        let cv = |s: &FootprintStats| s.interior_std / s.interior_mean;
        assert!(cv(&ts0.stats) <= 0.05, "ts0 {:?}", ts0.stats);
        assert!(cv(&ef1.stats) >= 0.3, "ef1 {:?}", ef1.stats);
    }

    #[test]
    fn rejects_bad_detector() {
        let mut s = spec(ModelKind::Exact, 2, 0.0, 1.0);
        s.detector = 9;
        assert!(footprint(&s).is_err());
    }
}
