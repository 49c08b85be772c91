//! Synthetic sequences with known ground truth, test charts and PSNR.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AffineMap2D, GridSpec, ImageBuffer, MagnificationFactor};
use crate::obsmodels::{assemble_exact, FrameModel};

/// Smooth rotation/zoom motion ending at the identity.
///
/// Frame `K-1` is the reference. Going back to frame 0 the angle grows
/// linearly and the scale geometrically, reaching `max_rotation_deg` and
/// `max_zoom` at frame 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSchedule {
    pub n_frames: usize,
    pub max_rotation_deg: f64,
    pub max_zoom: f64,
    /// Fixed point of the motion, in SR coordinates.
    pub center: [f64; 2],
}

impl MotionSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return Err(Error::invalid("a motion schedule needs at least one frame"));
        }
        if !(self.max_zoom > 0.0 && self.max_zoom.is_finite()) {
            return Err(Error::invalid(format!("max_zoom must be positive, got {}", self.max_zoom)));
        }
        if !self.max_rotation_deg.is_finite() || self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("schedule angle and centre must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub variance: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { variance: 0.0, seed: 0 }
    }
}

pub fn schedule_to_motions(sched: &MotionSchedule) -> Result<Vec<AffineMap2D>> {
    sched.validate()?;
    let k = sched.n_frames;
    (0..k)
        .map(|i| {
            let t = if k == 1 { 0.0 } else { (k - 1 - i) as f64 / (k - 1) as f64 };
            if t == 0.0 {
                return Ok(AffineMap2D::identity());
            }
            AffineMap2D::rotation_zoom(
                (t * sched.max_rotation_deg).to_radians(),
                sched.max_zoom.powf(t),
                sched.center,
            )
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Sequence {
    pub frames: Vec<ImageBuffer>,
    pub clean: Vec<ImageBuffer>,
    pub motions: Vec<AffineMap2D>,
    pub lr: GridSpec,
}

/// LR grid matching an HR image at magnification `l`.
pub fn lr_grid_for(hr: GridSpec, l: MagnificationFactor) -> Result<GridSpec> {
    let lu = l.as_usize();
    if !hr.width().is_multiple_of(lu) || !hr.height().is_multiple_of(lu) {
        return Err(Error::invalid(format!(
            "HR size {}x{} is not divisible by L = {lu}",
            hr.width(),
            hr.height()
        )));
    }
    GridSpec::lr(hr.width() / lu, hr.height() / lu, l)
}

pub fn generate_sequence(
    hr: &ImageBuffer,
    sched: &MotionSchedule,
    l: MagnificationFactor,
    noise: NoiseSpec,
) -> Result<Sequence> {
    let motions = schedule_to_motions(sched)?;
    generate_with_motions(hr, &motions, l, noise)
}

/// Frames `y_k = A_k x + n_k` with the exact model. Frame `k` draws its
/// noise from stream `k` of the seeded generator.
pub fn generate_with_motions(
    hr: &ImageBuffer,
    motions: &[AffineMap2D],
    l: MagnificationFactor,
    noise: NoiseSpec,
) -> Result<Sequence> {
    if !(noise.variance >= 0.0 && noise.variance.is_finite()) {
        return Err(Error::invalid(format!("noise variance must be >= 0, got {}", noise.variance)));
    }
    if motions.is_empty() {
        return Err(Error::invalid("motion list is empty"));
    }
    let sr = GridSpec::sr(hr.width(), hr.height())?;
    let lr = lr_grid_for(sr, l)?;
    let normal = Normal::new(0.0, noise.variance.sqrt())
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
    let pairs: Vec<(ImageBuffer, ImageBuffer)> = motions
        .par_iter()
        .enumerate()
        .map(|(k, w)| {
            let model = assemble_exact(w, lr, sr, l).map_err(|e| e.in_frame(k))?;
            let clean = model.op().apply(hr.samples())?;
            let mut noisy = clean.clone();
            if noise.variance > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
                rng.set_stream(k as u64);
                for v in noisy.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
            }
            Ok((ImageBuffer::new(lr, noisy)?, ImageBuffer::new(lr, clean)?))
        })
        .collect::<Result<_>>()?;
    let (frames, clean) = pairs.into_iter().unzip();
    Ok(Sequence { frames, clean, motions: motions.to_vec(), lr })
}

/// SR pixels seen with positive weight by a masked-in detector of every
/// frame.
pub fn evaluation_region(models: &[FrameModel]) -> Result<Vec<bool>> {
    let first = models.first().ok_or_else(|| Error::invalid("no frame models"))?;
    let mut region = vec![true; first.op().cols()];
    for m in models {
        let mut seen = vec![false; region.len()];
        for r in m.masked_rows() {
            let (cols, vals) = m.op().row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if v > 0.0 {
                    seen[c] = true;
                }
            }
        }
        region.iter_mut().zip(seen).for_each(|(a, b)| *a &= b);
    }
    Ok(region)
}

/// Evaluation region of the exact models for `motions`.
pub fn exact_evaluation_region(
    motions: &[AffineMap2D],
    lr: GridSpec,
    sr: GridSpec,
    l: MagnificationFactor,
) -> Result<Vec<bool>> {
    let models = crate::obsmodels::assemble_sequence(
        crate::obsmodels::ModelKind::Exact,
        motions,
        lr,
        sr,
        l,
    )?;
    evaluation_region(&models)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Identical,
    Db(f64),
}

impl Psnr {
    fn from_mse(e: f64) -> Self {
        if e == 0.0 {
            Psnr::Identical
        } else {
            Psnr::Db(20.0 * (255.0 / e.sqrt()).log10())
        }
    }

    /// Decibels, with `Identical` as positive infinity.
    pub fn db(self) -> f64 {
        match self {
            Psnr::Identical => f64::INFINITY,
            Psnr::Db(v) => v,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Identical => f.write_str("identical"),
            Psnr::Db(v) => write!(f, "{v:.2} dB"),
        }
    }
}

fn check_same(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch {
            what: "PSNR image sizes",
            expected: a.samples().len(),
            got: b.samples().len(),
        });
    }
    Ok(())
}

pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<Psnr> {
    check_same(a, b)?;
    let n = a.samples().len() as f64;
    let e = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n;
    Ok(Psnr::from_mse(e))
}

/// PSNR restricted to the pixels where `region` is true.
pub fn psnr_masked(a: &ImageBuffer, b: &ImageBuffer, region: &[bool]) -> Result<Psnr> {
    check_same(a, b)?;
    if region.len() != a.samples().len() {
        return Err(Error::DimensionMismatch {
            what: "PSNR region",
            expected: a.samples().len(),
            got: region.len(),
        });
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for ((x, y), &keep) in a.samples().iter().zip(b.samples()).zip(region) {
        if keep {
            sum += (x - y).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::invalid("PSNR region is empty"));
    }
    Ok(Psnr::from_mse(sum / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ChartKind {
    /// Bar groups with periods 2, 4, ..., 16 in both orientations.
    Bars,
    /// Siemens star with the given number of dark/bright wedge pairs.
    Star { wedges: usize },
    Checker { period: usize },
}

pub const BAR_PERIODS: [usize; 8] = [2, 4, 6, 8, 10, 12, 14, 16];

pub fn make_test_chart(width: usize, height: usize, kind: ChartKind) -> Result<ImageBuffer> {
    if width < 16 || height < 16 {
        return Err(Error::invalid(format!("test charts need at least 16x16, got {width}x{height}")));
    }
    let grid = GridSpec::sr(width, height)?;
    let on = |b: bool| if b { 255.0 } else { 0.0 };
    match kind {
        ChartKind::Checker { period } => {
            if period == 0 {
                return Err(Error::invalid("checker period must be positive"));
            }
            ImageBuffer::from_fn(grid, |u, v| on((u / period + v / period) % 2 == 0))
        }
        ChartKind::Star { wedges } => {
            if wedges == 0 {
                return Err(Error::invalid("star needs at least one wedge"));
            }
            let c = grid.center();
            ImageBuffer::from_fn(grid, |u, v| {
                let theta = (v as f64 - c[1]).atan2(u as f64 - c[0]) + std::f64::consts::PI;
                let sector = (theta / std::f64::consts::TAU * (2 * wedges) as f64).floor() as usize;
                on(sector.is_multiple_of(2))
            })
        }
        ChartKind::Bars => {
            // top half: vertical bars varying along u; bottom half: the same
            // groups rotated by 90 degrees
            let groups = BAR_PERIODS.len();
            let half = height / 2;
            ImageBuffer::from_fn(grid, |u, v| {
                let (along, extent) = if v < half { (u, width) } else { (v - half, height - half) };
                let seg = (along * groups / extent).min(groups - 1);
                let start = seg * extent / groups;
                let p = BAR_PERIODS[seg];
                on((along - start) % p < p / 2)
            })
        }
    }
}
