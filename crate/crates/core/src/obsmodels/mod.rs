//! Per-frame observation operators `A_k` mapping SR coefficients to the
//! pixels of one LR frame.
//!
//! Every model shares the geometry of [`crate::grid`]: detectors are squares
//! of side `L` on the frame plane, the warp `w` carries frame-plane points to
//! the reference plane where the SR pixels are unit squares, and the detector
//! response is the unit-integral box.
//!
//! | kind     | construction                                                |
//! |----------|-------------------------------------------------------------|
//! | `Exact`  | area of `w(detector) ∩ pixel`, by polygon clipping          |
//! | `Cw`     | fixed axis-aligned `L x L` box centred on `w(detector)`     |
//! | `Ef0/1/3`| `D H W_k`, `W_k` pointwise interpolation at `w(q)`          |
//! | `Ts0`    | `D H S1 S2`, two separable L2 shear resamplings             |

mod approx;
mod exact;
pub mod footprint;
mod polygon;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AffineMap2D, GridSpec, MagnificationFactor};
use crate::sparse::SparseOperator;

pub use approx::{
    assemble_cw, assemble_ef, assemble_ts0, interpolation_warp, CwPlacement, InterpOrder,
};
pub use exact::assemble_exact;
pub use polygon::{clip, ConvexPolygon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Exact,
    #[serde(rename = "cw")]
    ConvolveThenWarp,
    Ef0,
    Ef1,
    Ef3,
    Ts0,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Exact,
        ModelKind::ConvolveThenWarp,
        ModelKind::Ef0,
        ModelKind::Ef1,
        ModelKind::Ef3,
        ModelKind::Ts0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Exact => "exact",
            ModelKind::ConvolveThenWarp => "cw",
            ModelKind::Ef0 => "ef0",
            ModelKind::Ef1 => "ef1",
            ModelKind::Ef3 => "ef3",
            ModelKind::Ts0 => "ts0",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown model kind `{s}` (expected exact, cw, ef0, ef1, ef3 or ts0)"
                ))
            })
    }
}

/// One frame's observation operator together with the mask of LR pixels
/// whose footprint lies safely inside the SR support.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameModel {
    kind: ModelKind,
    op: SparseOperator,
    mask: Vec<bool>,
}

impl FrameModel {
    pub fn new(kind: ModelKind, op: SparseOperator, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != op.rows() {
            return Err(Error::DimensionMismatch {
                what: "frame mask",
                expected: op.rows(),
                got: mask.len(),
            });
        }
        Ok(Self { kind, op, mask })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn op(&self) -> &SparseOperator {
        &self.op
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn masked_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }
}

/// Fine (SR-pitch) grid of a frame's acquisition plane: `L` positions per
/// detector along each axis.
pub fn frame_fine_grid(lr: GridSpec, l: MagnificationFactor) -> Result<GridSpec> {
    GridSpec::sr(lr.width() * l.as_usize(), lr.height() * l.as_usize())
}

/// Frame-plane square covered by detector `(n, m)`, as `[x0, y0, x1, y1]`.
pub fn detector_square(n: usize, m: usize, l: MagnificationFactor) -> [f64; 4] {
    let l = l.get() as f64;
    let (x0, y0) = (n as f64 * l - 0.5, m as f64 * l - 0.5);
    [x0, y0, x0 + l, y0 + l]
}

/// Frame-plane centre of detector `(n, m)`.
pub fn detector_center(n: usize, m: usize, l: MagnificationFactor) -> [f64; 2] {
    let [x0, y0, x1, y1] = detector_square(n, m, l);
    [0.5 * (x0 + x1), 0.5 * (y0 + y1)]
}

pub(crate) fn check_geometry(lr: GridSpec, sr: GridSpec, l: MagnificationFactor) -> Result<()> {
    if sr.pitch() != 1.0 {
        return Err(Error::invalid(format!("SR grid pitch must be 1, got {}", sr.pitch())));
    }
    if lr.pitch() != l.get() as f64 {
        return Err(Error::invalid(format!(
            "LR grid pitch {} does not match magnification factor {}",
            lr.pitch(),
            l.get()
        )));
    }
    Ok(())
}

/// LR pixels whose detector, grown by one detector width on every side and
/// mapped through `w`, stays inside the SR image rectangle.
pub fn detector_mask(
    w: &AffineMap2D,
    lr: GridSpec,
    sr: GridSpec,
    l: MagnificationFactor,
) -> Vec<bool> {
    let margin = l.get() as f64;
    let (xmax, ymax) = (sr.width() as f64 - 0.5, sr.height() as f64 - 0.5);
    let mut mask = Vec::with_capacity(lr.len());
    for m in 0..lr.height() {
        for n in 0..lr.width() {
            let [x0, y0, x1, y1] = detector_square(n, m, l);
            let corners = [
                [x0 - margin, y0 - margin],
                [x1 + margin, y0 - margin],
                [x1 + margin, y1 + margin],
                [x0 - margin, y1 + margin],
            ];
            mask.push(corners.iter().all(|&c| {
                let p = w.apply(c);
                p[0] >= -0.5 && p[0] <= xmax && p[1] >= -0.5 && p[1] <= ymax
            }));
        }
    }
    mask
}

/// Fused detector integration and decimation `D H`: detector `(n, m)`
/// averages the `L x L` fine-grid samples it covers.
pub fn detector_integration(lr: GridSpec, l: MagnificationFactor) -> Result<SparseOperator> {
    let fine = frame_fine_grid(lr, l)?;
    let l = l.as_usize();
    let w = 1.0 / (l * l) as f64;
    let rows = (0..lr.len())
        .map(|r| {
            let (n, m) = lr.coords(r);
            let mut row = Vec::with_capacity(l * l);
            for dv in 0..l {
                for du in 0..l {
                    row.push((fine.index(n * l + du, m * l + dv), w));
                }
            }
            row
        })
        .collect();
    SparseOperator::from_rows(fine.len(), rows)
}

/// Assembles one frame's operator of the requested kind.
pub fn assemble(
    kind: ModelKind,
    w: &AffineMap2D,
    lr: GridSpec,
    sr: GridSpec,
    l: MagnificationFactor,
) -> Result<FrameModel> {
    match kind {
        ModelKind::Exact => assemble_exact(w, lr, sr, l),
        ModelKind::ConvolveThenWarp => assemble_cw(w, lr, sr, l, CwPlacement::Bilinear),
        ModelKind::Ef0 => assemble_ef(InterpOrder::Nearest, w, lr, sr, l),
        ModelKind::Ef1 => assemble_ef(InterpOrder::Linear, w, lr, sr, l),
        ModelKind::Ef3 => assemble_ef(InterpOrder::Cubic, w, lr, sr, l),
        ModelKind::Ts0 => assemble_ts0(w, lr, sr, l),
    }
}

/// Assembles one model per motion, in order. Errors carry the frame index.
pub fn assemble_sequence(
    kind: ModelKind,
    motions: &[AffineMap2D],
    lr: GridSpec,
    sr: GridSpec,
    l: MagnificationFactor,
) -> Result<Vec<FrameModel>> {
    if motions.is_empty() {
        return Err(Error::invalid("motion list is empty"));
    }
    motions
        .par_iter()
        .enumerate()
        .map(|(k, w)| assemble(kind, w, lr, sr, l).map_err(|e| e.in_frame(k)))
        .collect()
}
