//! File formats: binary PGM, the raw float sidecar and motion CSV files.
//!
//! The float sidecar is an ASCII line `width height\n` followed by
//! `width * height` little-endian `f32` samples in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AffineMap2D, GridSpec, ImageBuffer};

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), message: message.into() }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Encodes as 8-bit P5, rounding and clamping samples to `[0, 255]`.
pub fn encode_pgm(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.samples().iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    out
}

pub fn write_pgm(path: &Path, img: &ImageBuffer) -> Result<()> {
    write_bytes(path, &encode_pgm(img))
}

/// Decodes binary PGM (P5) with 8- or 16-bit samples. Values keep the
/// file's scale (0..maxval).
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<ImageBuffer> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(format_err(path, "not a binary PGM (expected magic P5)"));
    }
    let mut number = |what: &str| -> Result<usize> {
        let t = token()?;
        t.parse().map_err(|_| format_err(path, format!("bad PGM {what} `{t}`")))
    };
    let (w, h, maxval) = (number("width")?, number("height")?, number("maxval")?);
    if maxval == 0 || maxval > 65535 {
        return Err(format_err(path, format!("PGM maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    let data = &bytes[(pos + 1).min(bytes.len())..];
    let bps = if maxval < 256 { 1 } else { 2 };
    let n = w * h;
    if data.len() < n * bps {
        return Err(format_err(path, format!("PGM raster has {} bytes, expected {}", data.len(), n * bps)));
    }
    let samples = if bps == 1 {
        data[..n].iter().map(|&b| b as f64).collect()
    } else {
        data[..2 * n].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64).collect()
    };
    let grid = GridSpec::sr(w, h).map_err(|e| format_err(path, e.to_string()))?;
    ImageBuffer::new(grid, samples)
}

pub fn read_pgm(path: &Path) -> Result<ImageBuffer> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}

pub fn encode_f32(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("{} {}\n", img.width(), img.height()).into_bytes();
    out.reserve(4 * img.samples().len());
    for &v in img.samples() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn write_f32(path: &Path, img: &ImageBuffer) -> Result<()> {
    write_bytes(path, &encode_f32(img))
}

pub fn decode_f32(bytes: &[u8], path: &Path) -> Result<ImageBuffer> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| format_err(path, "missing float sidecar header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| format_err(path, "header is not ASCII"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format_err(path, format!("bad dimension `{t}`"))))
        .collect::<Result<_>>()?;
    let [w, h] = dims[..] else {
        return Err(format_err(path, "header must be `width height`"));
    };
    let data = &bytes[nl + 1..];
    if data.len() != 4 * w * h {
        return Err(format_err(path, format!("expected {} sample bytes, found {}", 4 * w * h, data.len())));
    }
    let samples = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let grid = GridSpec::sr(w, h).map_err(|e| format_err(path, e.to_string()))?;
    ImageBuffer::new(grid, samples).map_err(|e| format_err(path, e.to_string()))
}

pub fn read_f32(path: &Path) -> Result<ImageBuffer> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_f32(&bytes, path)
}

/// Reads an image by extension: `.f32` sidecar or PGM otherwise.
pub fn read_image(path: &Path) -> Result<ImageBuffer> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("f32") => read_f32(path),
        _ => read_pgm(path),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionRecord {
    pub index: usize,
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
    pub t1: f64,
    pub t2: f64,
}

impl MotionRecord {
    pub fn from_map(index: usize, w: &AffineMap2D) -> Self {
        let m = w.matrix();
        let t = w.translation_part();
        Self { index, m11: m[0][0], m12: m[0][1], m21: m[1][0], m22: m[1][1], t1: t[0], t2: t[1] }
    }

    pub fn to_map(&self) -> Result<AffineMap2D> {
        AffineMap2D::new([[self.m11, self.m12], [self.m21, self.m22]], [self.t1, self.t2])
    }
}

pub fn write_motions(path: &Path, motions: &[AffineMap2D]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format_err(path, e.to_string()))?;
    for (k, m) in motions.iter().enumerate() {
        w.serialize(MotionRecord::from_map(k, m)).map_err(|e| format_err(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Orders records by index, requiring each of `0..K` exactly once.
pub fn motions_from_records(mut records: Vec<MotionRecord>, path: &Path) -> Result<Vec<AffineMap2D>> {
    records.sort_by_key(|r| r.index);
    for (k, r) in records.iter().enumerate() {
        if r.index != k {
            return Err(format_err(
                path,
                format!("motion indices must be 0..{} each exactly once (problem at index {})", records.len(), r.index),
            ));
        }
    }
    if records.is_empty() {
        return Err(format_err(path, "motion file has no records"));
    }
    records
        .iter()
        .map(|r| r.to_map().map_err(|e| format_err(path, format!("motion {}: {e}", r.index))))
        .collect()
}

pub fn read_motions(path: &Path) -> Result<Vec<AffineMap2D>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let records = reader
        .deserialize()
        .collect::<std::result::Result<Vec<MotionRecord>, _>>()
        .map_err(|e| format_err(path, e.to_string()))?;
    motions_from_records(records, path)
}
