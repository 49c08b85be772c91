//! Run configuration: a TOML document with fixed sections. Unknown keys are
//! rejected, and dotted-path overrides are applied before validation.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bench::Setting;
use crate::error::{Error, Result};
use crate::io::MotionRecord;
use crate::obsmodels::ModelKind;
use crate::reconstruct::CliqueDirection;

fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    pub magnification: u32,
    pub sr_width: usize,
    pub sr_height: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Self { magnification: 2, sr_width: 128, sr_height: 128 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartName {
    Bars,
    Star,
    Checker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Source {
    pub chart: ChartName,
    pub period: usize,
    pub wedges: usize,
    /// Grayscale PGM or `.f32` image used instead of the chart.
    pub image: Option<PathBuf>,
}

impl Default for Source {
    fn default() -> Self {
        Self { chart: ChartName::Bars, period: 4, wedges: 24, image: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Motion {
    pub frames: usize,
    pub max_rotation_deg: f64,
    pub max_zoom: f64,
    /// Defaults to the SR image centre.
    pub center: Option<[f64; 2]>,
    /// Motion CSV to use instead of the schedule.
    pub file: Option<PathBuf>,
    /// Per-frame maps given inline; takes precedence over `file`.
    pub explicit: Vec<MotionRecord>,
}

impl Default for Motion {
    fn default() -> Self {
        Self {
            frames: 20,
            max_rotation_deg: 20.0,
            max_zoom: 1.6,
            center: None,
            file: None,
            explicit: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Model {
    pub kind: ModelKind,
}

impl Default for Model {
    fn default() -> Self {
        Self { kind: ModelKind::Ts0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Regularization {
    pub lambda: f64,
    /// Hyperbolic threshold; `inf` selects the quadratic penalty.
    pub s: f64,
    pub positivity: bool,
    pub cliques: Vec<CliqueDirection>,
}

impl Default for Regularization {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            s: f64::INFINITY,
            positivity: false,
            cliques: CliqueDirection::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitName {
    Zero,
    MeanBackprojection,
    Given,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Optimizer {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
    pub memory: usize,
    pub init: InitName,
    pub init_image: Option<PathBuf>,
}

impl Default for Optimizer {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-8,
            f_tol: 1e-10,
            memory: 7,
            init: InitName::MeanBackprojection,
            init_image: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Noise {
    pub variance: f64,
    pub seed: u64,
}

impl Default for Noise {
    fn default() -> Self {
        Self { variance: 2.0, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Io {
    pub out_dir: PathBuf,
    /// Where `reconstruct` reads frames; defaults to `out_dir`.
    pub frames_dir: Option<PathBuf>,
    /// Defaults to `motions.csv` inside the frames directory.
    pub motion_file: Option<PathBuf>,
    /// HR truth for scoring reconstructions.
    pub hr_reference: Option<PathBuf>,
}

impl Default for Io {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("out"), frames_dir: None, motion_file: None, hr_reference: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Footprint {
    pub rotation_deg: f64,
    pub zoom: f64,
    pub detector: usize,
}

impl Default for Footprint {
    fn default() -> Self {
        Self { rotation_deg: 30.0, zoom: 1.6, detector: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bench {
    pub models: Vec<ModelKind>,
    pub settings: Vec<Setting>,
    pub lambdas: Vec<f64>,
    /// Threshold used by the hyperbolic settings.
    pub s: f64,
}

impl Default for Bench {
    fn default() -> Self {
        Self {
            models: vec![ModelKind::Ef0, ModelKind::Ef1, ModelKind::Ts0],
            settings: Setting::ALL.to_vec(),
            lambdas: vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2],
            s: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub grids: Grids,
    pub source: Source,
    pub motion: Motion,
    pub model: Model,
    pub regularization: Regularization,
    pub optimizer: Optimizer,
    pub noise: Noise,
    pub io: Io,
    pub footprint: Footprint,
    pub bench: Bench,
}

const SECTIONS: [&str; 10] = [
    "grids",
    "source",
    "motion",
    "model",
    "regularization",
    "optimizer",
    "noise",
    "io",
    "footprint",
    "bench",
];

fn section<T: DeserializeOwned + Default>(table: &toml::Table, name: &str) -> Result<T> {
    match table.get(name) {
        None => Ok(T::default()),
        Some(toml::Value::Table(t)) => {
            T::deserialize(toml::Value::Table(t.clone())).map_err(|e| {
                let msg = e.to_string();
                // name the offending key when serde reports one
                let key = msg
                    .split('`')
                    .nth(1)
                    .filter(|_| msg.contains("field"))
                    .map(|k| format!("{name}.{k}"))
                    .unwrap_or_else(|| name.to_string());
                config_err(key, msg.trim().to_string())
            })
        }
        Some(_) => Err(config_err(name, "expected a table")),
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `a.b.c = value` to the document tree.
pub fn apply_override(table: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.len() < 2 || keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(path, "overrides must name `section.key`"));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_err(path, format!("`{k}` is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), parse_value(raw));
    Ok(())
}

/// Splits `--a.b value` and `--a.b=value` pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let Some(flag) = args[i].strip_prefix("--") else {
            return Err(config_err(args[i].clone(), "expected an override of the form --section.key value"));
        };
        if let Some((k, v)) = flag.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            i += 1;
        } else {
            let v = args
                .get(i + 1)
                .ok_or_else(|| config_err(flag, "override is missing its value"))?;
            out.push((flag.to_string(), v.clone()));
            i += 2;
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Builds a config from TOML text plus overrides, then validates it.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_err("<document>", e.to_string().trim().to_string()))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        if let Some(k) = table.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(config_err(k.clone(), format!("unknown section (expected one of {})", SECTIONS.join(", "))));
        }
        let cfg = RunConfig {
            grids: section(&table, "grids")?,
            source: section(&table, "source")?,
            motion: section(&table, "motion")?,
            model: section(&table, "model")?,
            regularization: section(&table, "regularization")?,
            optimizer: section(&table, "optimizer")?,
            noise: section(&table, "noise")?,
            io: section(&table, "io")?,
            footprint: section(&table, "footprint")?,
            bench: section(&table, "bench")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# unserialisable config: {e}\n"))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grids;
        if g.magnification == 0 {
            return Err(config_err("grids.magnification", "must be at least 1"));
        }
        if g.sr_width == 0 || g.sr_height == 0 {
            return Err(config_err("grids.sr_width", "SR dimensions must be positive"));
        }
        if self.source.period == 0 {
            return Err(config_err("source.period", "must be positive"));
        }
        if self.source.wedges == 0 {
            return Err(config_err("source.wedges", "must be positive"));
        }
        let m = &self.motion;
        if m.frames == 0 {
            return Err(config_err("motion.frames", "must be at least 1"));
        }
        if !(m.max_zoom > 0.0 && m.max_zoom.is_finite()) {
            return Err(config_err("motion.max_zoom", "must be finite and positive"));
        }
        if !m.max_rotation_deg.is_finite() {
            return Err(config_err("motion.max_rotation_deg", "must be finite"));
        }
        for (i, r) in m.explicit.iter().enumerate() {
            r.to_map()
                .map_err(|e| config_err(format!("motion.explicit[{i}]"), e.to_string()))?;
        }
        let r = &self.regularization;
        if !(r.lambda.is_finite() && r.lambda >= 0.0) {
            return Err(config_err("regularization.lambda", "must be finite and >= 0"));
        }
        if !(r.s > 0.0) {
            return Err(config_err("regularization.s", "must be > 0 (use inf for quadratic)"));
        }
        let o = &self.optimizer;
        if o.max_iters == 0 {
            return Err(config_err("optimizer.max_iters", "must be at least 1"));
        }
        if o.memory == 0 {
            return Err(config_err("optimizer.memory", "must be at least 1"));
        }
        if !(o.grad_tol >= 0.0 && o.grad_tol.is_finite()) {
            return Err(config_err("optimizer.grad_tol", "must be finite and >= 0"));
        }
        if !(o.f_tol >= 0.0 && o.f_tol.is_finite()) {
            return Err(config_err("optimizer.f_tol", "must be finite and >= 0"));
        }
        if o.init == InitName::Given && o.init_image.is_none() {
            return Err(config_err("optimizer.init_image", "required when init = \"given\""));
        }
        if !(self.noise.variance >= 0.0 && self.noise.variance.is_finite()) {
            return Err(config_err("noise.variance", "must be finite and >= 0"));
        }
        let f = &self.footprint;
        if !(f.zoom > 0.0 && f.zoom.is_finite()) {
            return Err(config_err("footprint.zoom", "must be finite and positive"));
        }
        if !f.rotation_deg.is_finite() {
            return Err(config_err("footprint.rotation_deg", "must be finite"));
        }
        if f.detector >= 9 {
            return Err(config_err("footprint.detector", "must index the 3x3 block (0..9)"));
        }
        let b = &self.bench;
        if b.models.is_empty() || b.settings.is_empty() || b.lambdas.is_empty() {
            return Err(config_err("bench", "models, settings and lambdas must be non-empty"));
        }
        if b.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(config_err("bench.lambdas", "every lambda must be finite and >= 0"));
        }
        if !(b.s > 0.0) {
            return Err(config_err("bench.s", "must be > 0"));
        }
        Ok(())
    }
}
