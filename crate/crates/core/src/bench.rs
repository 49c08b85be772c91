//! Model comparison sweeps: every model under every regularisation setting
//! over a grid of lambdas, scored by PSNR against the HR truth.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ImageBuffer, MagnificationFactor};
use crate::obsmodels::{assemble_sequence, ModelKind};
use crate::reconstruct::{
    solve, CliqueDirection, OptimizerSettings, ReconstructionProblem, RegularizationSettings,
};
use crate::synth::{exact_evaluation_region, psnr_masked, Sequence};

/// The four solution settings: quadratic or hyperbolic penalty, each with
/// and without positivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Quad,
    QuadPos,
    Hyper,
    HyperPos,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::Quad, Setting::QuadPos, Setting::Hyper, Setting::HyperPos];

    pub fn name(self) -> &'static str {
        match self {
            Setting::Quad => "quad",
            Setting::QuadPos => "quad_pos",
            Setting::Hyper => "hyper",
            Setting::HyperPos => "hyper_pos",
        }
    }

    pub fn regularization(self, lambda: f64, s: f64, cliques: &[CliqueDirection]) -> RegularizationSettings {
        let (s, positivity) = match self {
            Setting::Quad => (f64::INFINITY, false),
            Setting::QuadPos => (f64::INFINITY, true),
            Setting::Hyper => (s, false),
            Setting::HyperPos => (s, true),
        };
        RegularizationSettings { lambda, s, cliques: cliques.to_vec(), positivity }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown setting `{s}` (expected quad, quad_pos, hyper or hyper_pos)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub models: Vec<ModelKind>,
    pub settings: Vec<Setting>,
    pub lambdas: Vec<f64>,
    /// Threshold used by the hyperbolic settings.
    pub s: f64,
    pub cliques: Vec<CliqueDirection>,
    pub optimizer: OptimizerSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub model: ModelKind,
    pub setting: Setting,
    pub lambda: f64,
    /// NaN when the cell failed.
    pub psnr_db: f64,
    pub iters: usize,
    pub seconds_per_iter: f64,
    pub monotone: bool,
    pub min_value: f64,
    pub stop: String,
    pub error: Option<String>,
}

pub const CSV_HEADER: [&str; 10] = [
    "model",
    "setting",
    "lambda",
    "psnr_db",
    "iters",
    "seconds_per_iter",
    "monotone",
    "min_value",
    "stop",
    "error",
];

impl BenchRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.model.name().to_string(),
            self.setting.name().to_string(),
            format!("{:e}", self.lambda),
            format!("{:.6}", self.psnr_db),
            self.iters.to_string(),
            format!("{:.6}", self.seconds_per_iter),
            self.monotone.to_string(),
            format!("{:.6}", self.min_value),
            self.stop.clone(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// Runs the sweep sequentially (so per-iteration timings are not skewed by
/// neighbouring cells). `on_row` sees each row as soon as it is finished.
/// A failing cell is reported in its row and the sweep continues.
pub fn run_bench(
    hr: &ImageBuffer,
    seq: &Sequence,
    l: MagnificationFactor,
    cfg: &BenchConfig,
    mut on_row: impl FnMut(&BenchRow) -> Result<()>,
) -> Result<Vec<BenchRow>> {
    if cfg.models.is_empty() || cfg.settings.is_empty() || cfg.lambdas.is_empty() {
        return Err(Error::invalid("bench needs at least one model, setting and lambda"));
    }
    let sr = GridSpec::sr(hr.width(), hr.height())?;
    let region = exact_evaluation_region(&seq.motions, seq.lr, sr, l)?;
    let mut rows = Vec::new();
    for &model in &cfg.models {
        let models = assemble_sequence(model, &seq.motions, seq.lr, sr, l);
        for &setting in &cfg.settings {
            for &lambda in &cfg.lambdas {
                let failed = |msg: String| BenchRow {
                    model,
                    setting,
                    lambda,
                    psnr_db: f64::NAN,
                    iters: 0,
                    seconds_per_iter: f64::NAN,
                    monotone: false,
                    min_value: f64::NAN,
                    stop: "error".into(),
                    error: Some(msg),
                };
                let row = match &models {
                    Err(e) => failed(e.to_string()),
                    Ok(models) => {
                        let attempt = ReconstructionProblem::new(
                            seq.frames.clone(),
                            models.clone(),
                            sr,
                            setting.regularization(lambda, cfg.s, &cfg.cliques),
                            cfg.optimizer.clone(),
                        )
                        .and_then(|p| solve(&p))
                        .and_then(|sol| {
                            let q = psnr_masked(&sol.image, hr, &region)?;
                            Ok(BenchRow {
                                model,
                                setting,
                                lambda,
                                psnr_db: q.db(),
                                iters: sol.iterations,
                                seconds_per_iter: sol.seconds_per_iteration(),
                                monotone: sol.is_monotone(),
                                min_value: sol.image.min(),
                                stop: sol.stop.name().into(),
                                error: None,
                            })
                        });
                        attempt.unwrap_or_else(|e| failed(e.to_string()))
                    }
                };
                on_row(&row)?;
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Highest-PSNR row for each model x setting pair, in first-seen order.
pub fn best_rows(rows: &[BenchRow]) -> Vec<BenchRow> {
    let mut best: Vec<BenchRow> = Vec::new();
    for r in rows.iter().filter(|r| r.error.is_none()) {
        match best.iter_mut().find(|b| b.model == r.model && b.setting == r.setting) {
            Some(b) if r.psnr_db > b.psnr_db => *b = r.clone(),
            Some(_) => {}
            None => best.push(r.clone()),
        }
    }
    best
}

/// Best PSNR over all settings and lambdas for one model.
pub fn best_psnr(rows: &[BenchRow], model: ModelKind) -> Option<f64> {
    rows.iter()
        .filter(|r| r.model == model && r.error.is_none())
        .map(|r| r.psnr_db)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
}

/// Appends rows to a CSV file, writing the header only when the file is new
/// or empty.
pub fn append_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), rows, fresh).map_err(|e| match e {
        Error::InvalidInput(m) => Error::Format { path: path.to_path_buf(), message: m },
        other => other,
    })
}

pub fn write_csv(out: impl Write, rows: &[BenchRow], header: bool) -> Result<()> {
    let wrap = |e: csv::Error| Error::invalid(format!("bench CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    if header {
        w.write_record(CSV_HEADER).map_err(wrap)?;
    }
    for r in rows {
        w.write_record(r.record()).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("bench CSV: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruct::Init;
    use crate::synth::{generate_sequence, make_test_chart, ChartKind, MotionSchedule, NoiseSpec};

    fn small() -> (ImageBuffer, Sequence, MagnificationFactor) {
        let l = MagnificationFactor::new(2).unwrap();
        let hr = make_test_chart(32, 32, ChartKind::Checker { period: 4 }).unwrap();
        let sched = MotionSchedule { n_frames: 3, max_rotation_deg: 0.0, max_zoom: 1.0, center: [15.5, 15.5] };
        let seq = generate_sequence(&hr, &sched, l, NoiseSpec { variance: 1.0, seed: 1 }).unwrap();
        (hr, seq, l)
    }

    fn cfg(lambdas: Vec<f64>) -> BenchConfig {
        BenchConfig {
            models: vec![ModelKind::Ef1, ModelKind::Ts0],
            settings: vec![Setting::Quad, Setting::HyperPos],
            lambdas,
            s: 10.0,
            cliques: CliqueDirection::ALL.to_vec(),
            optimizer: OptimizerSettings { max_iters: 20, init: Init::MeanBackprojection, ..Default::default() },
        }
    }

    #[test]
    fn one_row_per_cell_and_best() {
        let (hr, seq, l) = small();
        let mut seen = 0;
        let rows = run_bench(&hr, &seq, l, &cfg(vec![0.01]), |_| {
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(seen, 4);
        assert!(rows.iter().all(|r| r.error.is_none() && r.monotone));
        let rows = run_bench(&hr, &seq, l, &cfg(vec![0.01, 0.1]), |_| Ok(())).unwrap();
        let best = best_rows(&rows);
        assert_eq!(best.len(), 4);
        for b in &best {
            assert!(rows.iter().filter(|r| r.model == b.model && r.setting == b.setting).all(|r| r.psnr_db <= b.psnr_db));
        }
        // identity motion: the two models coincide
        let (e, t) = (best_psnr(&rows, ModelKind::Ef1).unwrap(), best_psnr(&rows, ModelKind::Ts0).unwrap());
        assert!((e - t).abs() < 1e-6);
    }

    #[test]
    fn csv_append_writes_single_header() {
        let (hr, seq, l) = small();
        let mut c = cfg(vec![0.01]);
        c.models = vec![ModelKind::Ef1];
        c.settings = vec![Setting::Quad];
        let rows = run_bench(&hr, &seq, l, &c, |_| Ok(())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.csv");
        append_csv(&path, &rows).unwrap();
        append_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("model,setting,lambda"));
        // numeric columns other than timing reproduce exactly
        let strip = |l: &str| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(5);
            f.join(",")
        };
        assert_eq!(strip(lines[1]), strip(lines[2]));
    }

    #[test]
    fn degenerate_model_fails_per_row() {
        let l = MagnificationFactor::new(2).unwrap();
        let hr = make_test_chart(32, 32, ChartKind::Bars).unwrap();
        let sched = MotionSchedule { n_frames: 2, max_rotation_deg: 90.0, max_zoom: 1.0, center: [15.5, 15.5] };
        let seq = generate_sequence(&hr, &sched, l, NoiseSpec::none()).unwrap();
        let mut c = cfg(vec![0.01]);
        c.settings = vec![Setting::Quad];
        let rows = run_bench(&hr, &seq, l, &c, |_| Ok(())).unwrap();
        assert!(rows[0].error.is_none());
        assert!(rows[1].error.as_deref().unwrap().contains("frame 0"));
    }
}
