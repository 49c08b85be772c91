use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{ChartName, InitName, RunConfig};
use crate::bench::{append_csv, best_psnr, best_rows, run_bench, write_csv, BenchConfig};
use crate::error::{Error, Result};
use crate::grid::{AffineMap2D, GridSpec, ImageBuffer, MagnificationFactor};
use crate::io::{motions_from_records, read_image, read_motions, write_f32, write_motions, write_pgm};
use crate::obsmodels::footprint::{footprint as footprint_patch, FootprintSpec};
use crate::obsmodels::assemble_sequence;
use crate::reconstruct::{
    save_trace_csv, solve, Init, OptimizerSettings, ReconstructionProblem, RegularizationSettings,
};
use crate::synth::{
    evaluation_region, generate_with_motions, lr_grid_for, make_test_chart, psnr_masked,
    schedule_to_motions, ChartKind, MotionSchedule, NoiseSpec, Sequence,
};

fn say(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn magnification(cfg: &RunConfig) -> Result<MagnificationFactor> {
    MagnificationFactor::new(cfg.grids.magnification).map_err(|e| Error::Config {
        path: "grids.magnification".into(),
        message: e.to_string(),
    })
}

/// HR image: the configured file, or a chart of the configured SR size.
pub fn source_image(cfg: &RunConfig) -> Result<ImageBuffer> {
    if let Some(p) = &cfg.source.image {
        return read_image(p);
    }
    let kind = match cfg.source.chart {
        ChartName::Bars => ChartKind::Bars,
        ChartName::Star => ChartKind::Star { wedges: cfg.source.wedges },
        ChartName::Checker => ChartKind::Checker { period: cfg.source.period },
    };
    make_test_chart(cfg.grids.sr_width, cfg.grids.sr_height, kind)
}

/// Motions in precedence order: inline list, motion file, schedule.
pub fn motions(cfg: &RunConfig, sr: GridSpec) -> Result<Vec<AffineMap2D>> {
    let m = &cfg.motion;
    if !m.explicit.is_empty() {
        return motions_from_records(m.explicit.clone(), Path::new("motion.explicit")).map_err(|e| {
            Error::Config { path: "motion.explicit".into(), message: e.to_string() }
        });
    }
    if let Some(p) = &m.file {
        return read_motions(p);
    }
    schedule_to_motions(&MotionSchedule {
        n_frames: m.frames,
        max_rotation_deg: m.max_rotation_deg,
        max_zoom: m.max_zoom,
        center: m.center.unwrap_or(sr.center()),
    })
}

/// The synthetic dataset described by the config.
pub fn sequence(cfg: &RunConfig) -> Result<(ImageBuffer, Sequence)> {
    let l = magnification(cfg)?;
    let hr = source_image(cfg)?;
    let motions = motions(cfg, hr.grid())?;
    let noise = NoiseSpec { variance: cfg.noise.variance, seed: cfg.noise.seed };
    let seq = generate_with_motions(&hr, &motions, l, noise)?;
    Ok((hr, seq))
}

fn frame_name(prefix: &str, k: usize, ext: &str) -> String {
    format!("{prefix}_{k:03}.{ext}")
}

pub fn synth(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let (hr, seq) = sequence(cfg)?;
    let dir = &cfg.io.out_dir;
    create_dir(dir)?;
    for (k, (y, c)) in seq.frames.iter().zip(&seq.clean).enumerate() {
        write_pgm(&dir.join(frame_name("frame", k, "pgm")), y)?;
        write_f32(&dir.join(frame_name("frame", k, "f32")), y)?;
        write_f32(&dir.join(frame_name("clean", k, "f32")), c)?;
    }
    write_pgm(&dir.join("hr.pgm"), &hr)?;
    write_f32(&dir.join("hr.f32"), &hr)?;
    write_motions(&dir.join("motions.csv"), &seq.motions)?;
    let manifest = format!(
        "# frames: {k} x {w}x{h}, SR {sw}x{sh}\n[output]\nframes = {k}\nlr_width = {w}\nlr_height = {h}\nmotion_file = \"motions.csv\"\n\n{cfg}",
        k = seq.frames.len(),
        w = seq.lr.width(),
        h = seq.lr.height(),
        sw = hr.width(),
        sh = hr.height(),
        cfg = cfg.to_toml(),
    );
    write_text(&dir.join("manifest.toml"), &manifest)?;
    out.write_all(manifest.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn regularization(cfg: &RunConfig) -> RegularizationSettings {
    let r = &cfg.regularization;
    RegularizationSettings { lambda: r.lambda, s: r.s, cliques: r.cliques.clone(), positivity: r.positivity }
}

fn optimizer(cfg: &RunConfig) -> Result<OptimizerSettings> {
    let o = &cfg.optimizer;
    let init = match o.init {
        InitName::Zero => Init::Zero,
        InitName::MeanBackprojection => Init::MeanBackprojection,
        InitName::Given => {
            // presence is checked by config validation
            let p = o.init_image.as_ref().ok_or_else(|| Error::Config {
                path: "optimizer.init_image".into(),
                message: "missing".into(),
            })?;
            Init::Given(read_image(p)?)
        }
    };
    Ok(OptimizerSettings { max_iters: o.max_iters, grad_tol: o.grad_tol, f_tol: o.f_tol, memory: o.memory, init })
}

#[derive(Serialize)]
struct Summary {
    model: String,
    lambda: f64,
    s: f64,
    positivity: bool,
    final_j: f64,
    data_term: f64,
    penalty_term: f64,
    iterations: usize,
    evaluations: usize,
    stop: String,
    seconds: f64,
    seconds_per_iteration: f64,
    monotone: bool,
    min_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    psnr_db: Option<f64>,
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    summary: &'a Summary,
    config: &'a RunConfig,
}

/// Reads `frame_###.f32` files for every motion; the SR grid is the frame
/// grid magnified by L.
pub fn reconstruct(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let l = magnification(cfg)?;
    let frames_dir = cfg.io.frames_dir.clone().unwrap_or_else(|| cfg.io.out_dir.clone());
    let motions = if cfg.motion.explicit.is_empty() {
        let path = cfg
            .io
            .motion_file
            .clone()
            .or_else(|| cfg.motion.file.clone())
            .unwrap_or_else(|| frames_dir.join("motions.csv"));
        read_motions(&path)?
    } else {
        motions(cfg, GridSpec::sr(1, 1)?)?
    };
    let frames = (0..motions.len())
        .map(|k| read_image(&frames_dir.join(frame_name("frame", k, "f32"))))
        .collect::<Result<Vec<_>>>()?;
    let lr0 = frames[0].grid();
    if let Some((k, f)) = frames.iter().enumerate().find(|(_, f)| f.grid() != lr0) {
        return Err(Error::DimensionMismatch { what: "frame size", expected: lr0.len(), got: f.grid().len() }
            .in_frame(k));
    }
    let lu = l.as_usize();
    let sr = GridSpec::sr(lr0.width() * lu, lr0.height() * lu)?;
    let lr = lr_grid_for(sr, l)?;
    let frames = frames
        .into_iter()
        .map(|f| ImageBuffer::new(lr, f.into_samples()))
        .collect::<Result<Vec<_>>>()?;
    let models = assemble_sequence(cfg.model.kind, &motions, lr, sr, l)?;
    let region = evaluation_region(&models)?;
    let problem = ReconstructionProblem::new(frames, models, sr, regularization(cfg), optimizer(cfg)?)?;

    let start = Instant::now();
    let sol = solve(&problem)?;
    let wall = start.elapsed().as_secs_f64();
    let parts = problem.criterion_parts(sol.image.samples())?;

    let hr_path = cfg.io.hr_reference.clone().or_else(|| {
        let p = frames_dir.join("hr.f32");
        p.exists().then_some(p)
    });
    let psnr_db = match hr_path {
        Some(p) => Some(psnr_masked(&sol.image, &read_image(&p)?, &region)?.db()),
        None => None,
    };

    let dir = &cfg.io.out_dir;
    create_dir(dir)?;
    write_pgm(&dir.join("sr.pgm"), &sol.image)?;
    write_f32(&dir.join("sr.f32"), &sol.image)?;
    save_trace_csv(&sol.trace, &dir.join("trace.csv"))?;
    let summary = Summary {
        model: cfg.model.kind.name().into(),
        lambda: cfg.regularization.lambda,
        s: cfg.regularization.s,
        positivity: cfg.regularization.positivity,
        final_j: sol.value,
        data_term: parts[0],
        penalty_term: parts[1],
        iterations: sol.iterations,
        evaluations: sol.evaluations,
        stop: sol.stop.name().into(),
        seconds: wall,
        seconds_per_iteration: sol.seconds_per_iteration(),
        monotone: sol.is_monotone(),
        min_value: sol.image.min(),
        psnr_db,
    };
    let mut resolved = cfg.clone();
    resolved.grids.sr_width = sr.width();
    resolved.grids.sr_height = sr.height();
    let text = toml::to_string(&SummaryDoc { summary: &summary, config: &resolved })
        .map_err(|e| Error::invalid(format!("summary serialisation: {e}")))?;
    write_text(&dir.join("summary.toml"), &text)?;
    say(
        out,
        format_args!(
            "{} lambda={} s={} J={:.6e} iters={} stop={} s/iter={:.4}{}",
            summary.model,
            summary.lambda,
            summary.s,
            summary.final_j,
            summary.iterations,
            summary.stop,
            summary.seconds_per_iteration,
            psnr_db.map_or(String::new(), |p| format!(" psnr={p:.2}")),
        ),
    )
}

/// Patch display scale: 8-bit grey with 0 black and the patch max white.
fn patch_for_display(patch: &ImageBuffer) -> Result<ImageBuffer> {
    let peak = patch.max().max(1e-12);
    ImageBuffer::new(patch.grid(), patch.samples().iter().map(|v| 255.0 * v / peak).collect())
}

pub fn footprint(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let spec = FootprintSpec {
        kind: cfg.model.kind,
        l: magnification(cfg)?,
        rotation_deg: cfg.footprint.rotation_deg,
        zoom: cfg.footprint.zoom,
        detector: cfg.footprint.detector,
    };
    let fp = footprint_patch(&spec)?;
    let dir = &cfg.io.out_dir;
    create_dir(dir)?;
    let stem = format!("footprint_{}", spec.kind.name());
    write_f32(&dir.join(format!("{stem}.f32")), &fp.patch)?;
    write_pgm(&dir.join(format!("{stem}.pgm")), &patch_for_display(&fp.patch)?)?;
    let s = fp.stats;
    say(
        out,
        format_args!(
            "{} min={:.6} max={:.6} interior_mean={:.6} interior_std={:.6} rms_vs_exact={:.6}",
            spec.kind.name(),
            s.min,
            s.max,
            s.interior_mean,
            s.interior_std,
            s.rms_vs_exact
        ),
    )
}

pub fn bench(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let l = magnification(cfg)?;
    let (hr, seq) = sequence(cfg)?;
    let bc = BenchConfig {
        models: cfg.bench.models.clone(),
        settings: cfg.bench.settings.clone(),
        lambdas: cfg.bench.lambdas.clone(),
        s: cfg.bench.s,
        cliques: cfg.regularization.cliques.clone(),
        optimizer: optimizer(cfg)?,
    };
    let dir = &cfg.io.out_dir;
    create_dir(dir)?;
    let csv_path: PathBuf = dir.join("bench.csv");
    let rows = run_bench(&hr, &seq, l, &bc, |r| {
        append_csv(&csv_path, std::slice::from_ref(r))?;
        match &r.error {
            None => say(
                out,
                format_args!(
                    "{} {} lambda={} psnr={:.2} iters={} s/iter={:.4}",
                    r.model.name(),
                    r.setting,
                    r.lambda,
                    r.psnr_db,
                    r.iters,
                    r.seconds_per_iter
                ),
            ),
            Some(e) => say(out, format_args!("{} {} lambda={} failed: {e}", r.model.name(), r.setting, r.lambda)),
        }
    })?;
    let best = best_rows(&rows);
    let best_path = dir.join("bench_best.csv");
    let file = fs::File::create(&best_path).map_err(|e| Error::io(&best_path, e))?;
    write_csv(std::io::BufWriter::new(file), &best, true)?;
    for m in &bc.models {
        if let Some(p) = best_psnr(&rows, *m) {
            say(out, format_args!("best {}: {p:.2} dB", m.name()))?;
        }
    }
    Ok(())
}

pub fn psnr(a: &Path, b: &Path, out: &mut dyn Write) -> Result<()> {
    let q = crate::synth::psnr(&read_image(a)?, &read_image(b)?)?;
    say(out, format_args!("{q}"))
}
