//! Compares EF0, EF1 and TS0 (optionally more models) on a synthetic
//! rotation/zoom sequence, sweeping lambda for every regularisation setting.
//!
//! ```text
//! cargo run --release --example model_benchmark -- [chart] [side] [frames] [lambdas...]
//! ```
//! `chart` is `bars`, `star` or `checker`; lambdas default to a log grid.

use affine_sr::bench::{best_psnr, best_rows, run_bench, BenchConfig, Setting};
use affine_sr::grid::MagnificationFactor;
use affine_sr::obsmodels::ModelKind;
use affine_sr::reconstruct::{CliqueDirection, OptimizerSettings};
use affine_sr::synth::{generate_sequence, make_test_chart, ChartKind, MotionSchedule, NoiseSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let chart = match args.first().map(String::as_str).unwrap_or("bars") {
        "star" => ChartKind::Star { wedges: 24 },
        "checker" => ChartKind::Checker { period: 4 },
        _ => ChartKind::Bars,
    };
    let side: usize = args.get(1).map_or(Ok(128), |s| s.parse())?;
    let frames: usize = args.get(2).map_or(Ok(10), |s| s.parse())?;
    let mut lambdas: Vec<f64> = args.iter().skip(3).map(|s| s.parse()).collect::<Result<_, _>>()?;
    if lambdas.is_empty() {
        lambdas = vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2];
    }

    let l = MagnificationFactor::new(2)?;
    let hr = make_test_chart(side, side, chart)?;
    let c = 0.5 * (side as f64 - 1.0);
    let sched = MotionSchedule { n_frames: frames, max_rotation_deg: 20.0, max_zoom: 1.6, center: [c, c] };
    let seq = generate_sequence(&hr, &sched, l, NoiseSpec { variance: 2.0, seed: 7 })?;

    let cfg = BenchConfig {
        models: vec![ModelKind::Ef0, ModelKind::Ef1, ModelKind::Ts0],
        settings: Setting::ALL.to_vec(),
        lambdas,
        s: 20.0,
        cliques: CliqueDirection::ALL.to_vec(),
        optimizer: OptimizerSettings { max_iters: 1000, grad_tol: 1e-9, f_tol: 1e-12, ..Default::default() },
    };
    println!("{:<5} {:<9} {:>8} {:>8} {:>6} {:>9}", "model", "setting", "lambda", "psnr", "iters", "s/iter");
    let rows = run_bench(&hr, &seq, l, &cfg, |r| {
        println!(
            "{:<5} {:<9} {:>8.0e} {:>8.2} {:>6} {:>9.4}",
            r.model.name(),
            r.setting.name(),
            r.lambda,
            r.psnr_db,
            r.iters,
            r.seconds_per_iter
        );
        Ok(())
    })?;
    println!("\nbest per model and setting");
    for b in best_rows(&rows) {
        println!("{:<5} {:<9} lambda {:.0e}: {:.2} dB", b.model.name(), b.setting.name(), b.lambda, b.psnr_db);
    }
    for m in cfg.models {
        println!("{:<5} best {:.2} dB", m.name(), best_psnr(&rows, m).unwrap_or(f64::NAN));
    }
    Ok(())
}
