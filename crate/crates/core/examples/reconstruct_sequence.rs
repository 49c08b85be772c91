//! Simulates a sequence, reconstructs it with one observation model and
//! reports PSNR in the region every frame observes.
//!
//! `cargo run --release --example reconstruct_sequence -- [model] [lambda] [s] [out.pgm]`
//!
//! `s` is the hyperbolic threshold; `inf` gives the quadratic penalty.

use affine_sr::grid::MagnificationFactor;
use affine_sr::io::write_pgm;
use affine_sr::obsmodels::{assemble_sequence, ModelKind};
use affine_sr::reconstruct::{solve, OptimizerSettings, ReconstructionProblem, RegularizationSettings};
use affine_sr::synth::{
    exact_evaluation_region, generate_sequence, make_test_chart, psnr_masked, ChartKind, MotionSchedule, NoiseSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind: ModelKind = args.first().map_or(Ok(ModelKind::Ts0), |s| s.parse())?;
    let lambda: f64 = args.get(1).map_or(Ok(3e-3), |s| s.parse())?;
    let s: f64 = args.get(2).map_or(Ok(20.0), |s| s.parse())?;

    let l = MagnificationFactor::new(2)?;
    let hr = make_test_chart(128, 128, ChartKind::Bars)?;
    let sched = MotionSchedule { n_frames: 10, max_rotation_deg: 20.0, max_zoom: 1.6, center: hr.grid().center() };
    let seq = generate_sequence(&hr, &sched, l, NoiseSpec { variance: 2.0, seed: 7 })?;
    let sr = hr.grid();
    let models = assemble_sequence(kind, &seq.motions, seq.lr, sr, l)?;
    let reg = RegularizationSettings::hyperbolic(lambda, s).with_positivity(true);
    let opt = OptimizerSettings { max_iters: 1000, grad_tol: 1e-9, f_tol: 1e-12, ..Default::default() };
    let problem = ReconstructionProblem::new(seq.frames.clone(), models, sr, reg, opt)?;

    let sol = solve(&problem)?;
    let region = exact_evaluation_region(&seq.motions, seq.lr, sr, l)?;
    println!(
        "{}: {} iterations ({:?}), J {:.6e}, {:.4} s/iter",
        kind.name(),
        sol.iterations,
        sol.stop,
        sol.value,
        sol.seconds_per_iteration()
    );
    for r in sol.trace.iter().step_by((sol.trace.len() / 8).max(1)) {
        println!("  iter {:>4}  J {:.6e}  |g| {:.3e}", r.iter, r.value, r.grad_norm);
    }
    println!("psnr in observed region: {}", psnr_masked(&sol.image, &hr, &region)?);
    if let Some(path) = args.get(3) {
        write_pgm(path.as_ref(), &sol.image)?;
    }
    Ok(())
}
