//! One-dimensional L2 resampling: the bi-kernel, constant reproduction and
//! the aliasing suppression compared with nearest-neighbour sampling.
//!
//! `cargo run --example l2_resampling -- [scale] [cycles_per_sample]`

use affine_sr::bspline1d::{bikernel, l2_projection_residual, shear_resample_operator, Affine1D};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let minify: f64 = args.first().map_or(Ok(1.6), |s| s.parse())?;
    let freq: f64 = args.get(1).map_or(Ok(0.45), |s| s.parse())?;
    let a = 1.0 / minify;

    let xi = bikernel(a)?;
    println!("bi-kernel at a = {a:.4}: support {:?}, integral {:.6}", xi.support(), xi.integral());
    for u in [-1.0, -0.5, 0.0, 0.25, 0.5, 1.0] {
        println!("  xi({u:+.2}) = {:.6}", xi.eval(u));
    }

    let n = 256;
    let t = Affine1D::new(a, 0.0)?;
    let op = shear_resample_operator(n, t)?;
    let ones = op.apply(&vec![1.0; n])?;
    let interior = (n as f64 * a) as usize - 2;
    let dc = ones[2..interior].iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    println!("constant reproduction error (interior): {dc:.2e}");

    let tone: Vec<f64> = (0..n).map(|k| (std::f64::consts::TAU * freq * k as f64).cos()).collect();
    let l2 = op.apply(&tone)?;
    let nearest: Vec<f64> = (0..interior).map(|k| tone[((k as f64) / a).round() as usize]).collect();
    let energy = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let (e_l2, e_nn) = (energy(&l2[2..interior]), energy(&nearest[2..interior]));
    println!("tone {freq} cycles/sample minified by {minify}: L2 energy {e_l2:.2}, nearest {e_nn:.2} ({:.1}%)", 100.0 * e_l2 / e_nn);
    println!("orthogonality defect: {:.2e}", l2_projection_residual(&tone, &l2, t)?);
    Ok(())
}
