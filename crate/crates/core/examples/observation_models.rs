//! Assembles every observation model for one rotation/zoom warp and compares
//! the frames each predicts against the exact model.
//!
//! `cargo run --release --example observation_models -- [rotation_deg] [zoom] [L]`

use affine_sr::grid::{AffineMap2D, GridSpec, MagnificationFactor};
use affine_sr::obsmodels::{assemble, ModelKind};
use affine_sr::synth::{lr_grid_for, make_test_chart, ChartKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let rotation_deg: f64 = args.first().map_or(Ok(20.0), |s| s.parse())?;
    let zoom: f64 = args.get(1).map_or(Ok(1.3), |s| s.parse())?;
    let l = MagnificationFactor::new(args.get(2).map_or(Ok(2), |s| s.parse())?)?;

    let hr = make_test_chart(96, 96, ChartKind::Star { wedges: 16 })?;
    let sr = GridSpec::sr(96, 96)?;
    let lr = lr_grid_for(sr, l)?;
    let w = AffineMap2D::rotation_zoom(rotation_deg.to_radians(), zoom, sr.center())?;

    let exact = assemble(ModelKind::Exact, &w, lr, sr, l)?;
    let y_exact = exact.op().apply(hr.samples())?;
    println!("warp: rotation {rotation_deg} deg, zoom {zoom}, L = {}", l.get());
    println!("{:<6} {:>8} {:>8} {:>12}", "model", "nnz", "masked", "rms vs exact");
    for kind in ModelKind::ALL {
        let m = assemble(kind, &w, lr, sr, l)?;
        let y = m.op().apply(hr.samples())?;
        let rows: Vec<usize> = m.masked_rows().filter(|&r| exact.mask()[r]).collect();
        let mse = rows.iter().map(|&r| (y[r] - y_exact[r]).powi(2)).sum::<f64>() / rows.len().max(1) as f64;
        println!("{:<6} {:>8} {:>8} {:>12.4}", kind.name(), m.op().nnz(), rows.len(), mse.sqrt());
    }
    Ok(())
}
