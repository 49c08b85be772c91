//! Footprint statistics of every model for one detector.
//!
//! `cargo run --example footprints -- [L] [rotation_deg] [zoom]`

use affine_sr::grid::MagnificationFactor;
use affine_sr::obsmodels::footprint::{footprint, FootprintSpec};
use affine_sr::obsmodels::ModelKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let l: u32 = args.first().map_or(Ok(5), |s| s.parse())?;
    let rotation_deg: f64 = args.get(1).map_or(Ok(30.0), |s| s.parse())?;
    let zoom: f64 = args.get(2).map_or(Ok(1.6), |s| s.parse())?;
    println!("L={l} rotation={rotation_deg} deg zoom={zoom}");
    println!("{:<6} {:>9} {:>9} {:>9} {:>9} {:>9}", "model", "min", "max", "mean", "std", "rms");
    for kind in ModelKind::ALL {
        let spec = FootprintSpec {
            kind,
            l: MagnificationFactor::new(l)?,
            rotation_deg,
            zoom,
            detector: 4,
        };
        let s = footprint(&spec)?.stats;
        println!(
            "{:<6} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            kind.name(),
            s.min,
            s.max,
            s.interior_mean,
            s.interior_std,
            s.rms_vs_exact
        );
    }
    Ok(())
}
