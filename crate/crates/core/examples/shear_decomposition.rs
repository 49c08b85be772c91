//! Factors an affine map into a horizontal and a vertical shear.
//!
//! `cargo run --example shear_decomposition -- [m11 m12 m21 m22 [t1 t2]]`
//!
//! Without arguments the map `[[1, 1/4], [-1/4, 7/16]]` is used.

use affine_sr::grid::AffineMap2D;
use affine_sr::shear::{decompose, recompose};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let v: Vec<f64> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    let w = match v.len() {
        0 => AffineMap2D::new([[1.0, 0.25], [-0.25, 7.0 / 16.0]], [0.0, 0.0])?,
        4 => AffineMap2D::new([[v[0], v[1]], [v[2], v[3]]], [0.0, 0.0])?,
        6 => AffineMap2D::new([[v[0], v[1]], [v[2], v[3]]], [v[4], v[5]])?,
        _ => return Err("expected 0, 4 or 6 numbers".into()),
    };
    println!("map      {:?} + {:?}", w.matrix(), w.translation_part());
    let pair = decompose(&w)?;
    println!("order    {:?} (scale spread {:.4})", pair.order(), pair.scale_spread());
    for (name, s) in [("first", pair.first()), ("second", pair.second())] {
        println!(
            "{name:<8} {:?}: alpha {:.6} beta {:.6} eps {:.6} -> {:?}",
            s.axis(),
            s.alpha(),
            s.beta(),
            s.eps(),
            s.as_affine().matrix()
        );
    }
    println!("recompose error {:.3e}", recompose(&pair).max_abs_diff(&w));
    Ok(())
}
