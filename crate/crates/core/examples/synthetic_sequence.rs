//! Renders a noisy LR sequence from a test chart under a rotation/zoom
//! schedule and writes it as PGM files with the motion CSV.
//!
//! `cargo run --release --example synthetic_sequence -- [out_dir] [frames] [max_rotation_deg] [max_zoom]`

use std::path::PathBuf;

use affine_sr::grid::MagnificationFactor;
use affine_sr::io::{write_f32, write_motions, write_pgm};
use affine_sr::synth::{generate_sequence, make_test_chart, ChartKind, MotionSchedule, NoiseSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = PathBuf::from(args.first().map_or("sequence", String::as_str));
    let n_frames: usize = args.get(1).map_or(Ok(10), |s| s.parse())?;
    let max_rotation_deg: f64 = args.get(2).map_or(Ok(20.0), |s| s.parse())?;
    let max_zoom: f64 = args.get(3).map_or(Ok(1.6), |s| s.parse())?;

    let hr = make_test_chart(128, 128, ChartKind::Bars)?;
    let sched = MotionSchedule { n_frames, max_rotation_deg, max_zoom, center: hr.grid().center() };
    let seq = generate_sequence(&hr, &sched, MagnificationFactor::new(2)?, NoiseSpec { variance: 2.0, seed: 7 })?;

    std::fs::create_dir_all(&dir)?;
    write_pgm(&dir.join("hr.pgm"), &hr)?;
    for (k, (y, w)) in seq.frames.iter().zip(&seq.motions).enumerate() {
        write_pgm(&dir.join(format!("frame_{k:03}.pgm")), y)?;
        write_f32(&dir.join(format!("frame_{k:03}.f32")), y)?;
        println!("frame {k:>2}: det {:.4} matrix {:?}", w.det(), w.matrix());
    }
    write_motions(&dir.join("motions.csv"), &seq.motions)?;
    println!("wrote {} frames of {}x{} to {}", seq.frames.len(), seq.lr.width(), seq.lr.height(), dir.display());
    Ok(())
}
