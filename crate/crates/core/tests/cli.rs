use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affine-sr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = r#"
[grids]
magnification = 2
sr_width = 32
sr_height = 32

[source]
chart = "checker"
period = 4

[motion]
frames = 3
max_rotation_deg = 10.0
max_zoom = 1.2

[noise]
variance = 2.0
seed = 11

[optimizer]
max_iters = 200
"#;

fn small_config(dir: &Path) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, SMALL).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn synth_reconstruct_and_score() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = small_config(dir);

    let o = run(dir, &["synth", "-c", &cfg, "--io.out_dir", "a"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("frames = 3"));
    for f in ["frame_000.pgm", "frame_002.f32", "clean_001.f32", "hr.f32", "motions.csv", "manifest.toml"] {
        assert!(dir.join("a").join(f).exists(), "missing {f}");
    }
    let manifest = fs::read_to_string(dir.join("a/manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 11"));

    // same config and seed: bit-identical frames
    assert!(run(dir, &["synth", "-c", &cfg, "--io.out_dir=b"]).status.success());
    for k in 0..3 {
        let name = format!("frame_{k:03}.f32");
        assert_eq!(fs::read(dir.join("a").join(&name)).unwrap(), fs::read(dir.join("b").join(&name)).unwrap());
    }

    let o = run(
        dir,
        &["reconstruct", "-c", &cfg, "--io.out_dir", "a", "--regularization.positivity", "true", "--model.kind", "ts0"],
    );
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("psnr="));
    let summary = fs::read_to_string(dir.join("a/summary.toml")).unwrap();
    assert!(summary.contains("model = \"ts0\"") && summary.contains("monotone = true"));
    let trace = fs::read_to_string(dir.join("a/trace.csv")).unwrap();
    assert!(trace.starts_with("iter,J,data_term,penalty_term,grad_norm,step\n"));

    let sr = affine_sr::io::read_f32(&dir.join("a/sr.f32")).unwrap();
    assert_eq!((sr.width(), sr.height()), (32, 32));
    assert!(sr.min() >= 0.0);

    let o = run(dir, &["psnr", "a/hr.f32", "a/hr.f32"]);
    assert_eq!(stdout(&o).trim(), "identical");
    let o = run(dir, &["psnr", "a/hr.f32", "a/sr.f32"]);
    assert!(stdout(&o).trim().ends_with(" dB"));
}

#[test]
fn psnr_reference_values() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let g = affine_sr::grid::GridSpec::sr(4, 4).unwrap();
    let img = |v: f64| affine_sr::grid::ImageBuffer::filled(g, v);
    affine_sr::io::write_pgm(&dir.join("black.pgm"), &img(0.0)).unwrap();
    affine_sr::io::write_pgm(&dir.join("white.pgm"), &img(255.0)).unwrap();
    affine_sr::io::write_f32(&dir.join("two.f32"), &img(2.0)).unwrap();
    affine_sr::io::write_f32(&dir.join("zero.f32"), &img(0.0)).unwrap();
    assert_eq!(stdout(&run(dir, &["psnr", "black.pgm", "white.pgm"])).trim(), "0.00 dB");
    assert_eq!(stdout(&run(dir, &["psnr", "two.f32", "zero.f32"])).trim(), "42.11 dB");
}

#[test]
fn footprint_stats_line() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = run(
        dir,
        &[
            "footprint",
            "--model.kind", "ef0",
            "--grids.magnification", "5",
            "--footprint.rotation_deg", "45",
            "--footprint.zoom", "1",
            "--io.out_dir", "fp",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let line = stdout(&o);
    assert!(line.starts_with("ef0 ") && line.contains("max=2.000000"), "{line}");
    assert!(dir.join("fp/footprint_ef0.f32").exists() && dir.join("fp/footprint_ef0.pgm").exists());
}

#[test]
fn bench_single_lambda_and_append() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = small_config(dir);
    let args = ["bench", "-c", &cfg, "--bench.lambdas", "[0.01]", "--io.out_dir", "bench"];
    assert!(run(dir, &args).status.success());
    let first = fs::read_to_string(dir.join("bench/bench.csv")).unwrap();
    // header plus one row per model x setting
    assert_eq!(first.lines().count(), 1 + 3 * 4);
    let best = fs::read_to_string(dir.join("bench/bench_best.csv")).unwrap();
    assert_eq!(best.lines().count(), 1 + 3 * 4);

    assert!(run(dir, &args).status.success());
    let both = fs::read_to_string(dir.join("bench/bench.csv")).unwrap();
    let lines: Vec<&str> = both.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 12);
    let header: Vec<&str> = lines[0].split(',').collect();
    let timing = header.iter().position(|h| *h == "seconds_per_iter").unwrap();
    let numeric = |l: &str| -> Vec<String> {
        l.split(',').enumerate().filter(|(i, _)| *i != timing).map(|(_, v)| v.to_string()).collect()
    };
    for k in 1..=12 {
        assert_eq!(numeric(lines[k]), numeric(lines[k + 12]));
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let code = |args: &[&str]| run(dir, args).status.code();
    assert_eq!(code(&["reconstruct", "--regularization.lamda", "1"]), Some(2));
    assert_eq!(code(&["synth", "--grids.magnification", "0"]), Some(2));
    assert_eq!(code(&["psnr", "missing.pgm", "missing.pgm"]), Some(4));
    assert_eq!(code(&["reconstruct", "--io.out_dir", "nowhere"]), Some(4));
    assert_eq!(
        code(&["footprint", "--model.kind", "ts0", "--footprint.rotation_deg", "90", "--footprint.zoom", "1", "--io.out_dir", "x"]),
        Some(3)
    );
}
