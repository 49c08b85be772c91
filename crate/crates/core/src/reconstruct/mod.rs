//! Regularised multi-frame inversion.
//!
//! The criterion is
//! `J(x) = sum_k |mask_k (y_k - A_k x)|^2 + lambda sum_c psi_s(v_c^T x)`
//! where `v_c^T x` runs over second differences along the enabled clique
//! directions and `psi_s` is the hyperbolic potential.

pub mod lbfgs;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ImageBuffer};
use crate::obsmodels::FrameModel;

pub use lbfgs::{Evaluation, IterRecord, LbfgsOptions, StopReason};

/// Hyperbolic potential `2s (sqrt(s^2 + u^2) - s)`; `s = inf` gives `u^2`.
pub fn potential(u: f64, s: f64) -> f64 {
    if s.is_infinite() {
        u * u
    } else {
        // same value, without cancellation for small |u|
        2.0 * s * u * u / ((s * s + u * u).sqrt() + s)
    }
}

pub fn potential_derivative(u: f64, s: f64) -> f64 {
    if s.is_infinite() {
        2.0 * u
    } else {
        2.0 * s * u / (s * s + u * u).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CliqueDirection {
    Horizontal,
    Vertical,
    DiagMain,
    DiagAnti,
}

impl CliqueDirection {
    pub const ALL: [CliqueDirection; 4] = [
        CliqueDirection::Horizontal,
        CliqueDirection::Vertical,
        CliqueDirection::DiagMain,
        CliqueDirection::DiagAnti,
    ];

    fn offset(self) -> (i64, i64) {
        match self {
            CliqueDirection::Horizontal => (1, 0),
            CliqueDirection::Vertical => (0, 1),
            CliqueDirection::DiagMain => (1, 1),
            CliqueDirection::DiagAnti => (1, -1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationSettings {
    pub lambda: f64,
    /// Threshold of the hyperbolic potential; infinity means quadratic.
    pub s: f64,
    pub cliques: Vec<CliqueDirection>,
    pub positivity: bool,
}

impl RegularizationSettings {
    pub fn quadratic(lambda: f64) -> Self {
        Self {
            lambda,
            s: f64::INFINITY,
            cliques: CliqueDirection::ALL.to_vec(),
            positivity: false,
        }
    }

    pub fn hyperbolic(lambda: f64, s: f64) -> Self {
        Self { s, ..Self::quadratic(lambda) }
    }

    pub fn with_positivity(mut self, positivity: bool) -> Self {
        self.positivity = positivity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.s > 0.0) {
            return Err(Error::invalid(format!("s must be > 0 or infinite, got {}", self.s)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Zero,
    MeanBackprojection,
    Given(ImageBuffer),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
    pub memory: usize,
    pub init: Init,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iters: 300,
            grad_tol: 1e-6,
            f_tol: 1e-10,
            memory: 7,
            init: Init::MeanBackprojection,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.memory == 0 {
            return Err(Error::invalid("max_iters and memory must be at least 1"));
        }
        if !(self.grad_tol >= 0.0 && self.f_tol >= 0.0) {
            return Err(Error::invalid("tolerances must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionProblem {
    frames: Vec<ImageBuffer>,
    models: Vec<FrameModel>,
    sr: GridSpec,
    pub reg: RegularizationSettings,
    pub optimizer: OptimizerSettings,
}

impl ReconstructionProblem {
    pub fn new(
        frames: Vec<ImageBuffer>,
        models: Vec<FrameModel>,
        sr: GridSpec,
        reg: RegularizationSettings,
        optimizer: OptimizerSettings,
    ) -> Result<Self> {
        if frames.is_empty() || frames.len() != models.len() {
            return Err(Error::DimensionMismatch {
                what: "frame models",
                expected: frames.len(),
                got: models.len(),
            });
        }
        for (k, (y, m)) in frames.iter().zip(&models).enumerate() {
            if m.op().rows() != y.samples().len() {
                return Err(Error::DimensionMismatch {
                    what: "operator rows vs frame pixels",
                    expected: y.samples().len(),
                    got: m.op().rows(),
                }
                .in_frame(k));
            }
            if m.op().cols() != sr.len() {
                return Err(Error::DimensionMismatch {
                    what: "operator columns vs SR pixels",
                    expected: sr.len(),
                    got: m.op().cols(),
                }
                .in_frame(k));
            }
        }
        reg.validate()?;
        optimizer.validate()?;
        if let Init::Given(img) = &optimizer.init {
            if img.grid().len() != sr.len() {
                return Err(Error::DimensionMismatch {
                    what: "initial image",
                    expected: sr.len(),
                    got: img.grid().len(),
                });
            }
        }
        Ok(Self { frames, models, sr, reg, optimizer })
    }

    pub fn frames(&self) -> &[ImageBuffer] {
        &self.frames
    }

    pub fn models(&self) -> &[FrameModel] {
        &self.models
    }

    pub fn sr_grid(&self) -> GridSpec {
        self.sr
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.sr.len() {
            return Err(Error::DimensionMismatch {
                what: "SR estimate",
                expected: self.sr.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Data and penalty terms; optionally accumulates the gradient.
    fn terms(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<[f64; 2]> {
        self.check_len(x)?;
        let want_grad = grad.is_some();
        let per_frame: Vec<(f64, Option<Vec<f64>>)> = self
            .frames
            .par_iter()
            .zip(&self.models)
            .map(|(y, m)| {
                let mut r = m.op().apply(x)?;
                let mut sum = 0.0;
                for ((ri, &yi), &keep) in r.iter_mut().zip(y.samples()).zip(m.mask()) {
                    *ri = if keep { *ri - yi } else { 0.0 };
                    sum += *ri * *ri;
                }
                let g = if want_grad {
                    let mut g = m.op().apply_transpose(&r)?;
                    g.iter_mut().for_each(|v| *v *= 2.0);
                    Some(g)
                } else {
                    None
                };
                Ok((sum, g))
            })
            .collect::<Result<_>>()?;
        let mut data = 0.0;
        let mut grad = grad;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for (sum, fg) in per_frame {
            data += sum;
            if let (Some(g), Some(fg)) = (grad.as_deref_mut(), fg) {
                g.iter_mut().zip(fg).for_each(|(a, b)| *a += b);
            }
        }
        let mut penalty = 0.0;
        let lambda = self.reg.lambda;
        if lambda > 0.0 {
            let (w, h) = (self.sr.width() as i64, self.sr.height() as i64);
            let s = self.reg.s;
            for dir in &self.reg.cliques {
                let (du, dv) = dir.offset();
                for v in dv.abs()..h - dv.abs() {
                    for u in du..w - du {
                        let c = (v * w + u) as usize;
                        let a = ((v - dv) * w + (u - du)) as usize;
                        let b = ((v + dv) * w + (u + du)) as usize;
                        let diff = x[a] - 2.0 * x[c] + x[b];
                        penalty += potential(diff, s);
                        if let Some(g) = grad.as_deref_mut() {
                            let d = lambda * potential_derivative(diff, s);
                            g[a] += d;
                            g[c] -= 2.0 * d;
                            g[b] += d;
                        }
                    }
                }
            }
        }
        Ok([data, lambda * penalty])
    }

    pub fn criterion(&self, x: &[f64]) -> Result<f64> {
        let [d, p] = self.terms(x, None)?;
        Ok(d + p)
    }

    /// `[data term, lambda * penalty]`.
    pub fn criterion_parts(&self, x: &[f64]) -> Result<[f64; 2]> {
        self.terms(x, None)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.sr.len()];
        self.terms(x, Some(&mut g))?;
        Ok(g)
    }

    pub fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> Result<Evaluation> {
        let parts = self.terms(x, Some(grad))?;
        Ok(Evaluation { value: parts[0] + parts[1], parts })
    }

    /// Starting point according to the optimizer settings.
    pub fn initial_estimate(&self) -> Result<Vec<f64>> {
        let mut x = match &self.optimizer.init {
            Init::Zero => vec![0.0; self.sr.len()],
            Init::Given(img) => img.samples().to_vec(),
            Init::MeanBackprojection => self.mean_backprojection()?,
        };
        if self.reg.positivity {
            x.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(x)
    }

    /// `sum_k A_k^T (mask y_k)` divided pixelwise by `sum_k A_k^T mask`,
    /// so constants map back to constants. Unobserved pixels take the mean
    /// of all masked samples.
    pub fn mean_backprojection(&self) -> Result<Vec<f64>> {
        let n = self.sr.len();
        let mut num = vec![0.0; n];
        let mut den = vec![0.0; n];
        let (mut total, mut count) = (0.0, 0usize);
        for (y, m) in self.frames.iter().zip(&self.models) {
            let masked: Vec<f64> = y
                .samples()
                .iter()
                .zip(m.mask())
                .map(|(&v, &k)| if k { v } else { 0.0 })
                .collect();
            let ones: Vec<f64> = m.mask().iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
            m.op().apply_transpose_add(&masked, &mut num)?;
            m.op().apply_transpose_add(&ones, &mut den)?;
            total += masked.iter().sum::<f64>();
            count += m.masked_rows().count();
        }
        let fallback = if count > 0 { total / count as f64 } else { 0.0 };
        Ok(num
            .iter()
            .zip(&den)
            .map(|(&a, &b)| if b > 1e-12 { a / b } else { fallback })
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub image: ImageBuffer,
    pub value: f64,
    pub trace: Vec<IterRecord>,
    pub stop: StopReason,
    pub iterations: usize,
    pub evaluations: usize,
    pub seconds: f64,
}

impl Solution {
    pub fn seconds_per_iteration(&self) -> f64 {
        self.seconds / self.iterations.max(1) as f64
    }

    pub fn is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| w[1].value < w[0].value)
    }
}

pub fn solve(p: &ReconstructionProblem) -> Result<Solution> {
    let start = Instant::now();
    let x0 = p.initial_estimate()?;
    let opts = LbfgsOptions {
        max_iters: p.optimizer.max_iters,
        grad_tol: p.optimizer.grad_tol,
        f_tol: p.optimizer.f_tol,
        memory: p.optimizer.memory,
        lower_bound: p.reg.positivity.then_some(0.0),
    };
    let r = lbfgs::minimize(|x, g| p.evaluate(x, g), x0, &opts)?;
    let seconds = start.elapsed().as_secs_f64();
    Ok(Solution {
        image: ImageBuffer::new(p.sr, r.x)?,
        value: r.value,
        trace: r.trace,
        stop: r.stop,
        iterations: r.iterations,
        evaluations: r.evaluations,
        seconds,
    })
}

/// Writes the iteration log as CSV with header
/// `iter,J,data_term,penalty_term,grad_norm,step`.
pub fn write_trace_csv(trace: &[IterRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::invalid(format!("trace CSV: {e}"));
    w.write_record(["iter", "J", "data_term", "penalty_term", "grad_norm", "step"])
        .map_err(wrap)?;
    for r in trace {
        w.write_record(&[
            r.iter.to_string(),
            r.value.to_string(),
            r.parts[0].to_string(),
            r.parts[1].to_string(),
            r.grad_norm.to_string(),
            r.step.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("trace CSV: {e}")))?;
    Ok(())
}

pub fn save_trace_csv(trace: &[IterRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_csv(trace, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MagnificationFactor;
    use crate::obsmodels::{ModelKind, FrameModel};
    use crate::sparse::SparseOperator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_problem(y: Vec<f64>, side: usize, reg: RegularizationSettings) -> ReconstructionProblem {
        let sr = GridSpec::sr(side, side).unwrap();
        let model = FrameModel::new(
            ModelKind::Exact,
            SparseOperator::identity(sr.len()),
            vec![true; sr.len()],
        )
        .unwrap();
        ReconstructionProblem::new(
            vec![ImageBuffer::new(sr, y).unwrap()],
            vec![model],
            sr,
            reg,
            OptimizerSettings { init: Init::Zero, ..Default::default() },
        )
        .unwrap()
    }

    #[test]
    fn potential_limits() {
        assert_eq!(potential(0.0, 3.0), 0.0);
        let want = 2.0 * 10.0 * ((100.0f64 + 0.01).sqrt() - 10.0);
        assert!((potential(0.1, 10.0) - want).abs() < 1e-12);
        assert!((potential(0.1, 10.0) - 0.009_999_75).abs() < 1e-9);
        let u = 1e6;
        assert!((potential(u, 10.0) - (20.0 * u - 200.0)).abs() / u < 1e-9);
        for u in [-3.0, -0.2, 0.7, 12.0] {
            assert_eq!(potential(u, 2.0), potential(-u, 2.0));
            assert_eq!(potential_derivative(u, 2.0), -potential_derivative(-u, 2.0));
            assert!(potential_derivative(u, 2.0).abs() < 4.0);
        }
    }

    #[test]
    fn quadratic_branch_matches_large_threshold() {
        for i in 0..=200 {
            let u = -100.0 + i as f64;
            let (q, h) = (potential(u, f64::INFINITY), potential(u, 1e6));
            assert!((q - h).abs() <= 1e-6 * q.max(1.0), "u={u}");
            let (dq, dh) = (potential_derivative(u, f64::INFINITY), potential_derivative(u, 1e6));
            assert!((dq - dh).abs() <= 1e-6 * dq.abs().max(1.0));
        }
    }

    #[test]
    fn identity_gradient_and_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = (0..36).map(|_| rng.random_range(0.0..255.0)).collect();
        let p = identity_problem(y.clone(), 6, RegularizationSettings::quadratic(0.0));
        let x: Vec<f64> = (0..36).map(|i| i as f64).collect();
        let g = p.gradient(&x).unwrap();
        for i in 0..36 {
            assert!((g[i] - 2.0 * (x[i] - y[i])).abs() < 1e-12);
        }
        let sol = solve(&p).unwrap();
        let rms = (sol
            .image
            .samples()
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / 36.0)
            .sqrt();
        assert!(rms < 1e-6, "rms {rms}");
        assert!(sol.is_monotone());
    }

    #[test]
    fn dense_oracle_criterion() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let side = 5;
        let sr = GridSpec::sr(side, side).unwrap();
        let n = sr.len();
        let rows = 7;
        let dense: Vec<f64> = (0..rows * n)
            .map(|_| if rng.random_bool(0.3) { rng.random_range(0.0..1.0) } else { 0.0 })
            .collect();
        let op = SparseOperator::from_dense(rows, n, &dense).unwrap();
        let mask: Vec<bool> = (0..rows).map(|r| r != 2).collect();
        let y: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..10.0)).collect();
        let lr = GridSpec::new(rows, 1, 1.0).unwrap();
        let p = ReconstructionProblem::new(
            vec![ImageBuffer::new(lr, y.clone()).unwrap()],
            vec![FrameModel::new(ModelKind::Exact, op, mask.clone()).unwrap()],
            sr,
            RegularizationSettings::hyperbolic(0.7, 2.0),
            OptimizerSettings::default(),
        )
        .unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();

        let mut data = 0.0;
        for r in 0..rows {
            if !mask[r] {
                continue;
            }
            let ax: f64 = (0..n).map(|c| dense[r * n + c] * x[c]).sum();
            data += (y[r] - ax).powi(2);
        }
        let at = |u: i64, v: i64| x[(v * side as i64 + u) as usize];
        let mut pen = 0.0;
        for v in 0..side as i64 {
            for u in 0..side as i64 {
                for (du, dv) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
                    let (a, b) = ((u - du, v - dv), (u + du, v + dv));
                    let inside = |(p, q): (i64, i64)| p >= 0 && q >= 0 && p < side as i64 && q < side as i64;
                    if inside(a) && inside(b) {
                        let d = at(a.0, a.1) - 2.0 * at(u, v) + at(b.0, b.1);
                        pen += 2.0 * 2.0 * ((4.0 + d * d).sqrt() - 2.0);
                    }
                }
            }
        }
        let want = data + 0.7 * pen;
        assert!((p.criterion(&x).unwrap() - want).abs() < 1e-10 * want.max(1.0));
    }

    #[test]
    fn constants_have_zero_criterion() {
        let l = MagnificationFactor::new(2).unwrap();
        let lr = GridSpec::lr(6, 6, l).unwrap();
        let sr = GridSpec::sr(12, 12).unwrap();
        let w = crate::grid::AffineMap2D::rotation_zoom(0.2, 1.1, sr.center()).unwrap();
        let m = crate::obsmodels::assemble(ModelKind::Ts0, &w, lr, sr, l).unwrap();
        let x = vec![42.0; sr.len()];
        let y = ImageBuffer::new(lr, m.op().apply(&x).unwrap()).unwrap();
        let p = ReconstructionProblem::new(
            vec![y],
            vec![m],
            sr,
            RegularizationSettings::hyperbolic(3.0, 5.0),
            OptimizerSettings::default(),
        )
        .unwrap();
        assert!(p.criterion(&x).unwrap() < 1e-18);
        let bp = p.mean_backprojection().unwrap();
        assert!(bp.iter().all(|v| (v - 42.0).abs() < 1e-9));
    }

    #[test]
    fn positivity_is_exact() {
        let y: Vec<f64> = (0..25).map(|i| if i % 3 == 0 { -40.0 } else { 30.0 }).collect();
        let p = identity_problem(y, 5, RegularizationSettings::quadratic(0.5).with_positivity(true));
        let sol = solve(&p).unwrap();
        assert!(sol.image.min() >= 0.0);
        assert!(sol.is_monotone());
    }

    #[test]
    fn trace_csv_header() {
        let rec = IterRecord { iter: 3, value: 1.5, parts: [1.0, 0.5], grad_norm: 0.1, step: 1.0 };
        let mut out = Vec::new();
        write_trace_csv(&[rec], &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s, "iter,J,data_term,penalty_term,grad_norm,step\n3,1.5,1,0.5,0.1,1\n");
    }
}
