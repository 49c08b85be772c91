//! Limited-memory BFGS with an optional lower bound, handled by restricting
//! the quasi-Newton step to free variables and projecting the line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Objective value with its two reported components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub parts: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
    pub memory: usize,
    pub lower_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    RelativeDecrease,
    MaxIterations,
    /// The line search could not decrease the objective further.
    LineSearchStalled,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::GradientTolerance => "gradient_tolerance",
            StopReason::RelativeDecrease => "relative_decrease",
            StopReason::MaxIterations => "max_iterations",
            StopReason::LineSearchStalled => "line_search_stalled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub value: f64,
    pub parts: [f64; 2],
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub trace: Vec<IterRecord>,
    pub stop: StopReason,
    pub iterations: usize,
    pub evaluations: usize,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises `f` from `x0`. `f` writes the gradient into its second
/// argument and returns the value.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> Result<LbfgsResult>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<Evaluation>,
{
    if opts.max_iters == 0 || opts.memory == 0 {
        return Err(Error::invalid("max_iters and memory must be at least 1"));
    }
    let n = x0.len();
    let project = |x: &mut [f64]| {
        if let Some(lb) = opts.lower_bound {
            for v in x.iter_mut() {
                if *v < lb {
                    *v = lb;
                }
            }
        }
    };
    let is_free = |x: f64, g: f64| match opts.lower_bound {
        Some(lb) => !(x <= lb && g > 0.0),
        None => true,
    };
    let check = |e: &Evaluation, g: &[f64], iteration: usize| -> Result<()> {
        if !e.value.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration,
                detail: format!(
                    "criterion {} (data {}, penalty {})",
                    e.value, e.parts[0], e.parts[1]
                ),
            });
        }
        Ok(())
    };

    let mut x = x0;
    project(&mut x);
    let mut g = vec![0.0; n];
    let mut cur = f(&x, &mut g)?;
    check(&cur, &g, 0)?;
    let mut evaluations = 1;

    let projected_norm = |x: &[f64], g: &[f64]| -> f64 {
        x.iter()
            .zip(g)
            .filter(|(&xi, &gi)| is_free(xi, gi))
            .map(|(_, gi)| gi * gi)
            .sum::<f64>()
            .sqrt()
    };

    let mut trace = vec![IterRecord {
        iter: 0,
        value: cur.value,
        parts: cur.parts,
        grad_norm: projected_norm(&x, &g),
        step: 0.0,
    }];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha_buf = vec![0.0; opts.memory];
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    for iter in 1..=opts.max_iters {
        if trace.last().map_or(0.0, |r| r.grad_norm) <= opts.grad_tol * (1.0 + cur.value.abs()) {
            stop = StopReason::GradientTolerance;
            break;
        }
        let free: Vec<bool> = x.iter().zip(&g).map(|(&xi, &gi)| is_free(xi, gi)).collect();

        // two-loop recursion on the free subspace
        for i in 0..n {
            d[i] = if free[i] { g[i] } else { 0.0 };
        }
        for (j, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alpha_buf[j] = a;
            for i in 0..n {
                d[i] -= a * y[i];
            }
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for (j, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &d);
            for i in 0..n {
                d[i] += (alpha_buf[j] - b) * s[i];
            }
        }
        for i in 0..n {
            d[i] = if free[i] { -d[i] } else { 0.0 };
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            for i in 0..n {
                d[i] = if free[i] { -g[i] } else { 0.0 };
            }
            slope = dot(&g, &d);
        }
        let mut alpha = if history.is_empty() {
            let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            (1.0f64).min(1.0 / dn.max(f64::MIN_POSITIVE))
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                x_new[i] = x[i] + alpha * d[i];
            }
            project(&mut x_new);
            let trial = f(&x_new, &mut g_new)?;
            evaluations += 1;
            check(&trial, &g_new, iter)?;
            let predicted: f64 = g.iter().zip(x_new.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if trial.value < cur.value && trial.value <= cur.value + ARMIJO * predicted {
                accepted = Some(trial);
                break;
            }
            // minimiser of the quadratic through f(0), f'(0), f(alpha)
            let denom = 2.0 * (trial.value - cur.value - slope * alpha);
            let next = if denom > 0.0 { -slope * alpha * alpha / denom } else { 0.5 * alpha };
            alpha = next.clamp(0.1 * alpha, 0.5 * alpha);
        }
        let Some(next) = accepted else {
            stop = StopReason::LineSearchStalled;
            break;
        };

        let mut s = vec![0.0; n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let previous = cur.value;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        cur = next;
        iterations = iter;
        trace.push(IterRecord {
            iter,
            value: cur.value,
            parts: cur.parts,
            grad_norm: projected_norm(&x, &g),
            step: alpha,
        });
        if previous - cur.value <= opts.f_tol * previous.abs().max(cur.value.abs()).max(1.0) {
            stop = StopReason::RelativeDecrease;
            break;
        }
    }
    if stop == StopReason::MaxIterations
        && trace.last().map_or(0.0, |r| r.grad_norm) <= opts.grad_tol * (1.0 + cur.value.abs())
    {
        stop = StopReason::GradientTolerance;
    }
    Ok(LbfgsResult {
        x,
        value: cur.value,
        trace,
        stop,
        iterations,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(lower_bound: Option<f64>) -> LbfgsOptions {
        LbfgsOptions {
            max_iters: 500,
            grad_tol: 1e-10,
            f_tol: 0.0,
            memory: 6,
            lower_bound,
        }
    }

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> Result<Evaluation> {
        let (a, b) = (x[0], x[1]);
        let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        Ok(Evaluation { value: v, parts: [v, 0.0] })
    }

    #[test]
    fn solves_rosenbrock() {
        let r = minimize(rosenbrock, vec![-1.2, 1.0], &opts(None)).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
        for w in r.trace.windows(2) {
            assert!(w[1].value < w[0].value);
        }
    }

    #[test]
    fn bound_is_active_at_solution() {
        // min (x0 + 1)^2 + (x1 - 2)^2 subject to x >= 0
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] + 1.0);
            g[1] = 2.0 * (x[1] - 2.0);
            let v = (x[0] + 1.0).powi(2) + (x[1] - 2.0).powi(2);
            Ok(Evaluation { value: v, parts: [v, 0.0] })
        };
        let r = minimize(f, vec![3.0, 3.0], &opts(Some(0.0))).unwrap();
        assert_eq!(r.x[0], 0.0);
        assert!((r.x[1] - 2.0).abs() < 1e-8);
        assert_eq!(r.stop, StopReason::GradientTolerance);
    }

    #[test]
    fn non_finite_values_abort() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 1.0;
            let v = if x[0] < 0.5 { f64::NAN } else { x[0] };
            Ok(Evaluation { value: v, parts: [v, 0.0] })
        };
        let err = minimize(f, vec![1.0], &opts(None)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }
}
