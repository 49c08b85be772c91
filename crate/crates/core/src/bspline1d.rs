//! One-dimensional order-0 B-spline machinery and the L2-optimal affine
//! resampling operator.
//!
//! A signal `f` expanded on shifted unit boxes is mapped to the coefficients
//! `g[k]` of the orthogonal projection of `f((u - tau) / a)` onto the same
//! basis:
//!
//! ```text
//! g[k] = sum_l f[l] * |a| * xi_|a|(k - tau - a l),     xi_a = beta_a * beta
//! ```
//!
//! where `beta_a(u) = beta(u / a) / a`. For order 0 the Gram sequence of the
//! basis is the unit impulse, so neither the coefficient prefilter nor the
//! sample postfilter is needed and the operator is exactly the bi-kernel sum.
//! The bi-kernel is even, which makes the same expression valid for mirrored
//! transforms (`a < 0`).

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

/// One-dimensional affine transform: the target signal approximates
/// `f((u - tau) / a)`. `a < 1` shrinks the signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine1D {
    a: f64,
    tau: f64,
}

impl Affine1D {
    pub fn new(a: f64, tau: f64) -> Result<Self> {
        if !a.is_finite() || !tau.is_finite() || a == 0.0 {
            return Err(Error::invalid(format!(
                "1-D affine transform needs finite non-zero scale, got a={a}, tau={tau}"
            )));
        }
        Ok(Self { a, tau })
    }

    pub fn identity() -> Self {
        Self { a: 1.0, tau: 0.0 }
    }

    /// The transform whose target sample at `u` reads the source at
    /// `scale * u + offset`.
    pub fn from_source_map(scale: f64, offset: f64) -> Result<Self> {
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::invalid(format!("source map scale must be non-zero, got {scale}")));
        }
        Self::new(1.0 / scale, -offset / scale)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Order-0 B-spline: the unit box on `[-1/2, 1/2)`.
#[inline]
pub fn box_kernel(u: f64) -> f64 {
    if (-0.5..0.5).contains(&u) {
        1.0
    } else {
        0.0
    }
}

/// Compactly supported piecewise polynomial. Piece `i` lives on
/// `[breakpoints[i], breakpoints[i + 1])` and its coefficients are in
/// ascending powers of `u - breakpoints[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    breakpoints: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn new(breakpoints: Vec<f64>, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() < 2 || coeffs.len() + 1 != breakpoints.len() {
            return Err(Error::invalid("piecewise polynomial needs n+1 breakpoints for n pieces"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        Ok(Self {
            breakpoints,
            coeffs,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn eval(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(u >= lo && u < hi) {
            return 0.0;
        }
        let piece = self.breakpoints.partition_point(|&b| b <= u) - 1;
        let x = u - self.breakpoints[piece];
        self.coeffs[piece].iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn integral(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(c, w)| {
                let h = w[1] - w[0];
                c.iter()
                    .enumerate()
                    .map(|(p, &c)| c * h.powi(p as i32 + 1) / (p as f64 + 1.0))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// The order-0 bi-kernel `xi_a = beta_a * beta`: a trapezoid supported on
/// `[-(1+a)/2, (1+a)/2]` with plateau height `min(1, 1/a)` and flank slope
/// `1/a`. At `a = 1` it is the order-1 B-spline (the hat function).
pub fn bikernel(a: f64) -> Result<PiecewisePoly> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("bi-kernel scale must be positive, got {a}")));
    }
    let outer = 0.5 * (1.0 + a);
    let inner = 0.5 * (1.0 - a).abs();
    let height = (1.0f64).min(1.0 / a);
    let slope = 1.0 / a;
    let mut bps = vec![-outer];
    let mut coeffs = vec![vec![0.0, slope]];
    if inner > 0.0 {
        bps.push(-inner);
        bps.push(inner);
        coeffs.push(vec![height]);
    } else {
        bps.push(0.0);
    }
    coeffs.push(vec![height, -slope]);
    bps.push(outer);
    PiecewisePoly::new(bps, coeffs)
}

/// Square `n x n` L2 resampling operator for transform `t` (zero padding
/// outside `[0, n-1]`).
pub fn shear_resample_operator(n: usize, t: Affine1D) -> Result<SparseOperator> {
    resample_operator(n, n, t)
}

/// L2 resampling operator from `n_in` source coefficients to `n_out` target
/// coefficients. Rows whose support crosses the signal ends are left
/// unnormalised.
pub fn resample_operator(n_out: usize, n_in: usize, t: Affine1D) -> Result<SparseOperator> {
    if n_out == 0 || n_in == 0 {
        return Err(Error::invalid("resampling needs at least one sample"));
    }
    let scale = t.a.abs();
    let xi = bikernel(scale)?;
    let reach = 0.5 * (1.0 + scale);
    let rows = (0..n_out)
        .map(|k| {
            let centre = k as f64 - t.tau;
            // source indices l with |centre - a l| < reach
            let (p, q) = ((centre - reach) / t.a, (centre + reach) / t.a);
            let lo = p.min(q).floor().max(0.0) as i64;
            let hi = (p.max(q).ceil() as i64).min(n_in as i64 - 1);
            (lo..=hi)
                .filter_map(|l| {
                    let w = scale * xi.eval(centre - t.a * l as f64);
                    (w > 0.0).then_some((l as usize, w))
                })
                .collect()
        })
        .collect();
    SparseOperator::from_rows(n_in, rows)
}

/// Largest orthogonality defect `|<g(u) - f((u - tau)/a), beta(u - k)>|`
/// over all target coefficients, with both signals expanded on unit boxes
/// and `f` zero outside its samples. Integrals are evaluated by a midpoint
/// rule refined at every discontinuity of the integrand.
pub fn l2_projection_residual(f: &[f64], g: &[f64], t: Affine1D) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch {
            what: "projection residual signals",
            expected: f.len(),
            got: g.len(),
        });
    }
    const SUBDIVISIONS: usize = 64;
    let source = |s: f64| -> f64 {
        let l = (s + 0.5).floor();
        if l >= 0.0 && (l as usize) < f.len() {
            f[l as usize]
        } else {
            0.0
        }
    };
    let mut worst = 0.0f64;
    let mut cuts = Vec::new();
    for (k, &gk) in g.iter().enumerate() {
        let (u0, u1) = (k as f64 - 0.5, k as f64 + 0.5);
        // jumps of f((u - tau)/a) sit where (u - tau)/a is a half-integer
        let s0 = (u0 - t.tau) / t.a;
        let s1 = (u1 - t.tau) / t.a;
        let (smin, smax) = (s0.min(s1), s0.max(s1));
        cuts.clear();
        cuts.push(u0);
        let mut h = (smin - 0.5).ceil() + 0.5;
        while h < smax {
            cuts.push(t.tau + t.a * h);
            h += 1.0;
        }
        cuts.push(u1);
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut integral = 0.0;
        for w in cuts.windows(2) {
            let step = (w[1] - w[0]) / SUBDIVISIONS as f64;
            for q in 0..SUBDIVISIONS {
                let u = w[0] + (q as f64 + 0.5) * step;
                integral += step * source((u - t.tau) / t.a);
            }
        }
        worst = worst.max((gk - integral).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Numerical convolution of the two boxes on a fine grid.
    fn bikernel_by_quadrature(a: f64, u: f64) -> f64 {
        let n = 20_000;
        let (lo, hi) = (-a / 2.0, a / 2.0);
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|i| {
                let s = lo + (i as f64 + 0.5) * h;
                h * box_kernel(s / a) / a * box_kernel(u - s)
            })
            .sum()
    }

    #[test]
    fn box_kernel_half_open() {
        assert_eq!(box_kernel(0.0), 1.0);
        assert_eq!(box_kernel(0.5), 0.0);
        assert_eq!(box_kernel(-0.49), 1.0);
        assert_eq!(box_kernel(-0.5), 1.0);
    }

    #[test]
    fn bikernel_unit_scale_is_hat() {
        let xi = bikernel(1.0).unwrap();
        assert_eq!(xi.support(), (-1.0, 1.0));
        for &u in &[-1.0f64, -0.75, -0.25, 0.0, 0.3, 0.9, 1.0] {
            let want = (1.0f64 - u.abs()).max(0.0);
            assert!((xi.eval(u) - want).abs() < 1e-15, "u={u}");
        }
    }

    #[test]
    fn bikernel_scale_two() {
        let xi = bikernel(2.0).unwrap();
        assert_eq!(xi.support(), (-1.5, 1.5));
        for &u in &[-0.5, -0.2, 0.0, 0.49] {
            assert!((xi.eval(u) - 0.5).abs() < 1e-15);
        }
        for &u in &[-1.4, -1.0, -0.7, 0.6, 1.2, 1.45] {
            assert!((xi.eval(u) - bikernel_by_quadrature(2.0, u)).abs() < 1e-3, "u={u}");
        }
    }

    #[test]
    fn bikernel_unit_integral() {
        for &a in &[0.3, 0.625, 1.0, 1.6, 2.0, 3.7] {
            let xi = bikernel(a).unwrap();
            assert!((xi.integral() - 1.0).abs() < 1e-14, "a={a}");
            // quadrature oracle
            let (lo, hi) = xi.support();
            let n = 100_000;
            let h = (hi - lo) / n as f64;
            let q: f64 = (0..n).map(|i| h * xi.eval(lo + (i as f64 + 0.5) * h)).sum();
            assert!((q - 1.0).abs() < 1e-6);
        }
        assert!(bikernel(0.0).is_err());
        assert!(bikernel(-1.0).is_err());
    }

    #[test]
    fn identity_transform_gives_identity_operator() {
        let op = shear_resample_operator(7, Affine1D::identity()).unwrap();
        assert_eq!(op, SparseOperator::identity(7));
    }

    #[test]
    fn half_sample_shift_is_linear_interpolation() {
        let op = shear_resample_operator(6, Affine1D::new(1.0, 0.5).unwrap()).unwrap();
        for k in 1..6 {
            let (c, v) = op.row(k);
            assert_eq!(c, &[k - 1, k]);
            assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn magnification_preserves_constants_in_interior() {
        let n = 40;
        let op = shear_resample_operator(n, Affine1D::new(2.0, 0.0).unwrap()).unwrap();
        let y = op.apply(&vec![3.0; n]).unwrap();
        // target k reads source near k/2; rows whose support stays inside
        for k in 2..(2 * (n - 2)).min(n) {
            assert!((y[k] - 3.0).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn interior_rows_sum_to_one() {
        for &(a, tau) in &[(0.5, 0.3), (0.625, 0.0), (1.3, 0.7), (2.0, 0.1), (-0.8, 30.0)] {
            let t = Affine1D::new(a, tau).unwrap();
            let n = 32;
            let op = shear_resample_operator(n, t).unwrap();
            for k in 0..n {
                let c = (k as f64 - tau) / a;
                let half = 0.5 * (1.0 + 1.0 / a.abs()) + 1.0;
                if c - half >= 0.0 && c + half <= (n - 1) as f64 {
                    assert!((op.row_sum(k) - 1.0).abs() < 1e-10, "a={a} k={k}");
                }
            }
        }
    }

    #[test]
    fn projection_residual_cases() {
        let f: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
        let id = Affine1D::identity();
        let g = shear_resample_operator(20, id).unwrap().apply(&f).unwrap();
        assert!(l2_projection_residual(&f, &g, id).unwrap() <= 1e-6);

        let c = vec![2.0; 20];
        for &(a, tau) in &[(0.5, 0.25), (0.8, 0.9), (1.7, 0.4), (2.0, 0.0)] {
            let t = Affine1D::new(a, tau).unwrap();
            let g = shear_resample_operator(20, t).unwrap().apply(&c).unwrap();
            assert!(l2_projection_residual(&c, &g, t).unwrap() <= 1e-6);
        }

        let t = Affine1D::new(2.0, 0.0).unwrap();
        let mut bumped = shear_resample_operator(20, t).unwrap().apply(&c).unwrap();
        bumped[5] += 1.0;
        let r = l2_projection_residual(&c, &bumped, t).unwrap();
        assert!((r - 1.0).abs() < 1e-6);
    }

    #[test]
    fn orthogonality_holds_for_scale_and_offset_battery() {
        let f: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin() * 50.0 + 100.0).collect();
        for ai in 0..7 {
            let a = 0.5 + 0.25 * ai as f64;
            for ti in 0..5 {
                let t = Affine1D::new(a, ti as f64 * 0.2).unwrap();
                let g = shear_resample_operator(30, t).unwrap().apply(&f).unwrap();
                assert!(l2_projection_residual(&f, &g, t).unwrap() <= 1e-6, "a={a}");
            }
        }
    }

    #[test]
    fn mirrored_transform_reverses_signal() {
        let n = 9;
        // a = -1, tau = n - 1: g[k] = f[n - 1 - k]
        let op = shear_resample_operator(n, Affine1D::new(-1.0, (n - 1) as f64).unwrap()).unwrap();
        let f: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let g = op.apply(&f).unwrap();
        for k in 0..n {
            assert!((g[k] - (n - 1 - k) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn minification_suppresses_aliasing() {
        // tone at 0.45 cycles/sample minified by 1.6
        let n_in = 400;
        let n_out = 240;
        let f: Vec<f64> = (0..n_in)
            .map(|l| (2.0 * std::f64::consts::PI * 0.45 * l as f64).sin())
            .collect();
        let t = Affine1D::from_source_map(1.6, 0.0).unwrap();
        let g = resample_operator(n_out, n_in, t).unwrap().apply(&f).unwrap();
        let nearest: Vec<f64> = (0..n_out)
            .map(|k| f[((1.6 * k as f64) + 0.5).floor() as usize])
            .collect();
        let energy = |x: &[f64]| -> f64 {
            let inner = &x[5..x.len() - 5];
            let m = inner.iter().sum::<f64>() / inner.len() as f64;
            inner.iter().map(|v| (v - m).powi(2)).sum()
        };
        let ratio = energy(&g) / energy(&nearest);
        assert!(ratio <= 0.5, "energy ratio {ratio}");
    }
}
