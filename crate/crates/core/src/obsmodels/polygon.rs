//! Convex polygons and Sutherland-Hodgman clipping.

use crate::error::{Error, Result};

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<[f64; 2]>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let (p, q) = (v[i], v[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

impl ConvexPolygon {
    /// Validates convexity; clockwise input is reversed.
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid("a polygon needs at least three vertices"));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("polygon vertices must be finite"));
        }
        let area = signed_area(&vertices);
        if area == 0.0 {
            return Err(Error::invalid("polygon is degenerate (zero area)"));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        let scale = vertices
            .iter()
            .flatten()
            .fold(1.0f64, |m, c| m.max(c.abs()));
        let tol = -1e-12 * scale * scale;
        for i in 0..n {
            if cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]) < tol {
                return Err(Error::invalid("polygon is not convex"));
            }
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    pub(crate) fn from_ccw_unchecked(vertices: Vec<[f64; 2]>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    /// Point containment; the boundary counts as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % n], p) >= 0.0)
    }
}

/// Keeps the part of `poly` on the left of the directed edge `a -> b`.
fn clip_halfplane(poly: &[[f64; 2]], a: [f64; 2], b: [f64; 2], out: &mut Vec<[f64; 2]>) {
    out.clear();
    let n = poly.len();
    for i in 0..n {
        let s = poly[i];
        let e = poly[(i + 1) % n];
        let ds = cross(a, b, s);
        let de = cross(a, b, e);
        let (s_in, e_in) = (ds >= 0.0, de >= 0.0);
        if s_in != e_in {
            let t = ds / (ds - de);
            out.push([s[0] + (e[0] - s[0]) * t, s[1] + (e[1] - s[1]) * t]);
        }
        if e_in {
            out.push(e);
        }
    }
}

/// Intersection of two convex polygons, `None` when it has no area.
pub fn clip(subject: &ConvexPolygon, window: &ConvexPolygon) -> Option<ConvexPolygon> {
    let mut current = subject.vertices.clone();
    let mut scratch = Vec::with_capacity(current.len() + 4);
    let w = &window.vertices;
    for i in 0..w.len() {
        clip_halfplane(&current, w[i], w[(i + 1) % w.len()], &mut scratch);
        std::mem::swap(&mut current, &mut scratch);
        if current.len() < 3 {
            return None;
        }
    }
    (signed_area(&current) > 0.0).then(|| ConvexPolygon::from_ccw_unchecked(current))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> ConvexPolygon {
        ConvexPolygon::rect(-0.5, -0.5, 0.5, 0.5).unwrap()
    }

    fn rotated_unit(angle: f64) -> ConvexPolygon {
        let (s, c) = angle.sin_cos();
        let pts = [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]
            .iter()
            .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
            .collect();
        ConvexPolygon::new(pts).unwrap()
    }

    #[test]
    fn self_intersection_is_identity() {
        let r = clip(&unit(), &unit()).unwrap();
        assert!((r.area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_squares() {
        let shifted = ConvexPolygon::rect(1.5, -0.5, 2.5, 0.5).unwrap();
        assert!(clip(&unit(), &shifted).is_none());
    }

    #[test]
    fn rotated_square_octagon() {
        let r = clip(&unit(), &rotated_unit(std::f64::consts::FRAC_PI_4)).unwrap();
        let want = 2.0 * (2f64.sqrt() - 1.0);
        assert!((r.area() - want).abs() < 1e-12);
        assert_eq!(r.vertices().len(), 8);

        // Monte-Carlo oracle
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rot = rotated_unit(std::f64::consts::FRAC_PI_4);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| {
                let p = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
                rot.contains(p)
            })
            .count();
        assert!((hits as f64 / n as f64 - r.area()).abs() < 1e-3);
    }

    #[test]
    fn clockwise_input_is_reoriented_and_concave_rejected() {
        let cw = ConvexPolygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(signed_area(cw.vertices()) > 0.0);
        let concave = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.2], [2.0, 2.0], [0.0, 2.0]];
        assert!(ConvexPolygon::new(concave).is_err());
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn clipped_area_bounded_by_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let a = rotated_unit(rng.random_range(0.0..1.5));
            let off = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let b = ConvexPolygon::new(
                rotated_unit(rng.random_range(0.0..1.5))
                    .vertices()
                    .iter()
                    .map(|p| [p[0] * 1.3 + off[0], p[1] * 0.7 + off[1]])
                    .collect(),
            )
            .unwrap();
            if let Some(c) = clip(&a, &b) {
                assert!(c.area() <= a.area().min(b.area()) + 1e-12);
                let c2 = clip(&b, &a).unwrap();
                assert!((c.area() - c2.area()).abs() < 1e-12);
            }
        }
    }
}
