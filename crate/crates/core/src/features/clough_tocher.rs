//! Piecewise-cubic C1 interpolation over a Delaunay triangulation.
//!
//! Each triangle is split at its centroid into three cubic Bezier patches
//! (the Clough–Tocher macro element). Patch control points are written with
//! four barycentric indices `(n1, n2, n3, n4)` where the fourth refers to the
//! centroid; inside a patch the index of the opposite corner is zero.

use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};

type Coeffs = [[[f64; 4]; 4]; 4];

#[derive(Debug, Clone)]
struct Triangle {
    v: [usize; 3],
    p: [[f64; 2]; 3],
    // Foot parameter of the centroid on the edge opposite each corner.
    s: [f64; 3],
}

/// Geometry of the triangulation; reusable across value sets.
#[derive(Debug, Clone)]
pub struct CloughTocher {
    points: Vec<[f64; 2]>,
    triangles: Vec<Triangle>,
    neighbours: Vec<Vec<usize>>,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

impl CloughTocher {
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Numeric("non-finite interpolation node".into()));
        }
        let mut tri: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
        for p in points {
            tri.insert(Point2::new(p[0], p[1]))
                .map_err(|e| Error::Degenerate(format!("triangulation insert: {e:?}")))?;
        }
        if tri.num_vertices() != points.len() {
            return Err(Error::Degenerate("duplicate interpolation nodes".into()));
        }
        // spade hands out its own vertex indices; map them back by position.
        let index_of = |p: Point2<f64>| {
            points
                .iter()
                .position(|q| q[0] == p.x && q[1] == p.y)
                .expect("vertex comes from the input")
        };
        let mut triangles = Vec::new();
        for face in tri.inner_faces() {
            let vs = face.vertices();
            let mut v = [0; 3];
            for (slot, h) in v.iter_mut().zip(vs.iter()) {
                *slot = index_of(h.position());
            }
            let mut p = [points[v[0]], points[v[1]], points[v[2]]];
            if cross(sub(p[1], p[0]), sub(p[2], p[0])) < 0.0 {
                v.swap(1, 2);
                p.swap(1, 2);
            }
            let c = [
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
            ];
            let mut s = [0.0; 3];
            for m in 0..3 {
                let (a, b) = (p[(m + 1) % 3], p[(m + 2) % 3]);
                let e = sub(b, a);
                s[m] = dot(sub(c, a), e) / dot(e, e);
            }
            triangles.push(Triangle { v, p, s });
        }
        if triangles.is_empty() {
            return Err(Error::Degenerate("interpolation nodes are collinear".into()));
        }
        let mut neighbours = vec![Vec::new(); points.len()];
        for t in &triangles {
            for a in 0..3 {
                for b in 0..3 {
                    if a != b && !neighbours[t.v[a]].contains(&t.v[b]) {
                        neighbours[t.v[a]].push(t.v[b]);
                    }
                }
            }
        }
        Ok(Self {
            points: points.to_vec(),
            triangles,
            neighbours,
        })
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Containing triangle and barycentric coordinates, or `None` outside the hull.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
        const EPS: f64 = 1e-12;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for (i, t) in self.triangles.iter().enumerate() {
            let area = cross(sub(t.p[1], t.p[0]), sub(t.p[2], t.p[0]));
            let b1 = cross(sub(t.p[1], x), sub(t.p[2], x)) / area;
            let b2 = cross(sub(t.p[2], x), sub(t.p[0], x)) / area;
            let b3 = 1.0 - b1 - b2;
            let worst = b1.min(b2).min(b3);
            if worst >= -EPS && best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((i, [b1, b2, b3], worst));
            }
        }
        best.map(|(i, mut b, _)| {
            b.iter_mut().for_each(|v| *v = v.max(0.0));
            let s: f64 = b.iter().sum();
            (i, b.map(|v| v / s))
        })
    }

    /// Vertex gradients by a least-squares plane through each 1-ring.
    pub fn gradients(&self, values: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.check_len(values)?;
        self.neighbours
            .iter()
            .enumerate()
            .map(|(i, ring)| {
                let (mut a11, mut a12, mut a22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for &j in ring {
                    let d = sub(self.points[j], self.points[i]);
                    let df = values[j] - values[i];
                    a11 += d[0] * d[0];
                    a12 += d[0] * d[1];
                    a22 += d[1] * d[1];
                    r1 += d[0] * df;
                    r2 += d[1] * df;
                }
                let det = a11 * a22 - a12 * a12;
                if det.abs() <= 1e-14 * (a11 * a22).max(f64::MIN_POSITIVE) {
                    return Err(Error::Degenerate(format!("vertex {i} has a collinear 1-ring")));
                }
                Ok([(a22 * r1 - a12 * r2) / det, (a11 * r2 - a12 * r1) / det])
            })
            .collect()
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.points.len() {
            return Err(Error::ShapeMismatch {
                op: "clough-tocher values",
                lhs: vec![self.points.len()],
                rhs: vec![values.len()],
            });
        }
        Ok(())
    }

    fn coefficients(&self, tri: usize, values: &[f64], grads: &[[f64; 2]]) -> Coeffs {
        let t = &self.triangles[tri];
        let mut c: Coeffs = [[[0.0; 4]; 4]; 4];
        let idx = |n: [usize; 4]| (n[0], n[1], n[2]);
        let get = |c: &Coeffs, n: [usize; 4]| {
            let (a, b, d) = idx(n);
            c[a][b][d]
        };
        let set = |c: &mut Coeffs, n: [usize; 4], v: f64| {
            let (a, b, d) = idx(n);
            c[a][b][d] = v;
        };
        let unit = |m: usize| {
            let mut n = [0; 4];
            n[m] = 1;
            n
        };
        let add = |a: [usize; 4], b: [usize; 4]| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]];
        let times = |k: usize, a: [usize; 4]| a.map(|x| x * k);

        for m in 0..3 {
            let f = values[t.v[m]];
            let g = grads[t.v[m]];
            set(&mut c, times(3, unit(m)), f);
            for o in 0..3 {
                if o != m {
                    let e = sub(t.p[o], t.p[m]);
                    set(&mut c, add(times(2, unit(m)), unit(o)), f + dot(e, g) / 3.0);
                }
            }
        }
        for m in 0..3 {
            let (a, b) = ((m + 1) % 3, (m + 2) % 3);
            let v = (get(&c, times(3, unit(m)))
                + get(&c, add(times(2, unit(m)), unit(a)))
                + get(&c, add(times(2, unit(m)), unit(b))))
                / 3.0;
            set(&mut c, add(times(2, unit(m)), unit(3)), v);
        }
        // Edge-interior control point chosen so the cross-boundary derivative
        // along the centroid's perpendicular is linear on the edge.
        for m in 0..3 {
            let (a, b) = ((m + 1) % 3, (m + 2) % 3);
            let s = t.s[m];
            let (ua, ub) = (unit(a), unit(b));
            let c_aaa = get(&c, times(3, ua));
            let c_aab = get(&c, add(times(2, ua), ub));
            let c_abb = get(&c, add(ua, times(2, ub)));
            let c_bbb = get(&c, times(3, ub));
            let c_aa4 = get(&c, add(times(2, ua), unit(3)));
            let c_bb4 = get(&c, add(times(2, ub), unit(3)));
            let v = (c_aa4 + c_bb4
                - (1.0 - s) * (c_aaa - 2.0 * c_aab + c_abb)
                - s * (c_aab - 2.0 * c_abb + c_bbb))
                / 2.0;
            set(&mut c, add(add(ua, ub), unit(3)), v);
        }
        for m in 0..3 {
            let (a, b) = ((m + 1) % 3, (m + 2) % 3);
            let v = (get(&c, add(add(unit(m), unit(a)), unit(3)))
                + get(&c, add(add(unit(m), unit(b)), unit(3)))
                + get(&c, add(times(2, unit(m)), unit(3))))
                / 3.0;
            set(&mut c, add(unit(m), times(2, unit(3))), v);
        }
        let centre = (0..3)
            .map(|m| get(&c, add(unit(m), times(2, unit(3)))))
            .sum::<f64>()
            / 3.0;
        set(&mut c, times(3, unit(3)), centre);
        c
    }

    fn eval_patch(c: &Coeffs, bary: [f64; 3]) -> f64 {
        let (m, &bmin) = bary
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let mut beta = [bary[0] - bmin, bary[1] - bmin, bary[2] - bmin, 3.0 * bmin];
        beta[m] = 0.0;
        let fact = [1.0, 1.0, 2.0, 6.0];
        let mut acc = 0.0;
        for n0 in 0..=3usize {
            for n1 in 0..=3 - n0 {
                for n2 in 0..=3 - n0 - n1 {
                    let n3 = 3 - n0 - n1 - n2;
                    let n = [n0, n1, n2, n3];
                    if n[m] != 0 {
                        continue;
                    }
                    let coef = 6.0 / (fact[n0] * fact[n1] * fact[n2] * fact[n3]);
                    let basis: f64 = (0..4).map(|k| beta[k].powi(n[k] as i32)).product();
                    acc += coef * basis * c[n0][n1][n2];
                }
            }
        }
        acc
    }

    /// Interpolates `values` at each query point; `None` outside the hull.
    pub fn interpolate(&self, values: &[f64], queries: &[[f64; 2]]) -> Result<Vec<Option<f64>>> {
        let located: Vec<_> = queries.iter().map(|q| self.locate(*q)).collect();
        self.interpolate_located(values, &located)
    }

    /// As [`interpolate`](Self::interpolate) with point location done up front.
    pub fn interpolate_located(
        &self,
        values: &[f64],
        located: &[Option<(usize, [f64; 3])>],
    ) -> Result<Vec<Option<f64>>> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite value at interpolation node".into()));
        }
        let grads = self.gradients(values)?;
        let coeffs: Vec<Coeffs> = (0..self.triangles.len())
            .map(|t| self.coefficients(t, values, &grads))
            .collect();
        Ok(located
            .iter()
            .map(|loc| loc.map(|(t, b)| Self::eval_patch(&coeffs[t], b)))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.4, 0.6]]
    }

    #[test]
    fn reproduces_nodes_and_planes() {
        let pts = square();
        let ct = CloughTocher::new(&pts).unwrap();
        let f = |p: [f64; 2]| 2.0 * p[0] - 3.0 * p[1] + 0.5;
        let vals: Vec<f64> = pts.iter().map(|p| f(*p)).collect();
        let out = ct.interpolate(&vals, &pts).unwrap();
        for (o, v) in out.iter().zip(&vals) {
            assert!((o.unwrap() - v).abs() < 1e-12);
        }
        let q = [[0.1, 0.2], [0.9, 0.5], [0.5, 0.5], [0.33, 0.77]];
        for (o, p) in ct.interpolate(&vals, &q).unwrap().iter().zip(&q) {
            assert!((o.unwrap() - f(*p)).abs() < 1e-12);
        }
    }

    #[test]
    fn outside_hull_is_none() {
        let ct = CloughTocher::new(&square()).unwrap();
        let out = ct.interpolate(&[1.0; 5], &[[2.0, 2.0], [-0.1, 0.5]]).unwrap();
        assert_eq!(out, vec![None, None]);
    }

    #[test]
    fn collinear_points_rejected() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        assert!(matches!(CloughTocher::new(&pts), Err(Error::Degenerate(_))));
    }

    #[test]
    fn continuous_across_edges() {
        let pts = square();
        let ct = CloughTocher::new(&pts).unwrap();
        let vals = [0.3, -1.0, 2.0, 0.7, 5.0];
        // Walk a line through the interior in tiny steps; jumps would show up
        // as increments far larger than the step.
        let n = 2000;
        let q: Vec<[f64; 2]> = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                [0.05 + 0.9 * t, 0.1 + 0.8 * t * t]
            })
            .collect();
        let out: Vec<f64> = ct.interpolate(&vals, &q).unwrap().into_iter().map(Option::unwrap).collect();
        let max_jump = out.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(max_jump < 0.05, "{max_jump}");
    }
}
