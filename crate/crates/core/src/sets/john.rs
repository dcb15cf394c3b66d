//! Maximum-area centered ellipse inside a symmetric polygon.
//!
//! The ellipse is `S B_2` with `S = [[a, b], [b, c]]` positive definite; it
//! lies in the slab `|<n_i, x>| <= h_i` iff `||S n_i||_2 <= h_i`. We maximize
//! `log det S` under those constraints with a log-barrier Newton method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm::{convex_hull, NormKind, NormSpec};

const SYM_TOL: f64 = 1e-9;
const INCLUSION_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JohnEllipse {
    /// Gram matrix `M` of the ellipse norm `sqrt(x^T M x)`.
    pub matrix: [[f64; 2]; 2],
    /// Worst value of `||S n_i|| / h_i` over edges (at most one).
    pub inner_ratio: f64,
    /// Largest ellipse norm of a polygon vertex (at most `sqrt 2`).
    pub outer_ratio: f64,
}

impl JohnEllipse {
    pub fn norm(&self) -> Result<NormSpec> {
        NormSpec::ellipse(self.matrix)
    }
}

struct Edge {
    n: [f64; 2],
    h: f64,
}

fn edges(vertices: &[[f64; 2]]) -> Result<Vec<Edge>> {
    let hull = convex_hull(vertices);
    if hull.len() < 4 {
        return Err(Error::DegenerateBody(format!("{} hull vertices", hull.len())));
    }
    let scale = hull.iter().fold(0.0f64, |m, v| m.max(v[0].hypot(v[1])));
    for v in vertices {
        if !hull.iter().any(|w| (w[0] + v[0]).hypot(w[1] + v[1]) <= SYM_TOL * scale) && !on_hull(&hull, [-v[0], -v[1]], scale) {
            return Err(Error::NotSymmetric);
        }
    }
    let k = hull.len();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let (p, q) = (hull[i], hull[(i + 1) % k]);
        let (ex, ey) = (q[0] - p[0], q[1] - p[1]);
        let len = ex.hypot(ey);
        let n = [ey / len, -ex / len];
        let h = n[0] * p[0] + n[1] * p[1];
        if h <= 1e-12 * scale {
            return Err(Error::DegenerateBody("origin is not interior".into()));
        }
        out.push(Edge { n, h });
    }
    Ok(out)
}

fn on_hull(hull: &[[f64; 2]], v: [f64; 2], scale: f64) -> bool {
    let k = hull.len();
    (0..k).any(|i| {
        let (p, q) = (hull[i], hull[(i + 1) % k]);
        let cross = (q[0] - p[0]) * (v[1] - p[1]) - (q[1] - p[1]) * (v[0] - p[0]);
        let inside = (v[0] - p[0]) * (q[0] - v[0]) + (v[1] - p[1]) * (q[1] - v[1]) >= -SYM_TOL * scale * scale;
        cross.abs() <= SYM_TOL * scale * scale && inside
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let piv = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            for k in c..3 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn dot3(u: [f64; 3], v: [f64; 3]) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

/// Barrier objective `-log det S - mu * sum log g_i`, or `None` if infeasible.
fn objective(s: [f64; 3], edges: &[Edge], mu: f64) -> Option<f64> {
    let det = s[0] * s[2] - s[1] * s[1];
    if !(s[0] > 0.0 && det > 0.0) {
        return None;
    }
    let mut f = -det.ln();
    for e in edges {
        let (al, be) = ([e.n[0], e.n[1], 0.0], [0.0, e.n[0], e.n[1]]);
        let g = e.h * e.h - dot3(al, s).powi(2) - dot3(be, s).powi(2);
        if g <= 0.0 {
            return None;
        }
        f -= mu * g.ln();
    }
    Some(f)
}

fn newton_step(s: [f64; 3], edges: &[Edge], mu: f64) -> Option<[f64; 3]> {
    let det = s[0] * s[2] - s[1] * s[1];
    let gd = [s[2], -2.0 * s[1], s[0]];
    let hd = [[0.0, 0.0, 1.0], [0.0, -2.0, 0.0], [1.0, 0.0, 0.0]];
    let mut grad = [0.0; 3];
    let mut hess = [[0.0; 3]; 3];
    for i in 0..3 {
        grad[i] = -gd[i] / det;
        for j in 0..3 {
            hess[i][j] = -hd[i][j] / det + gd[i] * gd[j] / (det * det);
        }
    }
    for e in edges {
        let (al, be) = ([e.n[0], e.n[1], 0.0], [0.0, e.n[0], e.n[1]]);
        let (ua, ub) = (dot3(al, s), dot3(be, s));
        let g = e.h * e.h - ua * ua - ub * ub;
        let dg = [-2.0 * (ua * al[0] + ub * be[0]), -2.0 * (ua * al[1] + ub * be[1]), -2.0 * (ua * al[2] + ub * be[2])];
        for i in 0..3 {
            grad[i] -= mu * dg[i] / g;
            for j in 0..3 {
                let hg = -2.0 * (al[i] * al[j] + be[i] * be[j]);
                hess[i][j] += mu * (dg[i] * dg[j] / (g * g) - hg / g);
            }
        }
    }
    solve3(hess, [-grad[0], -grad[1], -grad[2]])
}

fn maximize(edges: &[Edge]) -> Result<[f64; 3]> {
    let r = 0.5 * edges.iter().fold(f64::INFINITY, |m, e| m.min(e.h));
    let mut s = [r, 0.0, r];
    let mut mu = 1.0;
    while mu > 1e-14 {
        for _ in 0..100 {
            let Some(d) = newton_step(s, edges, mu) else {
                return Err(Error::DegenerateBody("singular barrier Hessian".into()));
            };
            let f0 = objective(s, edges, mu).expect("iterate stays feasible");
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-12 {
                let cand = [s[0] + t * d[0], s[1] + t * d[1], s[2] + t * d[2]];
                if let Some(f) = objective(cand, edges, mu) {
                    if f <= f0 {
                        s = cand;
                        moved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            let size = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !moved || size * t < 1e-13 * (s[0] + s[2]) {
                break;
            }
        }
        mu *= 0.1;
    }
    Ok(s)
}

/// Maximum-area centered ellipse inside the polygon spanned by `vertices`.
pub fn john_ellipse_2d(vertices: &[[f64; 2]]) -> Result<JohnEllipse> {
    let edges = edges(vertices)?;
    let s = maximize(&edges)?;
    let [a, b, c] = s;
    let det = a * c - b * b;
    // S^{-1}, then M = S^{-2}
    let si = [[c / det, -b / det], [-b / det, a / det]];
    let m = [
        [si[0][0] * si[0][0] + si[0][1] * si[1][0], si[0][0] * si[0][1] + si[0][1] * si[1][1]],
        [si[1][0] * si[0][0] + si[1][1] * si[1][0], si[1][0] * si[0][1] + si[1][1] * si[1][1]],
    ];
    let inner_ratio = edges.iter().fold(0.0f64, |w, e| {
        let sn = [a * e.n[0] + b * e.n[1], b * e.n[0] + c * e.n[1]];
        w.max(sn[0].hypot(sn[1]) / e.h)
    });
    let outer_ratio = vertices.iter().fold(0.0f64, |w, v| {
        let u = [si[0][0] * v[0] + si[0][1] * v[1], si[1][0] * v[0] + si[1][1] * v[1]];
        w.max(u[0].hypot(u[1]))
    });
    if inner_ratio > 1.0 + INCLUSION_SLACK || outer_ratio > 2f64.sqrt() * (1.0 + INCLUSION_SLACK) {
        return Err(Error::DegenerateBody(format!("inclusion check failed: inner {inner_ratio}, outer {outer_ratio}")));
    }
    Ok(JohnEllipse { matrix: [[m[0][0], 0.5 * (m[0][1] + m[1][0])], [0.5 * (m[0][1] + m[1][0]), m[1][1]]], inner_ratio, outer_ratio })
}

/// John ellipse of a planar unit ball. Ellipses (including `l2`) map to themselves; the
/// polyhedral `l1` and `linf` balls are handled through their vertices.
pub fn john_ellipse_of(n: &NormSpec) -> Result<JohnEllipse> {
    if n.dim() != 2 {
        return Err(Error::Unsupported("john ellipse is computed in the plane only".into()));
    }
    let vertices: Vec<[f64; 2]> = match n.kind() {
        NormKind::Ellipse { matrix } => {
            return Ok(JohnEllipse { matrix: *matrix, inner_ratio: 1.0, outer_ratio: 1.0 });
        }
        NormKind::Lp { p } if *p == 2.0 => {
            return Ok(JohnEllipse { matrix: [[1.0, 0.0], [0.0, 1.0]], inner_ratio: 1.0, outer_ratio: 1.0 });
        }
        NormKind::WeightedLp { p, weights } if *p == 2.0 => {
            let m = [[weights[0] * weights[0], 0.0], [0.0, weights[1] * weights[1]]];
            return Ok(JohnEllipse { matrix: m, inner_ratio: 1.0, outer_ratio: 1.0 });
        }
        NormKind::Polygon { vertices } => vertices.clone(),
        NormKind::Lp { p } if *p == 1.0 => vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
        NormKind::Lp { p } if p.is_infinite() => vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]],
        NormKind::WeightedLp { p, weights } if *p == 1.0 || p.is_infinite() => {
            let (u, v) = (1.0 / weights[0], 1.0 / weights[1]);
            if *p == 1.0 {
                vec![[u, 0.0], [0.0, v], [-u, 0.0], [0.0, -v]]
            } else {
                vec![[u, v], [-u, v], [-u, -v], [u, -v]]
            }
        }
        _ => return Err(Error::Unsupported(format!("john ellipse of {}", n.label()))),
    };
    john_ellipse_2d(&vertices)
}
