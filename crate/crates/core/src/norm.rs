//! Norm evaluation, the dual norm, the duality map and Birkhoff–James
//! orthogonality for a small family of finite-dimensional norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vector;

/// Relative tolerance used to decide which facets/coordinates are active.
const ACTIVE_TOL: f64 = 1e-10;
/// One-sided directional derivatives that disagree by more than this flag a kink.
const KINK_TOL: f64 = 1e-4;
const KINK_PROBES: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum NormKind {
    /// `(sum |x_i|^p)^(1/p)`, `p = inf` gives the max norm.
    Lp { p: f64 },
    /// `|| (w_i x_i) ||_p`: a diagonal rescaling of an lp norm.
    WeightedLp { p: f64, weights: Vec<f64> },
    /// Gauge of a centrally symmetric convex polygon.
    Polygon { vertices: Vec<[f64; 2]> },
    /// `sqrt(x^T M x)` for a symmetric positive definite `M`.
    Ellipse { matrix: [[f64; 2]; 2] },
}

/// Outward facet of a polygon stored as the functional `n / h`, so that the
/// gauge is `max_i <g_i, x>`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Facet {
    g: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNorm", into = "RawNorm")]
pub struct NormSpec {
    kind: NormKind,
    dim: usize,
    facets: Vec<Facet>,
    inverse: [[f64; 2]; 2],
}

pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn lp_eval(p: f64, x: impl Iterator<Item = f64> + Clone) -> f64 {
    if p == 1.0 {
        x.map(f64::abs).sum()
    } else if p.is_infinite() {
        x.fold(0.0, |m, c| m.max(c.abs()))
    } else {
        let m = x.clone().fold(0.0, |m: f64, c| m.max(c.abs()));
        if m == 0.0 {
            return 0.0;
        }
        if p == 2.0 {
            m * x.map(|c| (c / m) * (c / m)).sum::<f64>().sqrt()
        } else {
            m * x.map(|c| (c.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

/// Extreme unit vectors `u` of the `l_r` ball maximising `<v, u>`.
fn lp_attainers(r: f64, v: &[f64]) -> Vec<Vec<f64>> {
    let m = v.iter().fold(0.0, |m: f64, c| m.max(c.abs()));
    if m == 0.0 {
        return Vec::new();
    }
    if r == 1.0 {
        v.iter()
            .enumerate()
            .filter(|(_, c)| c.abs() >= m * (1.0 - ACTIVE_TOL))
            .map(|(i, c)| {
                let mut u = vec![0.0; v.len()];
                u[i] = c.signum();
                u
            })
            .collect()
    } else if r.is_infinite() {
        let free: Vec<usize> = (0..v.len()).filter(|&i| v[i].abs() <= m * ACTIVE_TOL).collect();
        let base: Vec<f64> = v.iter().map(|c| if c.abs() <= m * ACTIVE_TOL { 0.0 } else { c.signum() }).collect();
        (0..1usize << free.len())
            .map(|mask| {
                let mut u = base.clone();
                for (bit, &i) in free.iter().enumerate() {
                    u[i] = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
                }
                u
            })
            .collect()
    } else {
        let s = conjugate_exponent(r);
        let scaled: Vec<f64> = v.iter().map(|c| c / m).collect();
        let ns = lp_eval(s, scaled.iter().copied());
        vec![scaled.iter().map(|c| c.signum() * (c.abs() / ns).powf(s - 1.0)).collect()]
    }
}

fn mat_vec(m: &[[f64; 2]; 2], x: &[f64]) -> [f64; 2] {
    [m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]]
}

impl NormSpec {
    pub fn lp(p: f64, dim: usize) -> Result<Self> {
        Self::build(NormKind::Lp { p }, dim)
    }

    pub fn euclid(dim: usize) -> Self {
        Self::lp(2.0, dim).expect("euclidean norm is valid")
    }

    pub fn weighted_lp(p: f64, weights: Vec<f64>) -> Result<Self> {
        let dim = weights.len();
        Self::build(NormKind::WeightedLp { p, weights }, dim)
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        Self::build(NormKind::Polygon { vertices }, 2)
    }

    pub fn ellipse(matrix: [[f64; 2]; 2]) -> Result<Self> {
        Self::build(NormKind::Ellipse { matrix }, 2)
    }

    /// Regular polygon with `k` (even) vertices on the Euclidean circle of the
    /// given radius, first vertex on the positive x axis.
    pub fn regular_polygon(k: usize, radius: f64) -> Result<Self> {
        if k < 4 || k % 2 == 1 {
            return Err(Error::InvalidNorm(format!("regular polygon needs an even vertex count >= 4, got {k}")));
        }
        let vertices = (0..k)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / k as f64;
                [radius * t.cos(), radius * t.sin()]
            })
            .collect();
        Self::polygon(vertices)
    }

    /// Random symmetric polygon: convex hull of `half` random points and their mirror images.
    pub fn random_polygon<R: Rng>(rng: &mut R, half: usize) -> Self {
        loop {
            let mut pts = Vec::with_capacity(2 * half);
            for _ in 0..half {
                let t = rng.gen_range(0.0..std::f64::consts::PI);
                let r = rng.gen_range(0.6..1.4);
                pts.push([r * t.cos(), r * t.sin()]);
                pts.push([-r * t.cos(), -r * t.sin()]);
            }
            let hull = convex_hull(&pts);
            if hull.len() >= 4 {
                if let Ok(n) = Self::polygon(hull) {
                    return n;
                }
            }
        }
    }

    /// Random ellipse with semi-axes in `[0.5, 2]` and random orientation.
    pub fn random_ellipse<R: Rng>(rng: &mut R) -> Self {
        let a: f64 = rng.gen_range(0.5..2.0);
        let b: f64 = rng.gen_range(0.5..2.0);
        let t: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let (c, s) = (t.cos(), t.sin());
        let (la, lb) = (1.0 / (a * a), 1.0 / (b * b));
        // M = R diag(la, lb) R^T
        let m = [
            [c * c * la + s * s * lb, c * s * (la - lb)],
            [c * s * (la - lb), s * s * la + c * c * lb],
        ];
        Self::ellipse(m).expect("random ellipse is positive definite")
    }

    fn build(kind: NormKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidNorm("dimension must be positive".into()));
        }
        let mut facets = Vec::new();
        let mut inverse = [[0.0; 2]; 2];
        let kind = match kind {
            NormKind::Lp { p } => {
                check_exponent(p)?;
                NormKind::Lp { p }
            }
            NormKind::WeightedLp { p, weights } => {
                check_exponent(p)?;
                if weights.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: weights.len() });
                }
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::InvalidNorm("weights must be positive and finite".into()));
                }
                NormKind::WeightedLp { p, weights }
            }
            NormKind::Polygon { vertices } => {
                if dim != 2 {
                    return Err(Error::InvalidNorm("polygon norms are two-dimensional".into()));
                }
                let (sorted, f) = polygon_geometry(vertices)?;
                facets = f;
                NormKind::Polygon { vertices: sorted }
            }
            NormKind::Ellipse { matrix } => {
                if dim != 2 {
                    return Err(Error::InvalidNorm("ellipse norms are two-dimensional".into()));
                }
                let [[a, b], [c, d]] = matrix;
                if matrix.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidNorm("matrix entries must be finite".into()));
                }
                if (b - c).abs() > 1e-12 * (1.0 + b.abs().max(c.abs())) {
                    return Err(Error::InvalidNorm("ellipse matrix is not symmetric".into()));
                }
                let det = a * d - b * c;
                if !(a > 1e-12 && det > 1e-12) {
                    return Err(Error::InvalidNorm("ellipse matrix is not positive definite".into()));
                }
                inverse = [[d / det, -b / det], [-c / det, a / det]];
                NormKind::Ellipse { matrix }
            }
        };
        Ok(Self { kind, dim, facets, inverse })
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether the unit sphere contains no segments.
    pub fn is_strictly_convex(&self) -> bool {
        match &self.kind {
            NormKind::Lp { p } | NormKind::WeightedLp { p, .. } => *p > 1.0 && p.is_finite() || self.dim == 1,
            NormKind::Ellipse { .. } => true,
            NormKind::Polygon { .. } => false,
        }
    }

    /// Whether the norm is differentiable away from the origin.
    pub fn is_smooth(&self) -> bool {
        self.is_strictly_convex()
    }

    /// Polygon vertices (sorted counter-clockwise), empty for other kinds.
    pub fn vertices(&self) -> &[[f64; 2]] {
        match &self.kind {
            NormKind::Polygon { vertices } => vertices,
            _ => &[],
        }
    }

    /// Unchecked evaluation on raw coordinates.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            NormKind::Lp { p } => lp_eval(*p, x.iter().copied()),
            NormKind::WeightedLp { p, weights } => lp_eval(*p, x.iter().zip(weights).map(|(a, w)| a * w)),
            NormKind::Polygon { .. } => self.facets.iter().fold(0.0, |m, f| m.max(f.g[0] * x[0] + f.g[1] * x[1])),
            NormKind::Ellipse { matrix } => {
                let mx = mat_vec(matrix, x);
                (x[0] * mx[0] + x[1] * mx[1]).max(0.0).sqrt()
            }
        }
    }

    /// Unchecked dual norm `sup { <p, x> : ||x|| <= 1 }`.
    pub fn eval_dual(&self, p: &[f64]) -> f64 {
        match &self.kind {
            NormKind::Lp { p: e } => lp_eval(conjugate_exponent(*e), p.iter().copied()),
            NormKind::WeightedLp { p: e, weights } => {
                lp_eval(conjugate_exponent(*e), p.iter().zip(weights).map(|(a, w)| a / w))
            }
            NormKind::Polygon { vertices } => vertices.iter().fold(0.0, |m, v| m.max(v[0] * p[0] + v[1] * p[1])),
            NormKind::Ellipse { .. } => {
                let ip = mat_vec(&self.inverse, p);
                (p[0] * ip[0] + p[1] * ip[1]).max(0.0).sqrt()
            }
        }
    }

    pub fn norm(&self, x: &Vector) -> Result<f64> {
        x.check_dim(self.dim)?;
        Ok(self.eval(x.coords()))
    }

    pub fn dual_norm(&self, p: &Vector) -> Result<f64> {
        p.check_dim(self.dim)?;
        Ok(self.eval_dual(p.coords()))
    }

    /// `x / ||x||`.
    pub fn normalize(&self, x: &Vector) -> Result<Vector> {
        let n = self.norm(x)?;
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(x.scale(1.0 / n))
    }

    /// `p / ||p||_*`.
    pub fn normalize_dual(&self, p: &Vector) -> Result<Vector> {
        let n = self.dual_norm(p)?;
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(p.scale(1.0 / n))
    }

    /// Point of the unit sphere in direction `theta` (two-dimensional norms).
    pub fn sphere_point(&self, theta: f64) -> Vector {
        let u = [theta.cos(), theta.sin()];
        let n = self.eval(&u);
        Vector::xy(u[0] / n, u[1] / n)
    }

    /// Extreme points of `J_1(x) = { p : ||p||_* = 1, <p, x> = ||x|| }`,
    /// computed in closed form. A single element means `J_1(x)` is a singleton.
    pub fn j1_set(&self, x: &Vector) -> Result<Vec<Vector>> {
        x.check_dim(self.dim)?;
        if x.is_zero() {
            return Err(Error::ZeroVector);
        }
        let xs = x.coords();
        let out: Vec<Vec<f64>> = match &self.kind {
            NormKind::Lp { p } => lp_attainers(conjugate_exponent(*p), xs),
            NormKind::WeightedLp { p, weights } => {
                let wx: Vec<f64> = xs.iter().zip(weights).map(|(a, w)| a * w).collect();
                lp_attainers(conjugate_exponent(*p), &wx)
                    .into_iter()
                    .map(|q| q.iter().zip(weights).map(|(a, w)| a * w).collect())
                    .collect()
            }
            NormKind::Polygon { .. } => {
                let g = self.eval(xs);
                self.facets
                    .iter()
                    .filter(|f| f.g[0] * xs[0] + f.g[1] * xs[1] >= g * (1.0 - ACTIVE_TOL))
                    .map(|f| f.g.to_vec())
                    .collect()
            }
            NormKind::Ellipse { matrix } => {
                let n = self.eval(xs);
                let mx = mat_vec(matrix, xs);
                vec![vec![mx[0] / n, mx[1] / n]]
            }
        };
        Ok(out.into_iter().map(Vector::from).collect())
    }

    /// The unique element of `J_1(x)`, or `MultiValued`.
    pub fn j1_unique(&self, x: &Vector) -> Result<Vector> {
        let mut set = self.j1_set(x)?;
        if set.len() == 1 {
            Ok(set.pop().expect("one element"))
        } else {
            Err(Error::MultiValued)
        }
    }

    /// Extreme unit vectors `u` with `<p, u> = ||p||_*`, i.e. `p / ||p||_* ∈ J_1(u)`.
    pub fn dual_attainers(&self, p: &Vector) -> Result<Vec<Vector>> {
        p.check_dim(self.dim)?;
        if p.is_zero() {
            return Err(Error::ZeroVector);
        }
        let ps = p.coords();
        let out: Vec<Vec<f64>> = match &self.kind {
            NormKind::Lp { p: e } => lp_attainers(*e, ps),
            NormKind::WeightedLp { p: e, weights } => {
                let v: Vec<f64> = ps.iter().zip(weights).map(|(a, w)| a / w).collect();
                lp_attainers(*e, &v)
                    .into_iter()
                    .map(|u| u.iter().zip(weights).map(|(a, w)| a / w).collect())
                    .collect()
            }
            NormKind::Polygon { vertices } => {
                let m = self.eval_dual(ps);
                vertices
                    .iter()
                    .filter(|v| v[0] * ps[0] + v[1] * ps[1] >= m * (1.0 - ACTIVE_TOL))
                    .map(|v| v.to_vec())
                    .collect()
            }
            NormKind::Ellipse { .. } => {
                let n = self.eval_dual(ps);
                let ip = mat_vec(&self.inverse, ps);
                vec![vec![ip[0] / n, ip[1] / n]]
            }
        };
        Ok(out.into_iter().map(Vector::from).collect())
    }

    /// Restriction of an lp-type norm to a coordinate subspace.
    pub fn restrict(&self, coords: &[usize]) -> Result<NormSpec> {
        if coords.iter().any(|&c| c >= self.dim) {
            return Err(Error::BadIndexSet(format!("{coords:?} out of range for dimension {}", self.dim)));
        }
        match &self.kind {
            NormKind::Lp { p } => NormSpec::lp(*p, coords.len()),
            NormKind::WeightedLp { p, weights } => {
                NormSpec::weighted_lp(*p, coords.iter().map(|&c| weights[c]).collect())
            }
            _ if coords.len() == self.dim && coords.iter().enumerate().all(|(i, &c)| i == c) => Ok(self.clone()),
            _ => Err(Error::Unsupported("coordinate restriction of a planar gauge".into())),
        }
    }

    /// Identifier-friendly description, e.g. `lp3` or `polygon8`.
    pub fn label(&self) -> String {
        match &self.kind {
            NormKind::Lp { p } if p.is_infinite() => "linf".into(),
            NormKind::Lp { p } => format!("l{p}"),
            NormKind::WeightedLp { p, .. } => format!("wl{p}"),
            NormKind::Polygon { vertices } => format!("polygon{}", vertices.len()),
            NormKind::Ellipse { .. } => "ellipse".into(),
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 && !p.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidNorm(format!("exponent {p} is not in [1, inf]")))
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_geometry(vertices: Vec<[f64; 2]>) -> Result<(Vec<[f64; 2]>, Vec<Facet>)> {
    if vertices.len() < 4 {
        return Err(Error::InvalidNorm("a symmetric polygon needs at least 4 vertices".into()));
    }
    if vertices.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidNorm("vertex coordinates must be finite".into()));
    }
    let scale = vertices.iter().fold(0.0f64, |m, v| m.max(v[0].abs()).max(v[1].abs()));
    if scale == 0.0 {
        return Err(Error::InvalidNorm("all vertices are at the origin".into()));
    }
    let tol = 1e-9 * scale;
    for v in &vertices {
        if !vertices.iter().any(|w| (w[0] + v[0]).abs() <= tol && (w[1] + v[1]).abs() <= tol) {
            return Err(Error::InvalidNorm(format!("vertex {v:?} has no antipodal partner")));
        }
    }
    let mut sorted = vertices;
    sorted.sort_by(|a, b| a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])));
    let k = sorted.len();
    let mut facets = Vec::with_capacity(k);
    for i in 0..k {
        let (a, b, c) = (sorted[i], sorted[(i + 1) % k], sorted[(i + 2) % k]);
        if cross(a, b, c) <= 1e-12 * scale * scale {
            return Err(Error::InvalidNorm("vertices are not in strictly convex position".into()));
        }
        let n = [b[1] - a[1], a[0] - b[0]];
        let h = n[0] * a[0] + n[1] * a[1];
        if h <= 1e-12 * scale * scale {
            return Err(Error::InvalidNorm("origin is not interior to the polygon".into()));
        }
        facets.push(Facet { g: [n[0] / h, n[1] / h] });
    }
    Ok((sorted, facets))
}

// ---------------------------------------------------------------------------
// Numerical duality map and quasiorthogonality

fn probe_directions(n: &NormSpec) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a31_5eed ^ n.dim as u64);
    (0..KINK_PROBES)
        .map(|_| loop {
            let d: Vec<f64> = (0..n.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = n.eval(&d);
            if norm > 1e-3 {
                break Vector::from(d.iter().map(|c| c / norm).collect::<Vec<_>>());
            }
        })
        .collect()
}

/// Numerical duality map: central-difference gradient of the norm at `x`,
/// renormalised to unit dual norm and verified against `<p, x> = ||x||`.
///
/// Returns `MultiValued` when one-sided directional derivatives disagree,
/// i.e. the norm has a kink at `x` and `J_1(x)` is not a singleton.
pub fn j1_map(n: &NormSpec, x: &Vector, tol: f64) -> Result<Vector> {
    x.check_dim(n.dim())?;
    let nx = n.eval(x.coords());
    if nx == 0.0 {
        return Err(Error::ZeroVector);
    }
    let h = 1e-6 * nx;
    let at = |s: f64, d: &Vector| n.eval(x.axpy(s, d).coords());
    for d in probe_directions(n) {
        let fwd = (at(h, &d) - nx) / h;
        let bwd = (nx - at(-h, &d)) / h;
        if (fwd - bwd).abs() > KINK_TOL {
            return Err(Error::MultiValued);
        }
    }
    let grad: Vec<f64> = (0..n.dim())
        .map(|i| {
            let e = Vector::basis(n.dim(), i);
            (at(h, &e) - at(-h, &e)) / (2.0 * h)
        })
        .collect();
    let p = n.normalize_dual(&Vector::from(grad))?;
    let pairing_gap = (p.dot(x) - nx).abs();
    let dual_gap = (n.eval_dual(p.coords()) - 1.0).abs();
    if pairing_gap > tol * nx || dual_gap > tol {
        return Err(Error::MultiValued);
    }
    Ok(p)
}

/// Minimum of `lambda -> ||x + lambda y||` by golden-section search
/// (the function is convex; its minimiser satisfies `|lambda| ||y|| <= 2 ||x||`).
pub fn min_along_line(n: &NormSpec, x: &Vector, y: &Vector) -> (f64, f64) {
    let nx = n.eval(x.coords());
    let ny = n.eval(y.coords());
    let f = |l: f64| n.eval(x.axpy(l, y).coords());
    let bound = 2.0 * nx / ny;
    golden_min(f, -bound, bound, 200)
}

/// Golden-section minimisation on `[a, b]`; returns `(argmin, min)`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if b - a <= f64::EPSILON * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `y ⌐ x` in the Birkhoff–James sense: `||x + lambda y|| >= ||x||` for all
/// `lambda`, up to a relative tolerance.
pub fn birkhoff_orthogonal(n: &NormSpec, y: &Vector, x: &Vector, tol: f64) -> Result<bool> {
    x.check_dim(n.dim())?;
    y.check_dim(n.dim())?;
    if x.is_zero() || y.is_zero() {
        return Err(Error::ZeroVector);
    }
    let nx = n.eval(x.coords());
    let (_, m) = min_along_line(n, x, y);
    Ok(m >= nx - tol * nx)
}

// ---------------------------------------------------------------------------
// Serialization

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Exponent {
    Num(f64),
    Text(String),
}

impl Exponent {
    fn value(&self) -> Result<f64> {
        match self {
            Exponent::Num(p) => Ok(*p),
            Exponent::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
            Exponent::Text(s) => Err(Error::InvalidNorm(format!("bad exponent {s:?}"))),
        }
    }

    fn from_value(p: f64) -> Self {
        if p.is_infinite() {
            Exponent::Text("inf".into())
        } else {
            Exponent::Num(p)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawNorm {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<Exponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<f64>>>,
    dim: usize,
}

fn pair(v: &[f64], what: &str) -> Result<[f64; 2]> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::InvalidNorm(format!("{what} entries must have length 2"))),
    }
}

impl TryFrom<RawNorm> for NormSpec {
    type Error = Error;

    fn try_from(raw: RawNorm) -> Result<Self> {
        let missing = |f: &str| Error::InvalidNorm(format!("kind {:?} requires field {f:?}", raw.kind));
        match raw.kind.as_str() {
            "lp" => NormSpec::lp(raw.p.as_ref().ok_or_else(|| missing("p"))?.value()?, raw.dim),
            "weighted_lp" => {
                let p = raw.p.as_ref().ok_or_else(|| missing("p"))?.value()?;
                let w = raw.weights.clone().ok_or_else(|| missing("weights"))?;
                if w.len() != raw.dim {
                    return Err(Error::DimensionMismatch { expected: raw.dim, found: w.len() });
                }
                NormSpec::weighted_lp(p, w)
            }
            "polygon" => {
                let vs = raw.vertices.as_ref().ok_or_else(|| missing("vertices"))?;
                let vs = vs.iter().map(|v| pair(v, "vertex")).collect::<Result<Vec<_>>>()?;
                NormSpec::build(NormKind::Polygon { vertices: vs }, raw.dim)
            }
            "ellipse" => {
                let m = raw.matrix.as_ref().ok_or_else(|| missing("matrix"))?;
                if m.len() != 2 {
                    return Err(Error::InvalidNorm("ellipse matrix must be 2x2".into()));
                }
                let m = [pair(&m[0], "matrix row")?, pair(&m[1], "matrix row")?];
                NormSpec::build(NormKind::Ellipse { matrix: m }, raw.dim)
            }
            other => Err(Error::InvalidNorm(format!("unknown norm kind {other:?}"))),
        }
    }
}

impl From<NormSpec> for RawNorm {
    fn from(n: NormSpec) -> Self {
        let mut raw = RawNorm { kind: String::new(), p: None, weights: None, vertices: None, matrix: None, dim: n.dim };
        match n.kind {
            NormKind::Lp { p } => {
                raw.kind = "lp".into();
                raw.p = Some(Exponent::from_value(p));
            }
            NormKind::WeightedLp { p, weights } => {
                raw.kind = "weighted_lp".into();
                raw.p = Some(Exponent::from_value(p));
                raw.weights = Some(weights);
            }
            NormKind::Polygon { vertices } => {
                raw.kind = "polygon".into();
                raw.vertices = Some(vertices.iter().map(|v| v.to_vec()).collect());
            }
            NormKind::Ellipse { matrix } => {
                raw.kind = "ellipse".into();
                raw.matrix = Some(matrix.iter().map(|r| r.to_vec()).collect());
            }
        }
        raw
    }
}
