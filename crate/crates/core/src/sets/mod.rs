//! Closed sets in a normed space: distance, metric projection, shells and
//! boundary sampling.

pub mod checks;
pub mod cones;
pub mod john;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm::NormSpec;
use crate::vector::Vector;

pub use checks::*;
pub use cones::*;
pub use john::*;

/// Angles used when a planar projection has to be found by scanning a sphere.
const SPHERE_SCAN: usize = 4096;
/// Most projection representatives returned for a degenerate point.
const MAX_REPRESENTATIVES: usize = 64;

/// `{ x : <normal, x> <= offset }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vector,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetKind {
    /// `{ x : ||x - center|| >= radius }`.
    BallComplement { center: Vector, radius: f64 },
    /// `{ x : ||x - center|| <= radius }`.
    Ball { center: Vector, radius: f64 },
    Halfspace(Halfspace),
    /// Closure of the complement of the polytope cut out by the halfspaces.
    ConvexPolytopeComplement { halfspaces: Vec<Halfspace> },
    FinitePoints { points: Vec<Vector> },
    /// `{ x : x restricted to coords lies in base }`.
    CylinderExtension { base: Box<ClosedSetSpec>, coords: Vec<usize>, full_dim: usize },
    WholeSpace { dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SetRepr {
    #[serde(flatten)]
    kind: SetKind,
    bounding_radius: f64,
}

/// A closed set together with a radius enclosing everything of interest
/// (sampling boxes are `[-bounding_radius, bounding_radius]^d`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetRepr", into = "SetRepr")]
pub struct ClosedSetSpec {
    kind: SetKind,
    bounding_radius: f64,
}

impl TryFrom<SetRepr> for ClosedSetSpec {
    type Error = Error;

    fn try_from(r: SetRepr) -> Result<Self> {
        ClosedSetSpec::new(r.kind, r.bounding_radius)
    }
}

impl From<ClosedSetSpec> for SetRepr {
    fn from(s: ClosedSetSpec) -> Self {
        SetRepr { kind: s.kind, bounding_radius: s.bounding_radius }
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSet(format!("{what} must be positive, got {v}")))
    }
}

impl ClosedSetSpec {
    pub fn new(kind: SetKind, bounding_radius: f64) -> Result<Self> {
        positive("bounding radius", bounding_radius)?;
        match &kind {
            SetKind::BallComplement { radius, .. } | SetKind::Ball { radius, .. } => positive("radius", *radius)?,
            SetKind::Halfspace(h) => {
                if h.normal.is_zero() {
                    return Err(Error::InvalidSet("halfspace normal is zero".into()));
                }
            }
            SetKind::ConvexPolytopeComplement { halfspaces } => {
                let Some(first) = halfspaces.first() else {
                    return Err(Error::InvalidSet("polytope needs at least one halfspace".into()));
                };
                for h in halfspaces {
                    h.normal.check_dim(first.normal.dim())?;
                    if h.normal.is_zero() {
                        return Err(Error::InvalidSet("halfspace normal is zero".into()));
                    }
                }
            }
            SetKind::FinitePoints { points } => {
                let Some(first) = points.first() else {
                    return Err(Error::InvalidSet("finite point set is empty".into()));
                };
                for p in points {
                    p.check_dim(first.dim())?;
                }
            }
            SetKind::CylinderExtension { base, coords, full_dim } => check_index_set(base, coords, *full_dim)?,
            SetKind::WholeSpace { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidSet("dimension must be positive".into()));
                }
            }
        }
        Ok(Self { kind, bounding_radius })
    }

    pub fn ball_complement(center: Vector, radius: f64, bounding_radius: f64) -> Result<Self> {
        Self::new(SetKind::BallComplement { center, radius }, bounding_radius)
    }

    pub fn ball(center: Vector, radius: f64, bounding_radius: f64) -> Result<Self> {
        Self::new(SetKind::Ball { center, radius }, bounding_radius)
    }

    pub fn halfspace(normal: Vector, offset: f64, bounding_radius: f64) -> Result<Self> {
        Self::new(SetKind::Halfspace(Halfspace { normal, offset }), bounding_radius)
    }

    pub fn polytope_complement(halfspaces: Vec<Halfspace>, bounding_radius: f64) -> Result<Self> {
        Self::new(SetKind::ConvexPolytopeComplement { halfspaces }, bounding_radius)
    }

    pub fn finite_points(points: Vec<Vector>, bounding_radius: f64) -> Result<Self> {
        Self::new(SetKind::FinitePoints { points }, bounding_radius)
    }

    pub fn whole_space(dim: usize, bounding_radius: f64) -> Result<Self> {
        Self::new(SetKind::WholeSpace { dim }, bounding_radius)
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SetKind::BallComplement { center, .. } | SetKind::Ball { center, .. } => center.dim(),
            SetKind::Halfspace(h) => h.normal.dim(),
            SetKind::ConvexPolytopeComplement { halfspaces } => halfspaces[0].normal.dim(),
            SetKind::FinitePoints { points } => points[0].dim(),
            SetKind::CylinderExtension { full_dim, .. } => *full_dim,
            SetKind::WholeSpace { dim } => *dim,
        }
    }

    fn check(&self, n: &NormSpec, x: &Vector) -> Result<()> {
        if n.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: n.dim() });
        }
        x.check_dim(self.dim())
    }

    /// `inf { ||x - a|| : a in A }`.
    pub fn distance(&self, n: &NormSpec, x: &Vector) -> Result<f64> {
        self.check(n, x)?;
        self.distance_unchecked(n, x)
    }

    fn distance_unchecked(&self, n: &NormSpec, x: &Vector) -> Result<f64> {
        Ok(match &self.kind {
            SetKind::BallComplement { center, radius } => (radius - n.eval((x - center).coords())).max(0.0),
            SetKind::Ball { center, radius } => (n.eval((x - center).coords()) - radius).max(0.0),
            SetKind::Halfspace(h) => (h.normal.dot(x) - h.offset).max(0.0) / n.eval_dual(h.normal.coords()),
            SetKind::ConvexPolytopeComplement { halfspaces } => halfspaces
                .iter()
                .map(|h| (h.offset - h.normal.dot(x)) / n.eval_dual(h.normal.coords()))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            SetKind::FinitePoints { points } => {
                points.iter().map(|p| n.eval((x - p).coords())).fold(f64::INFINITY, f64::min)
            }
            SetKind::CylinderExtension { base, coords, .. } => {
                let sub = n.restrict(coords)?;
                base.distance_unchecked(&sub, &restrict_vec(x, coords))?
            }
            SetKind::WholeSpace { .. } => 0.0,
        })
    }

    pub fn contains(&self, n: &NormSpec, x: &Vector, tol: f64) -> Result<bool> {
        Ok(self.distance(n, x)? <= tol)
    }

    /// Whether `x` lies in `A` but not on its boundary (up to `tol`).
    pub fn is_interior(&self, n: &NormSpec, x: &Vector, tol: f64) -> Result<bool> {
        self.check(n, x)?;
        Ok(match &self.kind {
            SetKind::BallComplement { center, radius } => n.eval((x - center).coords()) > radius + tol,
            SetKind::Ball { center, radius } => n.eval((x - center).coords()) < radius - tol,
            SetKind::Halfspace(h) => h.normal.dot(x) - h.offset < -tol * n.eval_dual(h.normal.coords()),
            SetKind::ConvexPolytopeComplement { halfspaces } => halfspaces
                .iter()
                .any(|h| h.normal.dot(x) - h.offset > tol * n.eval_dual(h.normal.coords())),
            SetKind::FinitePoints { .. } => false,
            SetKind::CylinderExtension { base, coords, .. } => {
                base.is_interior(&n.restrict(coords)?, &restrict_vec(x, coords), tol)?
            }
            SetKind::WholeSpace { .. } => true,
        })
    }

    /// Nearest points of `A` to `x`. Several clustered representatives are
    /// returned when the nearest point is not unique.
    pub fn project(&self, n: &NormSpec, x: &Vector, tol: f64) -> Result<Vec<Vector>> {
        self.check(n, x)?;
        let d = self.distance_unchecked(n, x)?;
        if d <= tol {
            return Ok(vec![x.clone()]);
        }
        let mut cands = self.projection_candidates(n, x, d, tol)?;
        if n.dim() == 2 && (!n.is_strictly_convex() || cands.is_empty()) {
            for k in 0..SPHERE_SCAN {
                let s = n.sphere_point(std::f64::consts::TAU * k as f64 / SPHERE_SCAN as f64);
                let a = x.axpy(d, &s);
                if self.distance_unchecked(n, &a)? <= tol * (1.0 + d) {
                    cands.push(a);
                }
            }
        }
        if cands.is_empty() {
            return Err(Error::ConstructionFailed("no nearest point found".into()));
        }
        Ok(cluster(n, cands, 10.0 * tol))
    }

    /// Exact nearest points (all of them for strictly convex norms, up to
    /// degenerate cases handled separately).
    fn projection_candidates(&self, n: &NormSpec, x: &Vector, d: f64, tol: f64) -> Result<Vec<Vector>> {
        let dim = n.dim();
        Ok(match &self.kind {
            SetKind::BallComplement { center, radius } => {
                let v = x - center;
                let nv = n.eval(v.coords());
                if nv <= tol * radius {
                    if dim == 2 {
                        Vec::new()
                    } else {
                        (0..dim)
                            .flat_map(|i| {
                                let e = n.normalize(&Vector::basis(dim, i)).expect("basis vector");
                                [center.axpy(*radius, &e), center.axpy(-radius, &e)]
                            })
                            .collect()
                    }
                } else {
                    vec![x.axpy(d / nv, &v)]
                }
            }
            SetKind::Ball { center, radius } => {
                let v = x - center;
                vec![center.axpy(radius / n.eval(v.coords()), &v)]
            }
            SetKind::Halfspace(h) => {
                n.dual_attainers(&h.normal)?.iter().map(|u| x.axpy(-d, u)).collect()
            }
            SetKind::ConvexPolytopeComplement { halfspaces } => {
                let mut out = Vec::new();
                for h in halfspaces {
                    let di = (h.offset - h.normal.dot(x)) / n.eval_dual(h.normal.coords());
                    if di <= d + tol {
                        out.extend(n.dual_attainers(&h.normal)?.iter().map(|u| x.axpy(di, u)));
                    }
                }
                out
            }
            SetKind::FinitePoints { points } => {
                points.iter().filter(|p| n.eval((x - *p).coords()) <= d + tol).cloned().collect()
            }
            SetKind::CylinderExtension { base, coords, .. } => {
                let sub = n.restrict(coords)?;
                base.project(&sub, &restrict_vec(x, coords), tol)?
                    .iter()
                    .map(|b| {
                        let mut y = x.coords().to_vec();
                        for (k, &c) in coords.iter().enumerate() {
                            y[c] = b[k];
                        }
                        Vector::from(y)
                    })
                    .collect()
            }
            SetKind::WholeSpace { .. } => vec![x.clone()],
        })
    }

    /// Points with `0 < d(x, A) < R`, drawn uniformly from the bounding box.
    pub fn u_shell_sample(&self, n: &NormSpec, r: f64, count: usize, seed: u64) -> Result<Vec<Vector>> {
        positive("R", r)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let b = self.bounding_radius;
        for _ in 0..count.max(1) * 10_000 {
            if out.len() >= count {
                break;
            }
            let x = Vector::from((0..self.dim()).map(|_| rng.gen_range(-b..b)).collect::<Vec<_>>());
            let d = self.distance(n, &x)?;
            if d > 0.0 && d < r {
                out.push(x);
            }
        }
        if out.len() < count {
            return Err(Error::EmptyShell);
        }
        Ok(out)
    }

    /// Boundary points obtained by projecting random points of the bounding
    /// box that lie outside `A` (every returned representative is kept).
    pub fn boundary_sample(&self, n: &NormSpec, count: usize, seed: u64) -> Result<Vec<Vector>> {
        let mut out = Vec::with_capacity(count);
        if let SetKind::FinitePoints { points } = &self.kind {
            out.extend(points.iter().cloned());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = self.bounding_radius;
        for _ in 0..count.max(1) * 1000 {
            if out.len() >= count {
                break;
            }
            let x = Vector::from((0..self.dim()).map(|_| rng.gen_range(-b..b)).collect::<Vec<_>>());
            if self.distance(n, &x)? > 1e-9 {
                let proj = self.project(n, &x, 1e-9)?;
                out.push(proj.into_iter().next().expect("nonempty projection"));
            }
        }
        if out.is_empty() {
            return Err(Error::NoFeasiblePairs);
        }
        out.truncate(count);
        Ok(out)
    }
}

fn check_index_set(base: &ClosedSetSpec, coords: &[usize], full_dim: usize) -> Result<()> {
    if coords.len() != base.dim() {
        return Err(Error::BadIndexSet(format!("{} coordinates for a {}-dimensional base", coords.len(), base.dim())));
    }
    if coords.len() > full_dim {
        return Err(Error::BadIndexSet("more coordinates than dimensions".into()));
    }
    for (i, c) in coords.iter().enumerate() {
        if *c >= full_dim || coords[..i].contains(c) {
            return Err(Error::BadIndexSet(format!("{coords:?} is not a set of distinct indices below {full_dim}")));
        }
    }
    Ok(())
}

/// `{ x in R^full_dim : x restricted to coords lies in base }`.
pub fn cylinder_extend(base: ClosedSetSpec, full_dim: usize, coords: Vec<usize>) -> Result<ClosedSetSpec> {
    let r = base.bounding_radius;
    ClosedSetSpec::new(SetKind::CylinderExtension { base: Box::new(base), coords, full_dim }, r)
}

pub fn restrict_vec(x: &Vector, coords: &[usize]) -> Vector {
    Vector::from(coords.iter().map(|&c| x[c]).collect::<Vec<_>>())
}

/// Greedy clustering: keeps a point when it is farther than `radius` from
/// every kept point; at most `MAX_REPRESENTATIVES` evenly spread survivors.
fn cluster(n: &NormSpec, pts: Vec<Vector>, radius: f64) -> Vec<Vector> {
    let mut reps: Vec<Vector> = Vec::new();
    for p in pts {
        if reps.iter().all(|q| n.eval((&p - q).coords()) > radius) {
            reps.push(p);
        }
    }
    if reps.len() > MAX_REPRESENTATIVES {
        let step = reps.len() as f64 / MAX_REPRESENTATIVES as f64;
        reps = (0..MAX_REPRESENTATIVES).map(|k| reps[(k as f64 * step) as usize].clone()).collect();
    }
    reps
}

/// Largest pairwise distance of a point list.
pub fn diameter(n: &NormSpec, pts: &[Vector]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max(n.eval((a - b).coords()));
        }
    }
    d
}

pub fn distance(a: &ClosedSetSpec, n: &NormSpec, x: &Vector) -> Result<f64> {
    a.distance(n, x)
}

pub fn project(a: &ClosedSetSpec, n: &NormSpec, x: &Vector, tol: f64) -> Result<Vec<Vector>> {
    a.project(n, x, tol)
}

pub fn u_shell_sample(a: &ClosedSetSpec, n: &NormSpec, r: f64, count: usize, seed: u64) -> Result<Vec<Vector>> {
    a.u_shell_sample(n, r, count, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn disc_complement() -> ClosedSetSpec {
        ClosedSetSpec::ball_complement(Vector::zeros(2), 1.0, 2.0).unwrap()
    }

    fn two_points() -> ClosedSetSpec {
        ClosedSetSpec::finite_points(vec![Vector::xy(-1.0, 0.0), Vector::xy(1.0, 0.0)], 3.0).unwrap()
    }

    fn lower_half_plane() -> ClosedSetSpec {
        ClosedSetSpec::halfspace(Vector::xy(0.0, 1.0), 0.0, 3.0).unwrap()
    }

    #[test]
    fn distance_examples() {
        let e = NormSpec::euclid(2);
        assert_abs_diff_eq!(disc_complement().distance(&e, &Vector::xy(0.5, 0.0)).unwrap(), 0.5);
        assert_abs_diff_eq!(two_points().distance(&e, &Vector::zeros(2)).unwrap(), 1.0);
        let l1 = NormSpec::lp(1.0, 2).unwrap();
        assert_abs_diff_eq!(lower_half_plane().distance(&l1, &Vector::xy(0.0, 2.0)).unwrap(), 2.0);
        // oracle: minimise |t| + 2 over boundary points (t, 0)
        let brute = (-400..=400).map(|k| (k as f64 / 100.0).abs() + 2.0).fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(brute, 2.0);
        assert!(disc_complement().distance(&NormSpec::euclid(3), &Vector::zeros(3)).is_err());
    }

    #[test]
    fn projection_examples() {
        let e = NormSpec::euclid(2);
        let p = disc_complement().project(&e, &Vector::xy(0.5, 0.0), 1e-9).unwrap();
        assert_eq!(p.len(), 1);
        assert_abs_diff_eq!(p[0][0], 1.0, epsilon = 1e-12);
        let p = two_points().project(&e, &Vector::xy(0.0, 0.3), 1e-9).unwrap();
        assert_eq!(p, vec![Vector::xy(-1.0, 0.0), Vector::xy(1.0, 0.0)]);
        let p = disc_complement().project(&e, &Vector::zeros(2), 1e-9).unwrap();
        assert!(p.len() >= 8);
        for a in &p {
            assert_abs_diff_eq!(a.euclid(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn projection_is_consistent_with_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let norms = [NormSpec::euclid(2), NormSpec::lp(1.0, 2).unwrap(), NormSpec::lp(f64::INFINITY, 2).unwrap()];
        let sets = [disc_complement(), two_points(), lower_half_plane()];
        for n in &norms {
            for s in &sets {
                for _ in 0..30 {
                    let x = Vector::xy(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                    let d = s.distance(n, &x).unwrap();
                    for a in s.project(n, &x, 1e-9).unwrap() {
                        assert!(s.contains(n, &a, 1e-9).unwrap());
                        assert_abs_diff_eq!(n.eval((&x - &a).coords()), d, epsilon = 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn linf_halfspace_projection_is_a_segment() {
        let linf = NormSpec::lp(f64::INFINITY, 2).unwrap();
        let p = lower_half_plane().project(&linf, &Vector::xy(0.0, 1.0), 1e-9).unwrap();
        assert!(diameter(&linf, &p) > 1.9);
    }

    #[test]
    fn shell_examples() {
        let e = NormSpec::euclid(2);
        for x in disc_complement().u_shell_sample(&e, 0.9, 200, 5).unwrap() {
            let r = x.euclid();
            assert!(r > 0.1 && r < 1.0);
        }
        for x in two_points().u_shell_sample(&e, 0.5, 100, 5).unwrap() {
            let d = (x[0].abs() - 1.0).hypot(x[1]);
            assert!(d > 0.0 && d < 0.5);
        }
        let all = ClosedSetSpec::whole_space(2, 1.0).unwrap();
        assert!(matches!(all.u_shell_sample(&e, 1.0, 3, 0), Err(Error::EmptyShell)));
        let a = disc_complement().u_shell_sample(&e, 0.9, 20, 9).unwrap();
        let b = disc_complement().u_shell_sample(&e, 0.9, 20, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cylinder_examples() {
        let c = cylinder_extend(disc_complement(), 3, vec![0, 1]).unwrap();
        let e = NormSpec::euclid(3);
        assert!(c.contains(&e, &Vector::from([0.6, 0.8, 9.0]), 1e-12).unwrap());
        assert!(!c.contains(&e, &Vector::from([0.6, 0.7, 0.0]), 1e-12).unwrap());
        assert_abs_diff_eq!(c.distance(&e, &Vector::from([0.0, 0.0, 7.0])).unwrap(), 1.0);
        assert!(matches!(cylinder_extend(disc_complement(), 3, vec![0, 0]), Err(Error::BadIndexSet(_))));
        assert!(matches!(cylinder_extend(disc_complement(), 3, vec![0, 3]), Err(Error::BadIndexSet(_))));
        assert!(matches!(cylinder_extend(disc_complement(), 3, vec![0]), Err(Error::BadIndexSet(_))));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"kind":"ball_complement","center":[0.0,0.0],"radius":1.0,"bounding_radius":2.0}"#;
        let s: ClosedSetSpec = serde_json::from_str(text).unwrap();
        assert_eq!(s, disc_complement());
        assert_eq!(serde_json::to_string(&s).unwrap(), text);
        let c = cylinder_extend(two_points(), 3, vec![0, 2]).unwrap();
        let back: ClosedSetSpec = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<ClosedSetSpec>(r#"{"kind":"ball","center":[0],"radius":-1,"bounding_radius":1}"#).is_err());
    }
}
