//! Sampled certificates for proximal smoothness and the outward-ball
//! supporting conditions, plus a few pointwise inequalities of the unit ball.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{diameter, ClosedSetSpec};
use crate::error::{Error, Result};
use crate::moduli::ModulusCurve;
use crate::norm::{birkhoff_orthogonal, NormSpec};
use crate::sets::cones::cone_directions;
use crate::vector::Vector;

pub const MARGIN_SLACK: f64 = 1e-6;
const PROJ_TOL: f64 = 1e-9;
const GRAD_AGREEMENT: f64 = 5e-3;
const RIDGE_STEPS: usize = 40;
const SEGMENT_CHECKS: usize = 16;
/// Projection jump (in norm) that marks a discontinuity after bisection.
const JUMP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub worst_margin: f64,
    pub witness: Option<Vector>,
    pub samples_used: usize,
    /// Which sub-test produced the witness, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_test: Option<String>,
}

impl CheckReport {
    fn from_margin(worst: f64, witness: Option<Vector>, samples: usize, test: &str) -> Self {
        let verdict = Verdict::from_bool(worst >= -MARGIN_SLACK);
        CheckReport {
            verdict,
            worst_margin: worst,
            witness: if verdict.passed() { None } else { witness },
            samples_used: samples,
            failed_test: (!verdict.passed()).then(|| test.to_string()),
        }
    }
}

fn first_projection(a: &ClosedSetSpec, n: &NormSpec, x: &Vector) -> Result<Vector> {
    Ok(a.project(n, x, PROJ_TOL)?.swap_remove(0))
}

fn fd_gradient(a: &ClosedSetSpec, n: &NormSpec, x: &Vector, h: f64) -> Result<Vector> {
    let g = (0..n.dim())
        .map(|i| {
            let e = Vector::basis(n.dim(), i);
            Ok((a.distance(n, &x.axpy(h, &e))? - a.distance(n, &x.axpy(-h, &e))?) / (2.0 * h))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Vector::from(g))
}

/// Bisects the segment `[u, v]` toward a jump of the nearest-point map.
/// Returns the midpoint of the final interval if a jump survives.
fn ridge_between(a: &ClosedSetSpec, n: &NormSpec, u: &Vector, v: &Vector) -> Result<Option<Vector>> {
    let (mut lo, mut hi) = (u.clone(), v.clone());
    let (mut plo, mut phi) = (first_projection(a, n, &lo)?, first_projection(a, n, &hi)?);
    for _ in 0..RIDGE_STEPS {
        let mid = lo.axpy(0.5, &(&hi - &lo));
        let pm = first_projection(a, n, &mid)?;
        if n.eval((&pm - &plo).coords()) >= n.eval((&phi - &pm).coords()) {
            hi = mid;
            phi = pm;
        } else {
            lo = mid;
            plo = pm;
        }
    }
    if n.eval((&phi - &plo).coords()) <= JUMP {
        return Ok(None);
    }
    let w = lo.axpy(0.5, &(&hi - &lo));
    let dw = a.distance(n, &w)?;
    // confirmed only if both one-sided limits are nearest points of w
    let both = [&plo, &phi].iter().all(|p| (n.eval((&w - *p).coords()) - dw).abs() <= 1e-9 * (1.0 + dw));
    Ok(both.then_some(w))
}

fn in_shell(a: &ClosedSetSpec, n: &NormSpec, x: &Vector, r: f64) -> Result<bool> {
    let d = a.distance(n, x)?;
    Ok(d > 0.0 && d < r)
}

/// Sampled certificate that the distance function is `C^1` on the shell
/// `0 < d(x, A) < R`: (a) unique nearest points, (b) agreement of
/// finite-difference gradients at two step sizes, (c) no jump of the
/// nearest-point map along short segments inside the shell.
pub fn prox_smooth_certificate(a: &ClosedSetSpec, n: &NormSpec, r: f64, samples: usize, seed: u64) -> Result<CheckReport> {
    let shell = a.u_shell_sample(n, r, samples, seed)?;
    for u in &shell {
        let proj = a.project(n, u, PROJ_TOL)?;
        if diameter(n, &proj) > 10.0 * PROJ_TOL {
            return Ok(CheckReport::from_margin(-diameter(n, &proj), Some(u.clone()), shell.len(), "projection_uniqueness"));
        }
        let scale = (10.0 * a.distance(n, u)?).min(1.0);
        let g1 = fd_gradient(a, n, u, 1e-4 * scale)?;
        let g2 = fd_gradient(a, n, u, 1e-5 * scale)?;
        let gap = (&g1 - &g2).euclid();
        if gap > GRAD_AGREEMENT * g1.euclid().max(g2.euclid()) {
            return Ok(CheckReport::from_margin(-gap, Some(u.clone()), shell.len(), "gradient_consistency"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51d6e);
    let step = 0.1 * r;
    for u in &shell {
        let dir = Vector::from((0..n.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        if dir.is_zero() {
            continue;
        }
        let v = u.axpy(step / n.eval(dir.coords()), &dir);
        let mut inside = true;
        for k in 0..=SEGMENT_CHECKS {
            let t = k as f64 / SEGMENT_CHECKS as f64;
            if !in_shell(a, n, &u.axpy(t, &(&v - u)), r)? {
                inside = false;
                break;
            }
        }
        if !inside {
            continue;
        }
        if let Some(w) = ridge_between(a, n, u, &v)? {
            let proj = a.project(n, &w, 1e-8)?;
            let spread = diameter(n, &proj).max(JUMP);
            return Ok(CheckReport::from_margin(-spread, Some(w), shell.len(), "projection_continuity"));
        }
    }
    Ok(CheckReport::from_margin(0.0, None, shell.len(), ""))
}

/// Outward-ball condition along projection rays:
/// `d(x + R (u - x)/||u - x||, A) >= R` for shell points `u` with a unique
/// nearest point `x`.
pub fn omega_p_check(a: &ClosedSetSpec, n: &NormSpec, r: f64, samples: usize, seed: u64) -> Result<CheckReport> {
    let shell = a.u_shell_sample(n, r, samples, seed)?;
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut used = 0;
    for u in &shell {
        let proj = a.project(n, u, PROJ_TOL)?;
        if diameter(n, &proj) > 10.0 * PROJ_TOL {
            continue;
        }
        used += 1;
        let x = &proj[0];
        let v = u - x;
        let w = x.axpy(r / n.eval(v.coords()), &v);
        let m = a.distance(n, &w)? - r;
        if m < worst {
            worst = m;
            witness = Some(u.clone());
        }
    }
    if used == 0 {
        worst = 0.0;
    }
    Ok(CheckReport::from_margin(worst, witness, used, "outward_ball_along_projection"))
}

/// Outward-ball condition along dual directions: `d(x + R u, A) >= R` for
/// boundary points `x`, unit normals `p` at `x`, and every extreme unit `u`
/// with `p ∈ J_1(u)`.
pub fn omega_n_check(a: &ClosedSetSpec, n: &NormSpec, r: f64, boundary_samples: usize, seed: u64) -> Result<CheckReport> {
    let pts = a.boundary_sample(n, boundary_samples, seed)?;
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut used = 0;
    for x in &pts {
        for p in cone_directions(a, n, x)? {
            for u in n.dual_attainers(&p)? {
                used += 1;
                let m = a.distance(n, &x.axpy(r, &u))? - r;
                if m < worst {
                    worst = m;
                    witness = Some(x.clone());
                }
            }
        }
    }
    if used == 0 {
        worst = 0.0;
    }
    Ok(CheckReport::from_margin(worst, witness, used, "outward_ball_along_dual_direction"))
}

/// For unit `x`, a point `z` on a supporting line at `x`, and `y` the point
/// where the line through `z` parallel to `x` meets the unit sphere
/// (nearest to `z` on the inner side): `2 ||z - x|| >= ||x - y||`.
pub fn chord_projection_check(n: &NormSpec, x: &Vector, z: &Vector, tol: f64) -> Result<bool> {
    let nx = n.norm(x)?;
    if (nx - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnitVectors(nx, f64::NAN));
    }
    z.check_dim(n.dim())?;
    let dz = z - x;
    if !dz.is_zero() && !birkhoff_orthogonal(n, &dz, x, 1e-9)? {
        return Err(Error::NotOnSupportingLine);
    }
    let g = |t: f64| n.eval(z.axpy(-t, x).coords());
    if g(0.0) < 1.0 - 1e-12 || g(1.0) > 1.0 + 1e-12 {
        return Err(Error::NoIntersection);
    }
    let t = if g(0.0) <= 1.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let y = z.axpy(-t, x);
    Ok(2.0 * n.eval(dz.coords()) >= n.eval((x - &y).coords()) - tol)
}

/// `<p0, z - x0> > 2 R delta(||z - x0|| / R)` for `||x0|| = R`, `||z|| < R`,
/// `p0 ∈ J_1(-x0)`, with `delta` read from the curve on its upper side.
pub fn deviation_check(n: &NormSpec, r: f64, x0: &Vector, z: &Vector, delta: &ModulusCurve) -> Result<bool> {
    let nx = n.norm(x0)?;
    if (nx - r).abs() > 1e-9 * r {
        return Err(Error::OutOfDomain { what: "x0 must lie on the sphere of radius R", value: nx });
    }
    if n.norm(z)? >= r {
        return Err(Error::OutOfDomain { what: "z must lie inside the ball", value: n.eval(z.coords()) });
    }
    let p0 = crate::norm::j1_map(n, &-x0, 1e-8)?;
    let lhs = p0.dot(&(z - x0));
    let rhs = 2.0 * r * delta.safe_upper(n.eval((z - x0).coords()) / r, 0.0, 1.0);
    Ok(lhs - rhs > -MARGIN_SLACK)
}

/// `||x + y|| <= ||x|| + <p, y> + 2 ||x|| rho(||y|| / ||x||) + margin` for
/// every extreme `p ∈ J_1(x)`; returns the smallest slack.
pub fn smoothness_estimate_margin(n: &NormSpec, x: &Vector, y: &Vector, rho: &ModulusCurve, margin: f64) -> Result<f64> {
    let nx = n.norm(x)?;
    let ny = n.norm(y)?;
    if ny > nx {
        return Err(Error::OutOfDomain { what: "need ||y|| <= ||x||", value: ny });
    }
    let lhs = n.eval((x + y).coords());
    let rho_v = rho.interp((ny / nx).max(rho.min_arg())).unwrap_or_else(|_| rho.safe_lower(ny / nx, 0.0));
    let mut worst = f64::INFINITY;
    for p in n.j1_set(x)? {
        worst = worst.min(nx + p.dot(y) + 2.0 * nx * rho_v + margin - lhs);
    }
    Ok(worst)
}

/// Projector onto `span{x, y}` that maps `ker p` onto `span{y}`, for unit
/// `x`, `p ∈ J_1(x)` and unit `y ∈ ker p`:
/// `P z = p(z) x + q(z - p(z) x) y` with `q ∈ J_1(y)`. Returns an estimate
/// of its operator norm from sphere samples; `3` bounds it by construction.
pub fn supporting_projector_norm(n: &NormSpec, x: &Vector, y: &Vector, samples: usize, seed: u64) -> Result<f64> {
    let (nx, ny) = (n.norm(x)?, n.norm(y)?);
    if (nx - 1.0).abs() > 1e-9 || (ny - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnitVectors(nx, ny));
    }
    let p = crate::norm::j1_map(n, x, 1e-8)?;
    if p.dot(y).abs() > 1e-8 {
        return Err(Error::NotQuasiorthogonal);
    }
    let q = crate::norm::j1_map(n, y, 1e-8)?;
    let apply = |z: &Vector| {
        let pz = p.dot(z);
        let qz = q.dot(&z.axpy(-pz, x));
        n.eval(x.scale(pz).axpy(qz, y).coords())
    };
    let mut best = 0.0f64;
    if n.dim() == 2 {
        for k in 0..samples {
            best = best.max(apply(&n.sphere_point(std::f64::consts::TAU * k as f64 / samples as f64)));
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let v = Vector::from((0..n.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
            if let Ok(u) = n.normalize(&v) {
                best = best.max(apply(&u));
            }
        }
    }
    Ok(best)
}

/// A unit vector of `ker J_1(x)` built from `v`.
pub fn kernel_unit(n: &NormSpec, x: &Vector, v: &Vector) -> Result<Vector> {
    let p = crate::norm::j1_map(n, x, 1e-8)?;
    n.normalize(&v.axpy(-p.dot(v), x))
}
