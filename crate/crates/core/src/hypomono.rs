//! Hypomonotonicity of the normal cone: the defect functional `Gamma`,
//! sampled `psi`-hypomonotonicity verdicts, the local section bound and the
//! constructive touching-point search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moduli::{ModulusCurve, SearchBudget};
use crate::norm::{golden_min, NormSpec};
use crate::psi::Psi;
use crate::sets::{cone_directions, ClosedSetSpec, SetKind, Verdict, MARGIN_SLACK};
use crate::vector::Vector;

/// Default relative width of the `||x1 - x2|| = eps` band.
pub const DEFAULT_BAND: f64 = 0.05;
const BISECT_ITERS: usize = 60;
const REFINE_TOP: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalPair {
    pub x1: Vector,
    pub p1: Vector,
    pub x2: Vector,
    pub p2: Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypoReport {
    pub verdict: Verdict,
    pub worst_pair: Option<NormalPair>,
    /// `min <p2 - p1, x2 - x1> + R psi(||x2 - x1|| / R)` over tested pairs.
    pub worst_margin: f64,
    /// Smallest and largest base-point distance among tested pairs.
    pub epsilon_band: (f64, f64),
    pub pairs_tested: usize,
}

/// Boundary points with their extreme unit normals; corners with a trivial
/// cone are dropped.
fn normal_points(a: &ClosedSetSpec, n: &NormSpec, count: usize, seed: u64) -> Result<Vec<(Vector, Vec<Vector>)>> {
    let mut pts = a.boundary_sample(n, count, seed)?;
    pts.sort_by(|u, v| u.coords().partial_cmp(v.coords()).expect("finite coordinates"));
    pts.dedup_by(|u, v| (&*u - &*v).max_abs() <= 1e-12);
    let mut out = Vec::with_capacity(pts.len());
    for x in pts {
        match cone_directions(a, n, &x) {
            Ok(dirs) if !dirs.is_empty() => out.push((x, dirs)),
            Ok(_) | Err(Error::InteriorPoint) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Pairs `(x_i, p_i)` from `pts` whose base points are at distance in
/// `[lo, hi]`, scored by `score`; returns the pair with the least score.
fn worst_pair(
    n: &NormSpec,
    pts: &[(Vector, Vec<Vector>)],
    lo: f64,
    hi: f64,
    score: impl Fn(f64, f64) -> f64 + Sync,
) -> Option<(f64, NormalPair, (f64, f64), usize)> {
    let per_point: Vec<_> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(f64, NormalPair)> = None;
            let mut band = (f64::INFINITY, 0.0f64);
            let mut count = 0usize;
            let (x1, c1) = &pts[i];
            for (x2, c2) in &pts[i + 1..] {
                let dx = x2 - x1;
                let d = n.eval(dx.coords());
                if d <= 0.0 || d < lo || d > hi {
                    continue;
                }
                band = (band.0.min(d), band.1.max(d));
                for p1 in c1 {
                    for p2 in c2 {
                        count += 1;
                        let m = score((p2 - p1).dot(&dx), d);
                        if best.as_ref().map_or(true, |b| m < b.0) {
                            best = Some((m, NormalPair { x1: x1.clone(), p1: p1.clone(), x2: x2.clone(), p2: p2.clone() }));
                        }
                    }
                }
            }
            (best, band, count)
        })
        .collect();
    let mut best: Option<(f64, NormalPair)> = None;
    let mut band = (f64::INFINITY, 0.0f64);
    let mut count = 0;
    for (b, bd, c) in per_point {
        count += c;
        band = (band.0.min(bd.0), band.1.max(bd.1));
        if let Some(b) = b {
            if best.as_ref().map_or(true, |w| b.0 < w.0) {
                best = Some(b);
            }
        }
    }
    best.map(|(m, p)| (m, p, band, count))
}

/// Sampled test of `<p2 - p1, x2 - x1> >= -R psi(||x2 - x1|| / R)` over
/// boundary pairs with `||x1 - x2|| <= eps_max` and extreme unit normals.
pub fn hypo_check<P: Psi + Sync + ?Sized>(
    a: &ClosedSetSpec,
    n: &NormSpec,
    psi: &P,
    r: f64,
    eps_max: f64,
    pair_budget: usize,
    seed: u64,
) -> Result<HypoReport> {
    if !(r > 0.0 && eps_max > 0.0) {
        return Err(Error::OutOfDomain { what: "R and eps_max must be positive", value: r.min(eps_max) });
    }
    let pts = normal_points(a, n, pair_budget, seed)?;
    let (m, pair, band, count) =
        worst_pair(n, &pts, 0.0, eps_max, |pairing, d| pairing + r * psi.eval(d / r)).ok_or(Error::NoFeasiblePairs)?;
    let verdict = Verdict::from_bool(m >= -MARGIN_SLACK);
    Ok(HypoReport { verdict, worst_pair: Some(pair), worst_margin: m, epsilon_band: band, pairs_tested: count })
}

/// Lower estimate of `Gamma(A, eps) = sup <p1 - p2, x2 - x1>` over normal
/// pairs at distance `eps`. Planar ball complements are traversed along the
/// boundary with the distance pinned by bisection; other sets use boundary
/// samples within the relative `band` around `eps`.
pub fn gamma_estimate(a: &ClosedSetSpec, n: &NormSpec, eps: f64, band: f64, budget: &SearchBudget) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::OutOfDomain { what: "eps must be positive", value: eps });
    }
    if !(band > 0.0 && band <= 0.2) {
        return Err(Error::OutOfDomain { what: "band must lie in (0, 0.2]", value: band });
    }
    if let SetKind::BallComplement { center, radius } = a.kind() {
        if n.dim() == 2 {
            return gamma_on_circle(a, n, center, *radius, eps, budget);
        }
    }
    let pts = normal_points(a, n, budget.angles.min(1500), 0x9a77a)?;
    let (m, ..) = worst_pair(n, &pts, eps * (1.0 - band), eps * (1.0 + band), |pairing, _| pairing)
        .ok_or(Error::NoFeasiblePairs)?;
    Ok(-m)
}

fn gamma_on_circle(a: &ClosedSetSpec, n: &NormSpec, center: &Vector, radius: f64, eps: f64, budget: &SearchBudget) -> Result<f64> {
    let target = eps / radius;
    if target > 2.0 {
        return Err(Error::NoFeasiblePairs);
    }
    let point = |t: f64| center.axpy(radius, &n.sphere_point(t));
    // value at a base angle: partner found by bisection on the arc length
    let value = |t: f64| -> Result<f64> {
        let s = n.sphere_point(t);
        let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if n.eval((&n.sphere_point(t + mid) - &s).coords()) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (x1, x2) = (point(t), point(t + 0.5 * (lo + hi)));
        let c1 = cone_directions(a, n, &x1)?;
        let c2 = cone_directions(a, n, &x2)?;
        let dx = &x2 - &x1;
        let mut best = f64::NEG_INFINITY;
        for p1 in &c1 {
            for p2 in &c2 {
                best = best.max((p1 - p2).dot(&dx));
            }
        }
        Ok(best)
    };
    let k = budget.angles;
    let step = std::f64::consts::TAU / k as f64;
    let grid = (0..k).into_par_iter().map(|i| value(i as f64 * step)).collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..k).filter(|&i| grid[i].is_finite()).collect();
    if order.is_empty() {
        return Err(Error::NoFeasiblePairs);
    }
    order.sort_by(|&i, &j| grid[j].total_cmp(&grid[i]));
    let mut best = grid[order[0]];
    for &i in order.iter().take(REFINE_TOP) {
        let t0 = i as f64 * step;
        let (t, _) = golden_min(|t| -value(t).unwrap_or(f64::NEG_INFINITY), t0 - step, t0 + step, budget.iters.min(80));
        best = best.max(value(t)?);
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub eps: f64,
    pub gamma: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

/// `Gamma` on a sweep of `eps`, bracketed below by
/// `max(rho(eps/4), lambda+(eps/2))` and above by `2 lambda+(2 eps)`.
pub fn gamma_sweep(
    a: &ClosedSetSpec,
    n: &NormSpec,
    eps: &[f64],
    rho: &ModulusCurve,
    lambda_plus: &ModulusCurve,
    budget: &SearchBudget,
) -> Result<Vec<GammaRow>> {
    eps.iter()
        .map(|&e| {
            let gamma = gamma_estimate(a, n, e, DEFAULT_BAND, budget)?;
            let lower = rho.interp(e / 4.0)?.max(lambda_plus.interp(e / 2.0)?);
            let upper = 2.0 * lambda_plus.interp(2.0 * e)?;
            Ok(GammaRow { eps: e, gamma, lower_bound: lower, upper_bound: upper })
        })
        .collect()
}

pub fn write_gamma_csv<W: std::io::Write>(rows: &[GammaRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionReport {
    pub verdict: Verdict,
    /// `(2R/delta) rho(delta/R)` read on the upper side of the curve.
    pub epsilon: f64,
    /// Largest `<p, a - a0> / ||a - a0||` observed.
    pub worst_ratio: f64,
    pub witness: Option<Vector>,
    pub samples_used: usize,
}

/// Checks `<p, a - a0> <= eps ||a - a0||` with `eps = (2R/delta) rho(delta/R)`
/// for sampled `a` in `A` within `delta` of `a0` (interior points and
/// nearest points of nearby non-members) and every extreme normal `p` at `a0`.
#[allow(clippy::too_many_arguments)]
pub fn section_bound_check(
    a: &ClosedSetSpec,
    n: &NormSpec,
    r: f64,
    rho: &ModulusCurve,
    a0: &Vector,
    delta: f64,
    sample_count: usize,
    seed: u64,
) -> Result<SectionReport> {
    if !(r > 0.0 && delta > 0.0) {
        return Err(Error::OutOfDomain { what: "R and delta must be positive", value: r.min(delta) });
    }
    let tau = delta / r;
    let epsilon = 2.0 / tau * rho.safe_upper(tau, 1e-6, tau);
    let dirs = cone_directions(a, n, a0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(sample_count);
    if let SetKind::FinitePoints { points } = a.kind() {
        pts.extend(points.iter().filter(|q| {
            let d = n.eval((*q - a0).coords());
            d > 0.0 && d <= delta
        }).cloned());
    }
    for _ in 0..sample_count * 1000 {
        if pts.len() >= sample_count {
            break;
        }
        let off = Vector::from((0..n.dim()).map(|_| rng.gen_range(-delta..delta)).collect::<Vec<_>>());
        let x = a0 + &off;
        let cand = if a.contains(n, &x, 0.0)? { x } else { a.project(n, &x, 1e-12)?.swap_remove(0) };
        let d = n.eval((&cand - a0).coords());
        if d > 1e-12 && d <= delta {
            pts.push(cand);
        }
    }
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut witness = None;
    for q in &pts {
        let dq = q - a0;
        let len = n.eval(dq.coords());
        for p in &dirs {
            let ratio = p.dot(&dq) / len;
            if ratio > worst_ratio {
                worst_ratio = ratio;
                witness = Some(q.clone());
            }
        }
    }
    if pts.is_empty() || dirs.is_empty() {
        worst_ratio = 0.0;
    }
    let verdict = Verdict::from_bool(worst_ratio <= epsilon + MARGIN_SLACK);
    Ok(SectionReport {
        verdict,
        epsilon,
        worst_ratio,
        witness: if verdict.passed() { None } else { witness },
        samples_used: pts.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TouchingPoint {
    pub lambda: f64,
    pub y: Vector,
    pub p: Vector,
    /// Radius of the probing ball.
    pub radius: f64,
}

/// Walks from `z0` toward `z1` until a ball of radius
/// `dd = min(eps ||z1 - z0||, d(z0, A)) / 2` around the current point meets
/// `A`, then returns the nearest point `y` and a normal `p` at `y`. Both
/// `||z_lambda - y|| < eps ||z1 - z0||` and `<p, z1 - z0> < eps ||z1 - z0||`
/// are verified before returning.
pub fn touching_point_search(a: &ClosedSetSpec, n: &NormSpec, z0: &Vector, z1: &Vector, eps: f64) -> Result<TouchingPoint> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::OutOfDomain { what: "eps must lie in (0, 1)", value: eps });
    }
    let d0 = a.distance(n, z0)?;
    if d0 <= 0.0 {
        return Err(Error::InvalidSet("z0 must lie outside A".into()));
    }
    if a.distance(n, z1)? > 1e-9 {
        return Err(Error::InvalidSet("z1 must lie in A".into()));
    }
    let dz = z1 - z0;
    let len = n.eval(dz.coords());
    let dd = 0.5 * (eps * len).min(d0);
    let at = |t: f64| z0.axpy(t, &dz);
    let hit = |t: f64| a.distance(n, &at(t)).map(|d| d <= dd);
    // first grid cell containing a hit, then bisection inside it
    const SCAN: usize = 1024;
    let mut hi = 1.0;
    for k in 1..=SCAN {
        let t = k as f64 / SCAN as f64;
        if hit(t)? {
            hi = t;
            break;
        }
    }
    let mut lo = hi - 1.0 / SCAN as f64;
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if hit(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda = hi;
    let y0 = at(lambda);
    let y = a.project(n, &y0, 1e-12)?.swap_remove(0);
    let gap = &y0 - &y;
    if gap.is_zero() {
        return Err(Error::ConstructionFailed("touch point already lies in A".into()));
    }
    let p = n
        .j1_set(&gap)?
        .into_iter()
        .min_by(|u, v| u.dot(&dz).total_cmp(&v.dot(&dz)))
        .expect("duality set is nonempty");
    let first = n.eval(gap.coords()) < eps * len;
    let second = p.dot(&dz) < eps * len;
    if !(first && second) {
        return Err(Error::ConstructionFailed(format!(
            "distance {} and pairing {} against {}",
            n.eval(gap.coords()),
            p.dot(&dz),
            eps * len
        )));
    }
    Ok(TouchingPoint { lambda, y, p, radius: dd })
}
