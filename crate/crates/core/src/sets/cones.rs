//! Normal cones `N(a0, A) = { p : <p, a - a0> <= eps ||a - a0|| near a0, for every eps > 0 }`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{restrict_vec, ClosedSetSpec, SetKind};
use crate::error::{Error, Result};
use crate::norm::{j1_map, NormSpec};
use crate::vector::Vector;

const BOUNDARY_TOL: f64 = 1e-9;
const CONE_SAMPLES: usize = 400;
/// Directions used where the cone is the whole dual space.
const FULL_CONE_DIRECTIONS: usize = 64;
/// Required shrink factor of the cone residual from `mesh` to `mesh / 10`.
const SHRINK: f64 = 0.3;
const FLAT: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalConeSample {
    pub base_point: Vector,
    /// Unit (dual norm) functionals; empty when the cone is `{0}`.
    pub directions: Vec<Vector>,
    /// Residual of the two-scale cone test, one per direction.
    pub quality: Vec<f64>,
}

/// Unit functionals spanning `N(a0, A)`, given in closed form.
///
/// At corners of a complement of a convex body the set is locally
/// non-convex with a reentrant angle, and only `p = 0` satisfies the cone
/// inequality; the result is then empty.
pub fn cone_directions(a: &ClosedSetSpec, n: &NormSpec, a0: &Vector) -> Result<Vec<Vector>> {
    if !a.contains(n, a0, BOUNDARY_TOL)? {
        return Err(Error::InvalidSet("base point is not in the set".into()));
    }
    if a.is_interior(n, a0, BOUNDARY_TOL)? {
        return Err(Error::InteriorPoint);
    }
    let dim = n.dim();
    Ok(match a.kind() {
        SetKind::BallComplement { center, .. } => {
            let set = n.j1_set(&(a0 - center))?;
            if set.len() == 1 {
                vec![-&set[0]]
            } else {
                Vec::new()
            }
        }
        SetKind::Ball { center, .. } => n.j1_set(&(a0 - center))?,
        SetKind::Halfspace(h) => vec![n.normalize_dual(&h.normal)?],
        SetKind::ConvexPolytopeComplement { halfspaces } => {
            let active: Vec<&super::Halfspace> = halfspaces
                .iter()
                .filter(|h| (h.normal.dot(a0) - h.offset).abs() <= BOUNDARY_TOL * n.eval_dual(h.normal.coords()))
                .collect();
            if active.len() == 1 {
                vec![-&n.normalize_dual(&active[0].normal)?]
            } else {
                Vec::new()
            }
        }
        SetKind::FinitePoints { .. } => full_dual_sphere(n, dim),
        SetKind::CylinderExtension { base, coords, .. } => {
            let sub = n.restrict(coords)?;
            cone_directions(base, &sub, &restrict_vec(a0, coords))?
                .iter()
                .map(|p| {
                    let mut q = vec![0.0; dim];
                    for (k, &c) in coords.iter().enumerate() {
                        q[c] = p[k];
                    }
                    Vector::from(q)
                })
                .collect()
        }
        SetKind::WholeSpace { .. } => return Err(Error::InteriorPoint),
    })
}

/// Evenly spread unit functionals (an angle grid in the plane, seeded random
/// directions otherwise).
fn full_dual_sphere(n: &NormSpec, dim: usize) -> Vec<Vector> {
    if dim == 2 {
        return (0..FULL_CONE_DIRECTIONS)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / FULL_CONE_DIRECTIONS as f64;
                n.normalize_dual(&Vector::xy(t.cos(), t.sin())).expect("nonzero")
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de ^ dim as u64);
    let mut out: Vec<Vector> = (0..dim)
        .flat_map(|i| [Vector::basis(dim, i), -&Vector::basis(dim, i)])
        .collect();
    while out.len() < FULL_CONE_DIRECTIONS {
        let v = Vector::from((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        if v.euclid() > 1e-3 {
            out.push(v);
        }
    }
    out.into_iter().map(|v| n.normalize_dual(&v).expect("nonzero")).collect()
}

/// Points of `A` near `a0`: members of `B_r(a0)` and projections of
/// non-members that land within `r`.
fn local_points(a: &ClosedSetSpec, n: &NormSpec, a0: &Vector, r: f64, seed: u64) -> Result<Vec<Vector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let dim = n.dim();
    let mut tries = 0;
    while out.len() < CONE_SAMPLES && tries < 50 * CONE_SAMPLES {
        tries += 1;
        let off = Vector::from((0..dim).map(|_| rng.gen_range(-r..r)).collect::<Vec<_>>());
        if n.eval(off.coords()) > r || off.is_zero() {
            continue;
        }
        let x = a0 + &off;
        let cand = if a.contains(n, &x, 0.0)? {
            x
        } else {
            a.project(n, &x, 1e-12)?.swap_remove(0)
        };
        let d = n.eval((&cand - a0).coords());
        if d > 0.0 && d <= r {
            out.push(cand);
        }
    }
    Ok(out)
}

fn residual(p: &Vector, a0: &Vector, pts: &[Vector], n: &NormSpec) -> f64 {
    pts.iter()
        .map(|a| {
            let v = a - a0;
            p.dot(&v) / n.eval(v.coords())
        })
        .fold(0.0f64, f64::max)
}

/// Two-scale reading of the cone inequality: the worst ratio
/// `<p, a - a0> / ||a - a0||` over sampled `a` within `mesh / 10` must be
/// negligible or at most `SHRINK` times the one within `mesh`. Returns the
/// small-scale residual when the test passes.
pub fn cone_test(a: &ClosedSetSpec, n: &NormSpec, a0: &Vector, p: &Vector, mesh: f64, seed: u64) -> Result<Option<f64>> {
    let big = local_points(a, n, a0, mesh, seed)?;
    let small = local_points(a, n, a0, mesh / 10.0, seed ^ 0x9e37)?;
    Ok(two_scale(residual(p, a0, &big, n), residual(p, a0, &small, n)))
}

fn two_scale(r_big: f64, r_small: f64) -> Option<f64> {
    (r_small <= FLAT || r_small <= SHRINK * r_big).then_some(r_small)
}

/// Keeps the candidate functionals that pass [`cone_test`].
pub fn filter_cone_candidates(
    a: &ClosedSetSpec,
    n: &NormSpec,
    a0: &Vector,
    mesh: f64,
    candidates: &[Vector],
) -> Result<Vec<(Vector, f64)>> {
    let big = local_points(a, n, a0, mesh, 1)?;
    let small = local_points(a, n, a0, mesh / 10.0, 2)?;
    Ok(candidates
        .iter()
        .filter_map(|p| {
            two_scale(residual(p, a0, &big, n), residual(p, a0, &small, n)).map(|r| (p.clone(), r))
        })
        .collect())
}

/// Closed-form cone directions at a boundary point, each with its
/// two-scale residual. Directions failing the sampled test are dropped.
pub fn normal_cone_sample(a: &ClosedSetSpec, n: &NormSpec, a0: &Vector, mesh: f64) -> Result<NormalConeSample> {
    let dirs = cone_directions(a, n, a0)?;
    let kept = filter_cone_candidates(a, n, a0, mesh, &dirs)?;
    let (directions, quality) = kept.into_iter().unzip();
    Ok(NormalConeSample { base_point: a0.clone(), directions, quality })
}

/// `J_1(x1 - x0) ⊂ N(x0, A)` for every nearest point `x0` of `x1`.
pub fn check_prop_j1_in_n(a: &ClosedSetSpec, n: &NormSpec, x1: &Vector) -> Result<bool> {
    if a.contains(n, x1, 0.0)? {
        return Err(Error::InvalidSet("point lies in the set".into()));
    }
    for x0 in a.project(n, x1, 1e-12)? {
        let v = x1 - &x0;
        let functionals = match j1_map(n, &v, 1e-8) {
            Ok(p) => vec![p],
            Err(Error::MultiValued) => n.j1_set(&v)?,
            Err(e) => return Err(e),
        };
        let mesh = 0.05 * n.eval(v.coords()).min(1.0);
        for p in &functionals {
            if cone_test(a, n, &x0, p, mesh, 7)?.is_none() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::cylinder_extend;
    use approx::assert_abs_diff_eq;

    fn disc_complement() -> ClosedSetSpec {
        ClosedSetSpec::ball_complement(Vector::zeros(2), 1.0, 2.0).unwrap()
    }

    fn half_plane() -> ClosedSetSpec {
        ClosedSetSpec::halfspace(Vector::xy(0.0, 1.0), 0.0, 3.0).unwrap()
    }

    #[test]
    fn cone_examples() {
        let e = NormSpec::euclid(2);
        let c = normal_cone_sample(&disc_complement(), &e, &Vector::xy(1.0, 0.0), 0.1).unwrap();
        assert_eq!(c.directions.len(), 1);
        assert_abs_diff_eq!(c.directions[0][0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.directions[0][1], 0.0, epsilon = 1e-12);

        let single = ClosedSetSpec::finite_points(vec![Vector::zeros(2)], 1.0).unwrap();
        let c = normal_cone_sample(&single, &e, &Vector::zeros(2), 0.1).unwrap();
        assert_eq!(c.directions.len(), FULL_CONE_DIRECTIONS);

        let c = normal_cone_sample(&half_plane(), &e, &Vector::zeros(2), 0.1).unwrap();
        assert_eq!(c.directions, vec![Vector::xy(0.0, 1.0)]);

        assert!(matches!(
            normal_cone_sample(&disc_complement(), &e, &Vector::xy(1.5, 0.0), 0.1),
            Err(Error::InteriorPoint)
        ));
    }

    #[test]
    fn filtering_recovers_the_outward_normal() {
        let e = NormSpec::euclid(2);
        let cands = full_dual_sphere(&e, 2);
        let kept = filter_cone_candidates(&half_plane(), &e, &Vector::zeros(2), 0.1, &cands).unwrap();
        assert_eq!(kept.len(), 1);
        assert_abs_diff_eq!(kept[0].0[1], 1.0, epsilon = 1e-12);

        let kept = filter_cone_candidates(&disc_complement(), &e, &Vector::xy(1.0, 0.0), 0.1, &cands).unwrap();
        assert_eq!(kept.len(), 1);
        assert_abs_diff_eq!(kept[0].0[0], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn corner_of_convex_complement_has_trivial_cone() {
        let l1 = NormSpec::lp(1.0, 2).unwrap();
        let a = ClosedSetSpec::ball_complement(Vector::zeros(2), 1.0, 2.0).unwrap();
        let dirs = cone_directions(&a, &l1, &Vector::xy(1.0, 0.0)).unwrap();
        assert!(dirs.is_empty());
        // no unit functional passes the sampled test either
        let kept = filter_cone_candidates(&a, &l1, &Vector::xy(1.0, 0.0), 0.1, &full_dual_sphere(&l1, 2)).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn prop_j1_in_n_examples() {
        let e = NormSpec::euclid(2);
        assert!(check_prop_j1_in_n(&disc_complement(), &e, &Vector::xy(0.5, 0.0)).unwrap());
        let two = ClosedSetSpec::finite_points(vec![Vector::xy(-1.0, 0.0), Vector::xy(1.0, 0.0)], 3.0).unwrap();
        assert!(check_prop_j1_in_n(&two, &e, &Vector::xy(0.5, 0.0)).unwrap());
        assert!(check_prop_j1_in_n(&half_plane(), &e, &Vector::xy(0.0, 1.0)).unwrap());
    }

    #[test]
    fn cylinder_cone_has_zero_free_components() {
        let c = cylinder_extend(disc_complement(), 3, vec![0, 1]).unwrap();
        let e = NormSpec::euclid(3);
        let s = normal_cone_sample(&c, &e, &Vector::from([1.0, 0.0, 5.0]), 0.1).unwrap();
        assert_eq!(s.directions.len(), 1);
        assert_abs_diff_eq!(s.directions[0][0], -1.0, epsilon = 1e-12);
        assert!(s.directions[0][1].abs() <= 1e-6 && s.directions[0][2].abs() <= 1e-6);
    }
}
