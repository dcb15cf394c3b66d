//! Two-dimensional sections of a norm.
//!
//! Every modulus handled here is an extremum over pairs of vectors, and a pair
//! spans a plane, so each modulus is the extremum of the same modulus over
//! all 2D sections. In dimension 2 the single section is the space itself.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::norm::{NormKind, NormSpec};
use crate::vector::Vector;

const STACK_DIM: usize = 16;

#[derive(Clone, Debug)]
pub struct Section<'a> {
    norm: &'a NormSpec,
    e1: Vec<f64>,
    e2: Vec<f64>,
    identity: bool,
    special: Vec<f64>,
}

impl<'a> Section<'a> {
    /// The whole space, for two-dimensional norms.
    pub fn identity(norm: &'a NormSpec) -> Self {
        assert_eq!(norm.dim(), 2, "identity section needs a planar norm");
        let mut s = Section { norm, e1: vec![1.0, 0.0], e2: vec![0.0, 1.0], identity: true, special: Vec::new() };
        s.special = vertex_angles(norm, 0, 1);
        s
    }

    /// Plane spanned by two coordinate axes.
    pub fn coordinate(norm: &'a NormSpec, i: usize, j: usize) -> Self {
        let d = norm.dim();
        let mut e1 = vec![0.0; d];
        let mut e2 = vec![0.0; d];
        e1[i] = 1.0;
        e2[j] = 1.0;
        Section { norm, e1, e2, identity: false, special: vertex_angles(norm, i, j) }
    }

    /// Plane spanned by the Gram–Schmidt orthonormalisation of `a`, `b`.
    /// Returns `None` when the pair is numerically dependent.
    pub fn spanned(norm: &'a NormSpec, a: &[f64], b: &[f64]) -> Option<Self> {
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na < 1e-6 {
            return None;
        }
        let e1: Vec<f64> = a.iter().map(|v| v / na).collect();
        let proj: f64 = b.iter().zip(&e1).map(|(x, y)| x * y).sum();
        let r: Vec<f64> = b.iter().zip(&e1).map(|(x, y)| x - proj * y).collect();
        let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nr < 1e-6 {
            return None;
        }
        let e2 = r.iter().map(|v| v / nr).collect();
        Some(Section { norm, e1, e2, identity: false, special: Vec::new() })
    }

    pub fn norm(&self) -> &NormSpec {
        self.norm
    }

    /// Norm of `a e1 + b e2`.
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        if self.identity {
            return self.norm.eval(&[a, b]);
        }
        let d = self.e1.len();
        if d <= STACK_DIM {
            let mut buf = [0.0; STACK_DIM];
            for k in 0..d {
                buf[k] = a * self.e1[k] + b * self.e2[k];
            }
            self.norm.eval(&buf[..d])
        } else {
            let v: Vec<f64> = (0..d).map(|k| a * self.e1[k] + b * self.e2[k]).collect();
            self.norm.eval(&v)
        }
    }

    pub fn eval2(&self, p: [f64; 2]) -> f64 {
        self.eval(p[0], p[1])
    }

    /// Unit-sphere point in direction `theta`.
    pub fn sphere(&self, theta: f64) -> [f64; 2] {
        let (s, c) = theta.sin_cos();
        let n = self.eval(c, s);
        [c / n, s / n]
    }

    /// Section coordinates mapped back into the ambient space.
    pub fn lift(&self, p: [f64; 2]) -> Vector {
        Vector::from((0..self.e1.len()).map(|k| p[0] * self.e1[k] + p[1] * self.e2[k]).collect::<Vec<_>>())
    }

    /// Functional restricted to the section.
    pub fn restrict_functional(&self, p: &Vector) -> [f64; 2] {
        let c = p.coords();
        [
            c.iter().zip(&self.e1).map(|(x, y)| x * y).sum(),
            c.iter().zip(&self.e2).map(|(x, y)| x * y).sum(),
        ]
    }

    /// Directions (in `[0, 2pi)`) of corners of the section's unit ball.
    pub fn special_angles(&self) -> &[f64] {
        &self.special
    }

    /// Directions of unit vectors `y` that are quasiorthogonal to the unit
    /// vector `x` inside this section, as section coordinates (both signs).
    /// At a corner the admissible directions form an arc; it is sampled.
    pub fn quasiorthogonal_units(&self, x: [f64; 2], arc_samples: usize) -> Vec<[f64; 2]> {
        let lifted = self.lift(x);
        let fun: Vec<[f64; 2]> = match self.norm.j1_set(&lifted) {
            Ok(set) => set.iter().map(|p| self.restrict_functional(p)).collect(),
            Err(_) => Vec::new(),
        };
        let mut angles: Vec<f64> = fun.iter().map(|p| p[1].atan2(p[0])).collect();
        if angles.is_empty() {
            return Vec::new();
        }
        // Functionals in J_1(x) lie in an arc shorter than pi around any one of them.
        let a0 = angles[0];
        for a in angles.iter_mut() {
            *a = a0 + wrap(*a - a0);
        }
        let lo = angles.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let picks: Vec<f64> = if hi - lo <= 1e-12 {
            vec![lo]
        } else {
            (0..arc_samples).map(|k| lo + (hi - lo) * k as f64 / (arc_samples - 1) as f64).collect()
        };
        let mut out = Vec::with_capacity(2 * picks.len());
        for a in picks {
            let (s, c) = (a + PI / 2.0).sin_cos();
            let n = self.eval(c, s);
            out.push([c / n, s / n]);
            out.push([-c / n, -s / n]);
        }
        out
    }
}

fn wrap(a: f64) -> f64 {
    let mut a = a % TAU;
    if a > PI {
        a -= TAU;
    } else if a <= -PI {
        a += TAU;
    }
    a
}

fn angle_of(p: [f64; 2]) -> f64 {
    p[1].atan2(p[0]).rem_euclid(TAU)
}

/// Corners of the unit ball of the norm restricted to coordinates `i`, `j`.
fn vertex_angles(norm: &NormSpec, i: usize, j: usize) -> Vec<f64> {
    let (p, w) = match norm.kind() {
        NormKind::Polygon { vertices } => return vertices.iter().map(|v| angle_of(*v)).collect(),
        NormKind::Lp { p } => (*p, [1.0, 1.0]),
        NormKind::WeightedLp { p, weights } => (*p, [weights[i], weights[j]]),
        NormKind::Ellipse { .. } => return Vec::new(),
    };
    let (a, b) = (1.0 / w[0], 1.0 / w[1]);
    let pts: Vec<[f64; 2]> = if p == 1.0 {
        vec![[a, 0.0], [0.0, b], [-a, 0.0], [0.0, -b]]
    } else if p.is_infinite() {
        vec![[a, b], [-a, b], [-a, -b], [a, -b]]
    } else {
        return Vec::new();
    };
    pts.into_iter().map(angle_of).collect()
}

/// Sections used to search a norm: the whole plane in dimension 2, otherwise
/// all coordinate planes followed by `random` seeded random planes.
pub fn sections(norm: &NormSpec, random: usize, seed: u64) -> Vec<Section<'_>> {
    let d = norm.dim();
    if d == 2 {
        return vec![Section::identity(norm)];
    }
    if d == 1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            out.push(Section::coordinate(norm, i, j));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < d * (d - 1) / 2 + random {
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Some(s) = Section::spanned(norm, &a, &b) {
            out.push(s);
        }
    }
    out
}
