//! Sampled convex functions `psi` with `psi(0) = 0`: validation, the
//! quadratic-ratio (Figiel) class, and the `psi_1` regularisation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moduli::{figiel_check, FigielOutcome, ModulusCurve};

const VALUE_TOL: f64 = 1e-12;
const SLOPE_TOL: f64 = 1e-9;
pub const FIGIEL_K_MAX: f64 = 64.0;
/// Decade-to-decade factor used to read `O(.)` / `o(.)` statements on a grid.
const DECADE_FACTOR: f64 = 5.0;

/// Anything usable as `psi` in a hypomonotonicity estimate.
pub trait Psi {
    fn eval(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Psi for F {
    fn eval(&self, t: f64) -> f64 {
        self(t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiSpec {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub lipschitz: f64,
    /// Set when values beyond `t = 1` were produced by linear extension.
    #[serde(default)]
    pub linear_tail: bool,
}

/// `0` followed by 201 log-spaced points from `1e-5` to `1`.
pub fn default_knots() -> Vec<f64> {
    let mut k = vec![0.0];
    k.extend((0..=200).map(|i| 10f64.powf(-5.0 + 5.0 * i as f64 / 200.0)));
    k
}

/// Checks membership in the class of convex, Lipschitz, nonnegative
/// functions vanishing at zero, and records a Lipschitz constant.
///
/// The constant is the largest chord slope, or the slope at the right end of
/// the quadratic through the last three samples if that is larger.
pub fn validate_m(knots: &[f64], values: &[f64]) -> Result<PsiSpec> {
    if knots.len() < 2 {
        return Err(Error::EmptyGrid);
    }
    if knots.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: knots.len(), found: values.len() });
    }
    if knots[0] != 0.0 {
        return Err(Error::OutOfDomain { what: "first knot must be 0", value: knots[0] });
    }
    if let Some(w) = knots.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::OutOfDomain { what: "knots must be strictly increasing", value: w[1] });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::OutOfDomain { what: "values must be finite", value: f64::NAN });
    }
    if values[0].abs() > VALUE_TOL {
        return Err(Error::NonzeroAtZero);
    }
    if let Some(i) = values.iter().position(|&v| v < -VALUE_TOL) {
        return Err(Error::NegativeValue { at: knots[i] });
    }
    let slopes: Vec<f64> = (0..knots.len() - 1)
        .map(|i| (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]))
        .collect();
    for i in 1..slopes.len() {
        if slopes[i] < slopes[i - 1] - SLOPE_TOL * slopes[i - 1].abs().max(1.0) {
            return Err(Error::NotConvex { at: knots[i] });
        }
    }
    let mut lip = slopes.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let n = knots.len();
    if n >= 3 {
        let (t0, t1, t2) = (knots[n - 3], knots[n - 2], knots[n - 1]);
        let (s01, s12) = (slopes[n - 3], slopes[n - 2]);
        // derivative at t2 of the quadratic through the last three points
        let end = s12 + (s12 - s01) * (t2 - t1) / (t2 - t0);
        lip = lip.max(end.abs());
    }
    Ok(PsiSpec { knots: knots.to_vec(), values: values.to_vec(), lipschitz: lip, linear_tail: false })
}

impl PsiSpec {
    /// `"square"`, `"linear"` or `"power:a"` sampled on `knots`.
    pub fn builtin(name: &str, knots: &[f64]) -> Result<Self> {
        let f: Box<dyn Fn(f64) -> f64> = match name {
            "square" => Box::new(|t| t * t),
            "linear" => Box::new(|t| t),
            _ => match name.strip_prefix("power:").map(str::parse::<f64>) {
                Some(Ok(a)) if a > 0.0 => Box::new(move |t: f64| t.powf(a)),
                _ => return Err(Error::Config(format!("unknown psi function {name:?}"))),
            },
        };
        Self::sample(knots, f)
    }

    pub fn sample(knots: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = knots.iter().map(|&t| f(t)).collect();
        validate_m(knots, &values)
    }

    pub fn max_knot(&self) -> f64 {
        *self.knots.last().expect("nonempty")
    }

    fn last_slope(&self) -> f64 {
        let n = self.knots.len();
        (self.values[n - 1] - self.values[n - 2]) / (self.knots[n - 1] - self.knots[n - 2])
    }

    /// Columns `knot,value`.
    pub fn write_csv_to<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["knot", "value"])?;
        for (k, v) in self.knots.iter().zip(&self.values) {
            wr.write_record([k.to_string(), v.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

impl Psi for PsiSpec {
    /// Piecewise-linear interpolation, extended linearly past the last knot.
    fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = self.knots.partition_point(|&a| a < t);
        if k >= self.knots.len() {
            return self.values[self.knots.len() - 1] + self.last_slope() * (t - self.max_knot());
        }
        if k == 0 {
            return self.values[0];
        }
        let (a0, a1) = (self.knots[k - 1], self.knots[k]);
        self.values[k - 1] + (self.values[k] - self.values[k - 1]) * (t - a0) / (a1 - a0)
    }
}

/// `scale * f(t)` for a sampled modulus `f`. Below the grid `f(t)/t` is
/// taken as constant; above it the last segment is extended.
#[derive(Clone, Debug)]
pub struct CurvePsi {
    pub curve: ModulusCurve,
    pub scale: f64,
}

impl Psi for CurvePsi {
    fn eval(&self, t: f64) -> f64 {
        let c = &self.curve;
        let v = if t <= 0.0 {
            0.0
        } else if t < c.min_arg() {
            c.values[0] * t / c.min_arg()
        } else if t > c.max_arg() {
            let n = c.args.len();
            let slope = if n >= 2 { (c.values[n - 1] - c.values[n - 2]) / (c.args[n - 1] - c.args[n - 2]) } else { 0.0 };
            c.values[n - 1] + slope * (t - c.max_arg())
        } else {
            c.interp(t).expect("covered")
        };
        self.scale * v
    }
}

/// Max of `ratio` over the smallest and over the largest decade of the positive knots.
fn decade_maxima(knots: &[f64], ratio: impl Fn(usize) -> f64) -> Option<(f64, f64)> {
    let pos: Vec<usize> = (0..knots.len()).filter(|&i| knots[i] > 0.0).collect();
    let (&first, &last) = (pos.first()?, pos.last()?);
    let (lo, hi) = (knots[first], knots[last]);
    if hi < 10.0 * lo {
        return None;
    }
    let max_in = |a: f64, b: f64| {
        pos.iter()
            .filter(|&&i| knots[i] >= a * (1.0 - 1e-12) && knots[i] <= b * (1.0 + 1e-12))
            .map(|&i| ratio(i))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Some((max_in(lo, 10.0 * lo), max_in(hi / 10.0, hi)))
}

/// Grid reading of `num = O(den)` near zero.
pub fn is_big_o(knots: &[f64], num: &[f64], den: &[f64]) -> bool {
    decay_ratio(knots, num, den).is_some_and(|r| r <= DECADE_FACTOR)
}

/// Grid reading of `num = o(den)` near zero.
pub fn is_little_o(knots: &[f64], num: &[f64], den: &[f64]) -> bool {
    decay_ratio(knots, num, den).is_some_and(|r| r <= 1.0 / DECADE_FACTOR)
}

/// `max(num/den)` on the smallest decade divided by that on the largest.
pub fn decay_ratio(knots: &[f64], num: &[f64], den: &[f64]) -> Option<f64> {
    let q = |i: usize| if den[i] > 0.0 { num[i] / den[i] } else if num[i] == 0.0 { 0.0 } else { f64::INFINITY };
    let (small, large) = decade_maxima(knots, q)?;
    if large > 0.0 && large.is_finite() {
        Some(small / large)
    } else if small == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

fn squares(knots: &[f64]) -> Vec<f64> {
    knots.iter().map(|t| t * t).collect()
}

/// Figiel condition plus `t^2 = O(psi)`.
pub fn in_m2(psi: &PsiSpec) -> Result<FigielOutcome> {
    let out = figiel_check(&psi.knots, &psi.values, FIGIEL_K_MAX)?;
    if !is_big_o(&psi.knots, &squares(&psi.knots), &psi.values) {
        return Ok(FigielOutcome::Fail(out.constant()));
    }
    Ok(out)
}

/// Upper concave envelope of the points `(t_i, h_i)` (sorted by `t`),
/// evaluated back at every `t_i`.
pub fn upper_concave_envelope(t: &[f64], h: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..t.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (t[b] - t[a]) * (h[i] - h[a]) - (h[b] - h[a]) * (t[i] - t[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    if hull.len() == 1 {
        return vec![h[hull[0]]; t.len()];
    }
    let mut seg = 0;
    let mut out = Vec::with_capacity(t.len());
    for &ti in t {
        while seg + 2 < hull.len() && t[hull[seg + 1]] < ti {
            seg += 1;
        }
        let (a, b) = (hull[seg], hull[seg + 1]);
        out.push(h[a] + (h[b] - h[a]) * (ti - t[a]) / (t[b] - t[a]));
    }
    out
}

/// Regularisation `psi_1(t) = t^2 / sqrt(gamma(t))`, `gamma` the upper
/// concave envelope of `h(t) = t^2 / psi(t)` on `[0, 1]` with `h(0) = 0`.
/// When `psi` is not `o(t)` the result is `t^(3/2)`.
pub fn psi1_regularize(psi: &PsiSpec) -> Result<PsiSpec> {
    let k = &psi.knots;
    let linear: Vec<f64> = k.clone();
    if !is_little_o(k, &psi.values, &linear) {
        return PsiSpec::sample(k, |t| t.powf(1.5));
    }
    if !is_little_o(k, &squares(k), &psi.values) {
        return Err(Error::PrecessionViolated);
    }
    let inner: Vec<usize> = (0..k.len()).filter(|&i| k[i] <= 1.0).collect();
    let t: Vec<f64> = inner.iter().map(|&i| k[i]).collect();
    let mut h = Vec::with_capacity(t.len());
    for &i in &inner {
        if k[i] == 0.0 {
            h.push(0.0);
        } else if psi.values[i] > 0.0 {
            h.push(k[i] * k[i] / psi.values[i]);
        } else {
            return Err(Error::PrecessionViolated);
        }
    }
    let gamma = upper_concave_envelope(&t, &h);
    let mut values: Vec<f64> =
        t.iter().zip(&gamma).map(|(&ti, &g)| if ti == 0.0 { 0.0 } else { ti * ti / g.sqrt() }).collect();
    let tail = inner.len() < k.len();
    if tail {
        let n = t.len();
        let slope = (values[n - 1] - values[n - 2]) / (t[n - 1] - t[n - 2]);
        let (t_end, v_end) = (t[n - 1], values[n - 1]);
        values.extend(k[n..].iter().map(|&ti| v_end + slope * (ti - t_end)));
    }
    let mut out = validate_m(k, &values)?;
    out.linear_tail = tail;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn validate_examples() {
        let k = uniform(100);
        let sq = PsiSpec::sample(&k, |t| t * t).unwrap();
        assert_abs_diff_eq!(sq.lipschitz, 2.0, epsilon = 1e-12);
        assert!(matches!(PsiSpec::sample(&k, f64::sqrt), Err(Error::NotConvex { .. })));
        assert!(matches!(PsiSpec::sample(&k, |t| t * t + 0.1), Err(Error::NonzeroAtZero)));
        assert!(matches!(PsiSpec::sample(&k, |t| -t), Err(Error::NegativeValue { .. })));
        let geo = PsiSpec::builtin("square", &default_knots()).unwrap();
        assert_abs_diff_eq!(geo.lipschitz, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn m2_examples() {
        let k = default_knots();
        let sq = in_m2(&PsiSpec::builtin("square", &k).unwrap()).unwrap();
        assert_eq!(sq, FigielOutcome::Pass(1.0));
        let p15 = in_m2(&PsiSpec::builtin("power:1.5", &k).unwrap()).unwrap();
        assert!(p15.passed());
        assert_abs_diff_eq!(p15.constant(), 1.0, epsilon = 1e-12);
        assert!(!in_m2(&PsiSpec::builtin("power:3", &k).unwrap()).unwrap().passed());
    }

    #[test]
    fn regularisation_examples() {
        let k = default_knots();
        let lin = psi1_regularize(&PsiSpec::builtin("linear", &k).unwrap()).unwrap();
        for (t, v) in lin.knots.iter().zip(&lin.values) {
            assert_abs_diff_eq!(*v, t.powf(1.5), epsilon = 1e-9);
        }
        let p = psi1_regularize(&PsiSpec::builtin("power:1.5", &k).unwrap()).unwrap();
        for (t, v) in p.knots.iter().zip(&p.values) {
            assert_abs_diff_eq!(*v, t.powf(1.75), epsilon = 1e-9);
        }
        assert!(!p.linear_tail);
        assert!(matches!(psi1_regularize(&PsiSpec::builtin("square", &k).unwrap()), Err(Error::PrecessionViolated)));
    }

    #[test]
    fn envelope_is_concave_majorant() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let h: Vec<f64> = t.iter().map(|x| (7.0 * x).sin().abs() * x).collect();
        let g = upper_concave_envelope(&t, &h);
        for i in 0..t.len() {
            assert!(g[i] >= h[i] - 1e-15);
        }
        for i in 1..t.len() - 1 {
            let s0 = (g[i] - g[i - 1]) / (t[i] - t[i - 1]);
            let s1 = (g[i + 1] - g[i]) / (t[i + 1] - t[i]);
            assert!(s1 <= s0 + 1e-9);
        }
    }

    #[test]
    fn linear_tail_past_one() {
        let mut k = default_knots();
        k.extend([1.5, 2.0]);
        let p = psi1_regularize(&PsiSpec::builtin("power:1.5", &k).unwrap()).unwrap();
        assert!(p.linear_tail);
        let n = p.knots.len();
        let s1 = (p.values[n - 1] - p.values[n - 2]) / 0.5;
        let s0 = (p.values[n - 2] - p.values[n - 3]) / 0.5;
        assert_abs_diff_eq!(s0, s1, epsilon = 1e-12);
    }

    #[test]
    fn psi_eval_extends_linearly() {
        let sq = PsiSpec::sample(&uniform(10), |t| t * t).unwrap();
        assert_abs_diff_eq!(sq.eval(0.55), 0.305, epsilon = 1e-12);
        assert_abs_diff_eq!(sq.eval(2.0), 1.0 + 1.9, epsilon = 1e-12);
    }
}
