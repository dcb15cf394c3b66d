//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use banachlab::hypomono::{gamma_estimate, hypo_check, section_bound_check, touching_point_search, DEFAULT_BAND};
use banachlab::moduli::{delta_estimate, doubling_ratio, geometric_grid, lambda_supp_estimate, linear_grid, rho_estimate, Which};
use banachlab::psi::{default_knots, psi1_regularize, CurvePsi, PsiSpec};
use banachlab::sets::{
    cone_directions, john_ellipse_2d, john_ellipse_of, omega_n_check, omega_p_check, prox_smooth_certificate, ClosedSetSpec, Verdict,
};
use banachlab::suite::{resolve_set, touching_instances, Command, Suite, SuiteConfig};
use banachlab::{NormSpec, SearchBudget, Vector};

const CURVE_TOL: f64 = 5e-3;
const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn test_norms() -> Vec<(&'static str, NormSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    vec![
        ("l1.5", NormSpec::lp(1.5, 2).unwrap()),
        ("l2", NormSpec::euclid(2)),
        ("l3", NormSpec::lp(3.0, 2).unwrap()),
        ("l1", NormSpec::lp(1.0, 2).unwrap()),
        ("linf", NormSpec::lp(f64::INFINITY, 2).unwrap()),
        ("polygon", NormSpec::random_polygon(&mut rng, 4)),
        ("ellipse", NormSpec::random_ellipse(&mut rng)),
    ]
}

fn uniformly_convex_smooth(n: &NormSpec) -> bool {
    n.is_strictly_convex() && n.is_smooth()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let e = NormSpec::euclid(2);
    let eps = linear_grid(0.05, 1.9, 0.05);
    let tau = linear_grid(0.01, 1.0, 0.01);
    let delta = delta_estimate(&e, &eps, &SearchBudget::DEFAULT).unwrap();
    let rho = rho_estimate(&e, &tau, &SearchBudget::DEFAULT).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let de = eps.iter().zip(&delta.values).fold(0.0f64, |m, (x, v)| m.max((v - (1.0 - (1.0 - x * x / 4.0).sqrt())).abs()));
    let re = tau.iter().zip(&rho.values).fold(0.0f64, |m, (x, v)| m.max((v - ((1.0 + x * x).sqrt() - 1.0)).abs()));
    outcome(
        de <= 1e-4 && re <= 1e-4 && elapsed < 10.0,
        format!("max |delta err| {de:.2e}, max |rho err| {re:.2e}, {elapsed:.1} s"),
    )
}

fn criterion_2() -> Outcome {
    let r_grid = linear_grid(0.025, 1.0, 0.025);
    let half: Vec<f64> = r_grid.iter().map(|r| r / 2.0).collect();
    let twice: Vec<f64> = r_grid.iter().map(|r| 2.0 * r).collect();
    let b = SearchBudget::DEFAULT;
    let mut worst = f64::INFINITY;
    let mut worst_at = String::new();
    let mut exact_err = 0.0f64;
    for (name, n) in test_norms() {
        let lp = lambda_supp_estimate(&n, &r_grid, Which::Plus, &b).unwrap();
        let lm = lambda_supp_estimate(&n, &r_grid, Which::Minus, &b).unwrap();
        let rho_half = rho_estimate(&n, &half, &b).unwrap();
        let rho_twice = rho_estimate(&n, &twice, &b).unwrap();
        let delta_twice = delta_estimate(&n, &twice, &b).unwrap();
        for (i, &r) in r_grid.iter().enumerate() {
            let (p, m) = (lp.values[i], lm.values[i]);
            let slacks = [
                p - rho_half.values[i],
                rho_twice.values[i] - p,
                delta_twice.values[i] - m,
                1.0 - (1.0 - r * r).sqrt() - delta_twice.values[i],
                m,
                p - m,
                r - p,
            ];
            let s = slacks.iter().copied().fold(f64::INFINITY, f64::min);
            if s < worst {
                worst = s;
                worst_at = format!("{name} at r = {r}");
            }
            if name == "l1" || name == "linf" {
                exact_err = exact_err.max(m.abs()).max((p - r).abs());
            }
        }
    }
    outcome(
        worst >= -CURVE_TOL && exact_err <= CURVE_TOL,
        format!("worst sandwich slack {worst:.2e} ({worst_at}), flat-face lambda error {exact_err:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let grid = geometric_grid(1.0, 41);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (_, n) in test_norms().into_iter().filter(|(_, n)| n.is_smooth()) {
        let rho = rho_estimate(&n, &grid, &SearchBudget::DEFAULT).unwrap();
        let (a, b) = doubling_ratio(&rho).unwrap();
        lo = lo.min(a);
        hi = hi.max(b);
    }
    outcome(lo >= 1.85 && hi <= 4.15, format!("observed ratios in [{lo:.4}, {hi:.4}]"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let eps = [0.05, 0.1, 0.2, 0.4];
    let a = ClosedSetSpec::ball_complement(Vector::zeros(2), 1.0, 1.2).unwrap();
    let b = SearchBudget::DEFAULT;
    let mut worst = f64::INFINITY;
    let mut euclid_err = 0.0f64;
    for (name, n) in test_norms().into_iter().filter(|(_, n)| uniformly_convex_smooth(n)) {
        let quarter: Vec<f64> = eps.iter().map(|e| e / 4.0).collect();
        let twice: Vec<f64> = eps.iter().map(|e| 2.0 * e).collect();
        let rho = rho_estimate(&n, &quarter, &b).unwrap();
        let lp = lambda_supp_estimate(&n, &twice, Which::Plus, &b).unwrap();
        for (i, &e) in eps.iter().enumerate() {
            let g = gamma_estimate(&a, &n, e, DEFAULT_BAND, &b).unwrap();
            worst = worst.min(g - rho.values[i]).min(2.0 * lp.values[i] - g);
            if name == "l2" {
                euclid_err = euclid_err.max((g - e * e).abs());
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst >= -CURVE_TOL && euclid_err <= 1e-3 && elapsed < 60.0,
        format!("worst slack {worst:.2e}, euclidean error {euclid_err:.2e}, {elapsed:.1} s"),
    )
}

fn criterion_5() -> Outcome {
    let a = ClosedSetSpec::ball_complement(Vector::zeros(2), 1.0, 1.2).unwrap();
    let grid = linear_grid(0.01, 2.0, 0.01);
    let mut worst = f64::INFINITY;
    let mut lines = Vec::new();
    for (name, n) in test_norms() {
        let rho = rho_estimate(&n, &grid, &SearchBudget::DEFAULT).unwrap();
        let psi = CurvePsi { curve: rho, scale: 1.0 / 17.0 };
        let rep = hypo_check(&a, &n, &psi, 1.0, 2.0, 400, SEED).unwrap();
        let pair = rep.worst_pair.as_ref().unwrap();
        let d = n.eval((&pair.x2 - &pair.x1).coords());
        lines.push(format!("{name} {:.3e} at distance {d:.3}", rep.worst_margin));
        worst = worst.min(rep.worst_margin);
    }
    // in the euclidean plane the pairing equals -d^2 while rho(d)/17 is about d^2/34
    let e = NormSpec::euclid(2);
    let small = hypo_check(&a, &e, &|t: f64| ((1.0 + t * t).sqrt() - 1.0) / 17.0, 1.0, 0.1, 400, SEED).unwrap();
    outcome(
        worst >= -1e-6,
        format!("worst margin {worst:.3e}; euclidean margin with pairs at distance <= 0.1: {:.3e}; {}", small.worst_margin, lines.join(", ")),
    )
}

fn zoo() -> Vec<(&'static str, f64, ClosedSetSpec, NormSpec)> {
    let entries = [
        ("ball_complement", 0.5),
        ("ball_complement", 1.0),
        ("halfspace", 1.0),
        ("halfspace", 10.0),
        ("ball", 1.0),
        ("two_points", 0.5),
        ("two_points", 1.5),
        ("square_complement", 0.5),
        ("cylinder", 1.0),
    ];
    entries
        .into_iter()
        .map(|(id, r)| {
            let a = resolve_set(id).unwrap();
            let n = NormSpec::euclid(a.dim());
            (id, r, a, n)
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let mut incoherent = Vec::new();
    let mut bisector = false;
    let mut two_point_fails = false;
    for (id, r, a, n) in zoo() {
        let reps = [
            prox_smooth_certificate(&a, &n, r, 300, SEED).unwrap(),
            omega_p_check(&a, &n, r, 300, SEED).unwrap(),
            omega_n_check(&a, &n, r, 200, SEED).unwrap(),
        ];
        if !reps.iter().all(|x| x.verdict == reps[0].verdict) {
            incoherent.push(format!("{id}@{r}"));
        }
        if id == "two_points" && r == 1.5 {
            two_point_fails = reps.iter().all(|x| x.verdict == Verdict::Fail);
            // the two points are (-1, 0) and (1, 0); their bisector is x = 0
            bisector = reps[0].witness.as_ref().is_some_and(|w| w[0].abs() <= 1e-3);
        }
    }
    outcome(
        incoherent.is_empty() && two_point_fails && bisector,
        format!("incoherent members {incoherent:?}; two points at 1.5 fail all three {two_point_fails}, witness on bisector {bisector}"),
    )
}

fn criterion_7() -> Outcome {
    let rho2 = rho_estimate(&NormSpec::euclid(2), &linear_grid(0.01, 1.0, 0.01), &SearchBudget::DEFAULT).unwrap();
    let rho3 = rho_estimate(&NormSpec::euclid(3), &[0.25, 0.5], &SearchBudget::DEFAULT).unwrap();
    let mut violations = 0;
    let mut lines = Vec::new();
    for (id, r, a, n) in zoo() {
        if !omega_n_check(&a, &n, r, 200, SEED).unwrap().verdict.passed() {
            continue;
        }
        let rho = if n.dim() == 2 { &rho2 } else { &rho3 };
        let a0 = a
            .boundary_sample(&n, 50, SEED)
            .unwrap()
            .into_iter()
            .find(|x| cone_directions(&a, &n, x).is_ok_and(|d| !d.is_empty()))
            .unwrap();
        let delta = 0.5 * r.min(1.0);
        let rep = section_bound_check(&a, &n, r, rho, &a0, delta, 1000, SEED).unwrap();
        if !rep.verdict.passed() {
            violations += 1;
        }
        lines.push(format!("{id}@{r}: {} points, ratio {:.3} vs {:.3}", rep.samples_used, rep.worst_ratio, rep.epsilon));
    }
    outcome(violations == 0, format!("{violations} violations; {}", lines.join("; ")))
}

fn criterion_8() -> Outcome {
    let zoo = zoo();
    let per = 100usize.div_ceil(zoo.len());
    let mut total = 0;
    let mut failed = 0;
    let mut broken = 0;
    for (_, _, a, n) in &zoo {
        let (z0s, z1s, eps) = touching_instances(a, n, per, SEED).unwrap();
        for ((z0, z1), e) in z0s.iter().zip(&z1s).zip(&eps) {
            if total == 100 {
                break;
            }
            total += 1;
            match touching_point_search(a, n, z0, z1, *e) {
                Ok(tp) => {
                    let dz = z1 - z0;
                    let len = n.eval(dz.coords());
                    let z_lambda = z0.axpy(tp.lambda, &dz);
                    let first = n.eval((&z_lambda - &tp.y).coords()) < e * len;
                    let second = tp.p.dot(&dz) < e * len;
                    let in_set = a.distance(n, &tp.y).unwrap() <= 1e-9;
                    if !(first && second && in_set) {
                        broken += 1;
                    }
                }
                Err(_) => failed += 1,
            }
        }
    }
    outcome(failed == 0 && broken == 0 && total == 100, format!("{total} instances, {failed} construction failures, {broken} outputs violating the bounds"))
}

/// Largest value of `ratio` on the smallest and largest decade of positive knots.
fn decade_max(knots: &[f64], ratio: impl Fn(usize) -> f64) -> (f64, f64) {
    let pos: Vec<usize> = (0..knots.len()).filter(|&i| knots[i] > 0.0).collect();
    let (lo, hi) = (knots[pos[0]], knots[*pos.last().unwrap()]);
    let small = pos.iter().filter(|&&i| knots[i] <= 10.0 * lo).map(|&i| ratio(i)).fold(0.0, f64::max);
    let large = pos.iter().filter(|&&i| knots[i] >= hi / 10.0).map(|&i| ratio(i)).fold(0.0, f64::max);
    (small, large)
}

fn criterion_9() -> Outcome {
    let knots = default_knots();
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, expo) in [("linear", 1.5), ("power:1.5", 1.75)] {
        let psi = PsiSpec::builtin(name, &knots).unwrap();
        let out = psi1_regularize(&psi).unwrap();
        let err = knots.iter().zip(&out.values).fold(0.0f64, |m, (t, v)| m.max((v - t.powf(expo)).abs()));
        let (s1, l1) = decade_max(&knots, |i| out.values[i] / psi.values[i]);
        let (s2, l2) = decade_max(&knots, |i| knots[i] * knots[i] / out.values[i]);
        let decays = s1 <= 0.2 * l1 && s2 <= 0.2 * l2;
        ok &= err <= 1e-9 && decays;
        lines.push(format!("{name}: error {err:.1e}, decay {:.3} and {:.3}", s1 / l1, s2 / l2));
    }
    outcome(ok, lines.join("; "))
}

fn criterion_10() -> Outcome {
    let sq = john_ellipse_2d(&[[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]).unwrap();
    let id_err = [sq.matrix[0][0] - 1.0, sq.matrix[0][1], sq.matrix[1][0], sq.matrix[1][1] - 1.0]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut bad = 0;
    for i in 0..20 {
        let k = NormSpec::random_polygon(&mut rng, 3 + i % 4);
        let e = john_ellipse_of(&k).unwrap().norm().unwrap();
        let mut points: Vec<Vector> = (0..2000).map(|i| k.sphere_point(i as f64 * std::f64::consts::TAU / 2000.0)).collect();
        points.extend(k.vertices().iter().map(|v| Vector::xy(v[0], v[1])));
        // B_E inside K: ||x||_E >= ||x||_K; K inside sqrt 2 B_E: ||x||_E <= sqrt 2 ||x||_K
        let fails = points.iter().any(|x| {
            let (ne, nk) = (e.eval(x.coords()), k.eval(x.coords()));
            ne < nk * (1.0 - 1e-6) || ne > 2f64.sqrt() * nk * (1.0 + 1e-6)
        });
        if fails {
            bad += 1;
        }
    }
    outcome(id_err <= 1e-6 && bad == 0, format!("square deviation from identity {id_err:.1e}; {bad} of 20 polygons violate the inclusions"))
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_11() -> Outcome {
    let cfg = SuiteConfig { budget: "low".into(), seed: SEED, ..SuiteConfig::default() };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let r1 = Suite::new(cfg.clone(), d1.path()).unwrap().run(Command::All).unwrap();
    let r2 = Suite::new(cfg, d2.path()).unwrap().run(Command::All).unwrap();
    let (s1, s2) = (snapshot(d1.path()), snapshot(d2.path()));
    let same = s1 == s2 && r1 == r2;
    outcome(same, format!("{} files compared, {} records", s1.len(), r1.records.len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "euclidean moduli oracle", criterion_1),
        (2, "supporting-moduli sandwiches", criterion_2),
        (3, "doubling bound for smoothness modulus", criterion_3),
        (4, "gamma sandwich on ball complement", criterion_4),
        (5, "ball complement with psi = rho/17 at R = 1", criterion_5),
        (6, "coherence of the three supporting conditions", criterion_6),
        (7, "local section bound", criterion_7),
        (8, "touching-point search", criterion_8),
        (9, "psi_1 regularization", criterion_9),
        (10, "john ellipse inclusions", criterion_10),
        (11, "determinism of the full suite", criterion_11),
    ];
    let mut failed = 0;
    for (k, name, f) in criteria {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {k:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of 11 criteria pass", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
