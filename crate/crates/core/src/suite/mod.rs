//! Inequality suite: drives the estimators and checks over a configured zoo
//! of norms and sets, writes curves as CSV and a JSON run report.

pub mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{resolve_norm, resolve_set, Membership, SetEntry, SuiteConfig};

use crate::error::{Error, Result};
use crate::hypomono::{gamma_sweep, hypo_check, section_bound_check, touching_point_search, write_gamma_csv};
use crate::moduli::{delta_estimate, doubling_ratio, lambda_supp_estimate, rho_estimate, ModulusCurve, SearchBudget, Which};
use crate::norm::{NormKind, NormSpec};
use crate::psi::{default_knots, decay_ratio, psi1_regularize, CurvePsi, PsiSpec};
use crate::sets::{cone_directions, john_ellipse_of, omega_n_check, omega_p_check, prox_smooth_certificate, ClosedSetSpec, CheckReport};
use crate::vector::Vector;

/// Tolerance of the sandwich inequalities between estimated curves.
pub const CURVE_TOL: f64 = 5e-3;
/// Accepted interval for the observed doubling ratio of the smoothness modulus.
pub const DOUBLING_BAND: (f64, f64) = (1.85, 4.15);
const SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordVerdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub anchor: String,
    pub verdict: RecordVerdict,
    pub margin: Option<f64>,
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckRecord {
    fn new(id: String, anchor: &str, pass: bool, margin: f64) -> Self {
        CheckRecord {
            id,
            anchor: anchor.into(),
            verdict: if pass { RecordVerdict::Pass } else { RecordVerdict::Fail },
            margin: margin.is_finite().then_some(margin),
            artifacts: Vec::new(),
            detail: None,
        }
    }

    fn skipped(id: String, anchor: &str, why: &str) -> Self {
        CheckRecord { id, anchor: anchor.into(), verdict: RecordVerdict::Skipped, margin: None, artifacts: Vec::new(), detail: Some(why.into()) }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }

    fn with_artifacts(mut self, files: Vec<String>) -> Self {
        self.artifacts = files;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub records: Vec<CheckRecord>,
}

impl RunReport {
    pub fn any_fail(&self) -> bool {
        self.records.iter().any(|r| r.verdict == RecordVerdict::Fail)
    }

    pub fn get(&self, id: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    fn sort(&mut self) {
        self.records.sort_by(|a, b| a.id.cmp(&b.id));
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("report.json");
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        std::io::Write::write_all(&mut w, b"\n")?;
        Ok(path)
    }
}

mod anchor {
    pub const ESTIMATES: &str = "δ_X(ε) = inf{1 − ‖x + y‖/2}; ρ_X(τ) = sup{‖x + y‖/2 + ‖x − y‖/2 − 1}; λ_X(x,y,r) = min{λ ∈ ℝ: ‖x+ry − λx‖ = 1}";
    pub const LAMBDA_PLUS: &str = "ρ_X(r/2) ⩽ λ⁺_X(r) ⩽ ρ_X(2r)";
    pub const LAMBDA_MINUS: &str = "λ⁻_X(r) ⩽ δ_X(2r) ⩽ 1 − √(1−r²)";
    pub const LAMBDA_ORDER: &str = "0 ⩽ λ⁻(r) ⩽ λ⁺(r) ⩽ r";
    pub const LAMBDA_EXACT: &str = "λ_X(x,y,r) = min{λ ∈ ℝ: ‖x+ry − λx‖ = 1} on flat faces";
    pub const DOUBLING: &str = "2 ⩽ limsup ρ_X(2τ)/ρ_X(τ) ⩽ 4";
    pub const PSI1: &str = "ψ₁(t) = t²/√(γ(t))";
    pub const PROX: &str = "distance function is continuously differentiable on U(R, A)";
    pub const OMEGA_P: &str = "P-supporting condition of weak convexity";
    pub const OMEGA_N: &str = "ρ(x + Ru, A) ⩾ R";
    pub const COHERENCE: &str = "Ω_PS(R) = Ω_P(R) = Ω_N(R)";
    pub const JOHN: &str = "B_E ⊂ B_n ⊂ √n B_E";
    pub const GAMMA: &str = "2λ⁺_X(2ε) ⩾ Γ(A, ε, X) ⩾ λ⁺_X(ε/2); Γ(A, ε, X) ⩾ ρ_X(ε/4)";
    pub const BALL_RHO17: &str = "(X ∖ int B₁) ∈ Ω_N^{(1/17)ρ_X}(1)";
    pub const SMOOTH_BOUND: &str = "⟨p₁ − p₂, x₁ − x₂⟩ ⩾ −4Rρ_X(‖x₁ − x₂‖/R)";
    pub const CONVEX_BOUND: &str = "Rkψ(t/R) ⩽ 2Rδ_X(t/R)";
    pub const SECTION: &str = "⟨p, a − a₀⟩ ⩽ ε‖a − a₀‖, ε = (2R/δ)ρ_X(δ/R)";
    pub const TOUCHING: &str = "‖(1−λ)z₀ + λz₁ − y‖ < ε‖z₁ − z₀‖; ⟨p, z₁ − z₀⟩ < ε‖z₁ − z₀‖";
}

/// Moduli of one norm on the grids the suite needs.
#[derive(Clone, Debug)]
pub struct NormCurves {
    pub delta: ModulusCurve,
    pub rho: ModulusCurve,
    pub lambda_minus: ModulusCurve,
    pub lambda_plus: ModulusCurve,
}

impl NormCurves {
    fn all(&self) -> [&ModulusCurve; 4] {
        [&self.delta, &self.rho, &self.lambda_minus, &self.lambda_plus]
    }
}

fn merged(parts: &[Vec<f64>], top: f64) -> Vec<f64> {
    let mut all: Vec<f64> = parts.iter().flatten().copied().filter(|&v| v > 0.0 && v <= top).collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    all
}

/// Shared state of one suite run: configuration, output directory and the
/// per-norm curve cache.
pub struct Suite {
    pub config: SuiteConfig,
    pub out: PathBuf,
    budget: SearchBudget,
    curves: BTreeMap<(String, usize), NormCurves>,
    zoo_curves: BTreeMap<(String, usize), (ModulusCurve, ModulusCurve)>,
}

impl Suite {
    pub fn new(config: SuiteConfig, out: &Path) -> Result<Self> {
        config.validate()?;
        std::fs::create_dir_all(out).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
        let budget = config.budget();
        Ok(Suite { config, out: out.to_path_buf(), budget, curves: BTreeMap::new(), zoo_curves: BTreeMap::new() })
    }

    fn grids_for_curves(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let g = &self.config.grids;
        let twice = |v: &[f64]| v.iter().map(|x| 2.0 * x).collect::<Vec<_>>();
        let half = |v: &[f64]| v.iter().map(|x| 0.5 * x).collect::<Vec<_>>();
        let quarter = |v: &[f64]| v.iter().map(|x| 0.25 * x).collect::<Vec<_>>();
        let ge = &self.config.gamma_eps;
        let delta = merged(&[g.eps.clone(), twice(&g.r)], 2.0);
        let rho = merged(&[g.tau.clone(), half(&g.r), twice(&g.r), quarter(ge)], 2.0);
        let lambda = merged(&[g.r.clone(), half(ge), twice(ge)], 1.0);
        (delta, rho, lambda)
    }

    /// Curves of the registry norm `id` in dimension `dim`, computed once.
    pub fn curves(&mut self, id: &str, dim: usize) -> Result<&NormCurves> {
        let key = (id.to_string(), dim);
        if !self.curves.contains_key(&key) {
            let n = resolve_norm(id, Some(dim))?;
            let (dg, rg, lg) = self.grids_for_curves();
            let label = if dim == 2 { id.to_string() } else { format!("{id}_d{dim}") };
            let rename = |mut c: ModulusCurve| {
                c.norm_id = label.clone();
                c
            };
            let c = NormCurves {
                delta: rename(delta_estimate(&n, &dg, &self.budget)?),
                rho: rename(rho_estimate(&n, &rg, &self.budget)?),
                lambda_minus: rename(lambda_supp_estimate(&n, &lg, Which::Minus, &self.budget)?),
                lambda_plus: rename(lambda_supp_estimate(&n, &lg, Which::Plus, &self.budget)?),
            };
            self.curves.insert(key.clone(), c);
        }
        Ok(&self.curves[&key])
    }

    /// `(delta, rho)` of the set norm in the dimension of a zoo member. Planar
    /// curves come from the main cache; other dimensions use only the
    /// configured `eps` and `tau` grids, since each point costs a search over
    /// many planes.
    fn zoo_moduli(&mut self, dim: usize) -> Result<(ModulusCurve, ModulusCurve)> {
        let id = self.config.set_norm.clone();
        if dim == 2 {
            let c = self.curves(&id, 2)?;
            return Ok((c.delta.clone(), c.rho.clone()));
        }
        let key = (id.clone(), dim);
        if !self.zoo_curves.contains_key(&key) {
            let n = resolve_norm(&id, Some(dim))?;
            let label = format!("{id}_d{dim}");
            let mut delta = delta_estimate(&n, &self.config.grids.eps, &self.budget)?;
            let mut rho = rho_estimate(&n, &merged(&[self.config.grids.tau.clone(), vec![0.5]], 2.0), &self.budget)?;
            delta.norm_id = label.clone();
            rho.norm_id = label;
            self.zoo_curves.insert(key.clone(), (delta, rho));
        }
        Ok(self.zoo_curves[&key].clone())
    }

    fn has_norm(&self, id: &str) -> bool {
        self.config.norms.iter().any(|n| n == id)
    }

    fn file_name(&self, path: &Path) -> String {
        path.strip_prefix(&self.out).unwrap_or(path).display().to_string()
    }

    pub fn run(&mut self, command: Command) -> Result<RunReport> {
        let mut report = RunReport::default();
        if matches!(command, Command::Moduli | Command::All) {
            report.records.extend(self.moduli()?);
        }
        if matches!(command, Command::Sets | Command::All) {
            report.records.extend(self.sets()?);
        }
        if matches!(command, Command::Hypo | Command::All) {
            report.records.extend(self.hypo()?);
        }
        report.sort();
        report.write(&self.out)?;
        Ok(report)
    }

    fn moduli(&mut self) -> Result<Vec<CheckRecord>> {
        let mut out = Vec::new();
        for id in self.config.norms.clone() {
            let n = resolve_norm(&id, None)?;
            let c = self.curves(&id, 2)?.clone();
            let mut files = Vec::new();
            for curve in c.all() {
                files.push(self.file_name(&curve.write_csv(&self.out)?));
            }
            let omega_vals: Vec<f64> = c.rho.args.iter().zip(&c.rho.values).map(|(t, v)| v / t).collect();
            let omega = ModulusCurve::new(c.rho.args.clone(), omega_vals, c.rho.direction, &id, "omega")?;
            files.push(self.file_name(&omega.write_csv(&self.out)?));
            out.push(CheckRecord::new(format!("moduli/{id}/estimates"), anchor::ESTIMATES, true, f64::NAN).with_artifacts(files));
            out.extend(curve_checks(&id, &n, &c, &self.config.grids.r)?);
        }
        if !self.config.norms.is_empty() {
            out.extend(self.psi_records()?);
        }
        Ok(out)
    }

    fn psi_records(&self) -> Result<Vec<CheckRecord>> {
        let knots = default_knots();
        let mut out = Vec::new();
        for (name, exponent) in [("linear", 1.5), ("power:1.5", 1.75)] {
            let psi = PsiSpec::builtin(name, &knots)?;
            let psi1 = psi1_regularize(&psi)?;
            let err = knots.iter().zip(&psi1.values).fold(0.0f64, |m, (t, v)| m.max((v - t.powf(exponent)).abs()));
            let squares: Vec<f64> = knots.iter().map(|t| t * t).collect();
            let d1 = decay_ratio(&knots, &psi1.values, &psi.values).unwrap_or(f64::INFINITY);
            let d2 = decay_ratio(&knots, &squares, &psi1.values).unwrap_or(f64::INFINITY);
            let pass = err <= 1e-9 && d1 <= 0.2 && d2 <= 0.2;
            let file = format!("psi1_{}.csv", name.replace(':', "_"));
            psi1.write_csv_to(File::create(self.out.join(&file))?)?;
            out.push(
                CheckRecord::new(format!("psi/psi1_{}", name.replace(':', "_")), anchor::PSI1, pass, 1e-9 - err)
                    .with_detail(format!("decay ratios {d1:.3e} and {d2:.3e}"))
                    .with_artifacts(vec![file]),
            );
        }
        Ok(out)
    }

    fn zoo(&self) -> Result<Vec<(SetEntry, ClosedSetSpec, NormSpec)>> {
        self.config
            .sets
            .iter()
            .map(|e| {
                let a = resolve_set(&e.id)?;
                let n = resolve_norm(&self.config.set_norm, Some(a.dim()))?;
                Ok((e.clone(), a, n))
            })
            .collect()
    }

    fn membership(&self, a: &ClosedSetSpec, n: &NormSpec, r: f64) -> Result<[CheckReport; 3]> {
        let s = &self.config.samples;
        let seed = self.config.seed;
        Ok([
            prox_smooth_certificate(a, n, r, s.shell, seed)?,
            omega_p_check(a, n, r, s.shell, seed)?,
            omega_n_check(a, n, r, s.boundary, seed)?,
        ])
    }

    fn sets(&mut self) -> Result<Vec<CheckRecord>> {
        let mut out = Vec::new();
        for (entry, a, n) in self.zoo()? {
            let reports = self.membership(&a, &n, entry.r)?;
            let key = entry.key();
            let names = [("prox_smooth", anchor::PROX), ("omega_p", anchor::OMEGA_P), ("omega_n", anchor::OMEGA_N)];
            for (rep, (name, anc)) in reports.iter().zip(names) {
                let member = rep.verdict.passed();
                let pass = match entry.expect {
                    Some(Membership::Member) | None => member,
                    Some(Membership::NonMember) => !member,
                };
                let mut detail = format!("{} in {} samples", if member { "member" } else { "non-member" }, rep.samples_used);
                if let Some(w) = &rep.witness {
                    detail.push_str(&format!("; witness {:?}", w.coords()));
                }
                out.push(CheckRecord::new(format!("sets/{key}/{name}"), anc, pass, rep.worst_margin).with_detail(detail));
            }
            let agree = reports.iter().all(|r| r.verdict == reports[0].verdict);
            out.push(CheckRecord::new(format!("sets/{key}/coherence"), anchor::COHERENCE, agree, f64::NAN));
        }
        for id in self.config.norms.clone() {
            let n = resolve_norm(&id, None)?;
            let rid = format!("sets/john/{id}");
            match john_ellipse_of(&n) {
                Ok(j) => {
                    let margin = (1.0 + SLACK - j.inner_ratio).min(2f64.sqrt() * (1.0 + SLACK) - j.outer_ratio);
                    out.push(
                        CheckRecord::new(rid, anchor::JOHN, margin >= 0.0, margin)
                            .with_detail(format!("matrix {:?}", j.matrix)),
                    );
                }
                Err(Error::Unsupported(why)) => out.push(CheckRecord::skipped(rid, anchor::JOHN, &why)),
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    fn hypo(&mut self) -> Result<Vec<CheckRecord>> {
        let mut out = Vec::new();
        let seed = self.config.seed;
        let pairs = self.config.samples.pairs;
        let ball_c = resolve_set("ball_complement")?;
        for id in self.config.norms.clone() {
            let n = resolve_norm(&id, None)?;
            let c = self.curves(&id, 2)?.clone();
            let gid = format!("hypo/gamma/{id}");
            if n.is_strictly_convex() && n.is_smooth() {
                let rows = gamma_sweep(&ball_c, &n, &self.config.gamma_eps, &c.rho, &c.lambda_plus, &self.budget)?;
                let file = format!("{id}_gamma.csv");
                write_gamma_csv(&rows, File::create(self.out.join(&file))?)?;
                let margin = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.gamma - r.lower_bound).min(r.upper_bound - r.gamma));
                out.push(CheckRecord::new(gid, anchor::GAMMA, margin >= -CURVE_TOL, margin).with_artifacts(vec![file]));
            } else {
                out.push(CheckRecord::skipped(gid, anchor::GAMMA, "norm is not uniformly convex and smooth"));
            }
            let psi = CurvePsi { curve: c.rho.clone(), scale: 1.0 / 17.0 };
            let rep = hypo_check(&ball_c, &n, &psi, 1.0, 2.0, pairs, seed)?;
            out.push(CheckRecord::new(format!("hypo/ball_rho17/{id}"), anchor::BALL_RHO17, rep.verdict.passed(), rep.worst_margin));
        }
        let zoo = self.zoo()?;
        let per_set = self.config.samples.touching.div_ceil(zoo.len().max(1));
        for (entry, a, n) in zoo {
            let key = entry.key();
            out.push(self.touching_record(&key, &a, &n, per_set)?);
            if !self.has_norm(&self.config.set_norm) {
                for (name, anc) in [("smooth_bound", anchor::SMOOTH_BOUND), ("convex_bound", anchor::CONVEX_BOUND), ("section", anchor::SECTION)] {
                    out.push(CheckRecord::skipped(format!("hypo/{key}/{name}"), anc, "dependency not computed: moduli of the set norm"));
                }
                continue;
            }
            let (delta, rho) = self.zoo_moduli(a.dim())?;
            let r = entry.r;
            let eps_max = f64::INFINITY;
            let in_omega_n = omega_n_check(&a, &n, r, self.config.samples.boundary, seed)?.verdict.passed();
            let smooth_id = format!("hypo/{key}/smooth_bound");
            let section_id = format!("hypo/{key}/section");
            if in_omega_n {
                let psi = CurvePsi { curve: rho.clone(), scale: 4.0 };
                let rep = hypo_check(&a, &n, &psi, r, eps_max, pairs, seed)?;
                out.push(CheckRecord::new(smooth_id, anchor::SMOOTH_BOUND, rep.verdict.passed(), rep.worst_margin));
                out.push(self.section_record(section_id, &a, &n, r, &rho)?);
            } else {
                out.push(CheckRecord::skipped(smooth_id, anchor::SMOOTH_BOUND, "set is not in the outward-ball class"));
                out.push(CheckRecord::skipped(section_id, anchor::SECTION, "set is not in the outward-ball class"));
            }
            let psi = CurvePsi { curve: delta, scale: 2.0 };
            let rep = hypo_check(&a, &n, &psi, r, eps_max, pairs, seed)?;
            let ok = !rep.verdict.passed() || in_omega_n;
            out.push(
                CheckRecord::new(format!("hypo/{key}/convex_bound"), anchor::CONVEX_BOUND, ok, rep.worst_margin)
                    .with_detail(format!("hypo {}, outward ball {}", rep.verdict.passed(), in_omega_n)),
            );
        }
        Ok(out)
    }

    fn section_record(&self, id: String, a: &ClosedSetSpec, n: &NormSpec, r: f64, rho: &ModulusCurve) -> Result<CheckRecord> {
        const BASES: usize = 5;
        let seed = self.config.seed;
        let bases: Vec<Vector> = a
            .boundary_sample(n, 50, seed)?
            .into_iter()
            .filter(|x| cone_directions(a, n, x).map(|d| !d.is_empty()).unwrap_or(false))
            .take(BASES)
            .collect();
        let delta = 0.5 * r;
        let per = self.config.samples.section.div_ceil(bases.len().max(1));
        let mut margin = f64::INFINITY;
        let mut used = 0;
        for (k, a0) in bases.iter().enumerate() {
            let rep = section_bound_check(a, n, r, rho, a0, delta, per, seed + k as u64)?;
            margin = margin.min(rep.epsilon - rep.worst_ratio);
            used += rep.samples_used;
        }
        Ok(CheckRecord::new(id, anchor::SECTION, margin >= -SLACK, margin)
            .with_detail(format!("{used} points around {} base points", bases.len())))
    }

    fn touching_record(&self, key: &str, a: &ClosedSetSpec, n: &NormSpec, count: usize) -> Result<CheckRecord> {
        let (z0s, z1s, epss) = touching_instances(a, n, count, self.config.seed)?;
        let mut failed = 0;
        let mut margin = f64::INFINITY;
        for ((z0, z1), eps) in z0s.iter().zip(&z1s).zip(&epss) {
            match touching_point_search(a, n, z0, z1, *eps) {
                Ok(tp) => {
                    let len = n.eval((z1 - z0).coords());
                    let gap = n.eval((&z0.axpy(tp.lambda, &(z1 - z0)) - &tp.y).coords());
                    margin = margin.min(eps * len - gap).min(eps * len - tp.p.dot(&(z1 - z0)));
                }
                Err(Error::ConstructionFailed(_)) => failed += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(CheckRecord::new(format!("hypo/{key}/touching"), anchor::TOUCHING, failed == 0 && margin > 0.0, margin)
            .with_detail(format!("{} instances, {failed} construction failures", z0s.len())))
    }
}

/// Seeded instances `(z0 outside A, z1 in A, eps in (0, 1))`; `z1`
/// alternates between boundary points and interior points when `A` has
/// interior in the bounding box.
pub fn touching_instances(a: &ClosedSetSpec, n: &NormSpec, count: usize, seed: u64) -> Result<(Vec<Vector>, Vec<Vector>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x70c4);
    let b = a.bounding_radius();
    let boundary = a.boundary_sample(n, count.max(1), seed)?;
    let random_point = |rng: &mut ChaCha8Rng| Vector::from((0..a.dim()).map(|_| rng.gen_range(-b..b)).collect::<Vec<_>>());
    let (mut z0s, mut z1s, mut epss) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..count {
        let z0 = loop {
            let z = random_point(&mut rng);
            if a.distance(n, &z)? > 1e-6 {
                break z;
            }
        };
        let mut z1 = boundary[k % boundary.len()].clone();
        if k % 2 == 1 {
            for _ in 0..100 {
                let z = random_point(&mut rng);
                if a.distance(n, &z)? == 0.0 {
                    z1 = z;
                    break;
                }
            }
        }
        z0s.push(z0);
        z1s.push(z1);
        epss.push(rng.gen_range(0.05..0.95));
    }
    Ok((z0s, z1s, epss))
}

fn at(c: &ModulusCurve, t: f64) -> Result<f64> {
    c.at_knot(t).map_or_else(|| c.interp(t), Ok)
}

/// Sandwich, ordering, doubling and exact-value records for one norm.
pub fn curve_checks(id: &str, n: &NormSpec, c: &NormCurves, r_grid: &[f64]) -> Result<Vec<CheckRecord>> {
    let mut plus = f64::INFINITY;
    let mut minus = f64::INFINITY;
    let mut order = f64::INFINITY;
    for &r in r_grid {
        let lp = at(&c.lambda_plus, r)?;
        let lm = at(&c.lambda_minus, r)?;
        plus = plus.min(lp - at(&c.rho, r / 2.0)?).min(at(&c.rho, 2.0 * r)? - lp);
        let d2 = at(&c.delta, 2.0 * r)?;
        minus = minus.min(d2 - lm).min(1.0 - (1.0 - r * r).sqrt() - d2);
        order = order.min(lm).min(lp - lm).min(r - lp);
    }
    let mut out = vec![
        CheckRecord::new(format!("moduli/{id}/lambda_plus_sandwich"), anchor::LAMBDA_PLUS, plus >= -CURVE_TOL, plus),
        CheckRecord::new(format!("moduli/{id}/lambda_minus_sandwich"), anchor::LAMBDA_MINUS, minus >= -CURVE_TOL, minus),
        CheckRecord::new(format!("moduli/{id}/lambda_order"), anchor::LAMBDA_ORDER, order >= -CURVE_TOL, order),
    ];
    let did = format!("moduli/{id}/doubling");
    if n.is_smooth() {
        let (lo, hi) = doubling_ratio(&c.rho)?;
        let margin = (lo - DOUBLING_BAND.0).min(DOUBLING_BAND.1 - hi);
        out.push(CheckRecord::new(did, anchor::DOUBLING, margin >= 0.0, margin).with_detail(format!("ratios in [{lo:.4}, {hi:.4}]")));
    } else {
        out.push(CheckRecord::skipped(did, anchor::DOUBLING, "norm is not uniformly smooth"));
    }
    if let NormKind::Lp { p } = n.kind() {
        if *p == 1.0 || p.is_infinite() {
            let mut err = 0.0f64;
            for &r in r_grid {
                err = err.max(at(&c.lambda_minus, r)?.abs()).max((at(&c.lambda_plus, r)? - r).abs());
            }
            out.push(CheckRecord::new(format!("moduli/{id}/lambda_exact"), anchor::LAMBDA_EXACT, err <= CURVE_TOL, CURVE_TOL - err));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Moduli,
    Sets,
    Hypo,
    All,
}
