//! Suite configuration and the registry of named norms and test sets.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moduli::{geometric_grid, linear_grid, SearchBudget};
use crate::norm::NormSpec;
use crate::sets::{cylinder_extend, ClosedSetSpec, Halfspace};
use crate::vector::Vector;

/// Fixed seed for the random members of the norm registry, so that the
/// sampling seed never changes which norms are tested.
const REGISTRY_SEED: u64 = 0x5eed_0b1a;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    NonMember,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetEntry {
    pub id: String,
    #[serde(rename = "R")]
    pub r: f64,
    /// Expected classification; when given, membership records report
    /// agreement with it instead of the raw classification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Membership>,
}

impl SetEntry {
    pub fn key(&self) -> String {
        format!("{}@{}", self.id, self.r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_tau")]
    pub tau: Vec<f64>,
    #[serde(default = "default_r")]
    pub r: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids { eps: default_eps(), tau: default_tau(), r: default_r() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Samples {
    #[serde(default = "d300")]
    pub shell: usize,
    #[serde(default = "d200")]
    pub boundary: usize,
    #[serde(default = "d400")]
    pub pairs: usize,
    #[serde(default = "d1000")]
    pub section: usize,
    #[serde(default = "d100")]
    pub touching: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Samples { shell: d300(), boundary: d200(), pairs: d400(), section: d1000(), touching: d100() }
    }
}

fn d100() -> usize {
    100
}
fn d200() -> usize {
    200
}
fn d300() -> usize {
    300
}
fn d400() -> usize {
    400
}
fn d1000() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default = "default_norms")]
    pub norms: Vec<String>,
    #[serde(default = "default_sets")]
    pub sets: Vec<SetEntry>,
    /// Norm used for the set zoo; must also be listed in `norms` for the
    /// checks that need its moduli.
    #[serde(default = "default_set_norm")]
    pub set_norm: String,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default = "default_gamma_eps")]
    pub gamma_eps: Vec<f64>,
    #[serde(default)]
    pub samples: Samples,
    #[serde(default = "default_budget")]
    pub budget: String,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

fn default_norms() -> Vec<String> {
    ["euclid", "l1.5", "l3", "l1", "linf", "polygon_random", "ellipse_random"].map(String::from).to_vec()
}

fn default_set_norm() -> String {
    "euclid".into()
}

fn default_sets() -> Vec<SetEntry> {
    use Membership::*;
    let e = |id: &str, r: f64, m: Membership| SetEntry { id: id.into(), r, expect: Some(m) };
    vec![
        e("ball_complement", 0.5, Member),
        e("ball_complement", 1.0, Member),
        e("halfspace", 10.0, Member),
        e("ball", 1.0, Member),
        e("two_points", 0.5, Member),
        e("two_points", 1.5, NonMember),
        e("square_complement", 0.5, NonMember),
        e("cylinder", 1.0, Member),
    ]
}

fn default_eps() -> Vec<f64> {
    linear_grid(0.05, 2.0, 0.05)
}

fn default_tau() -> Vec<f64> {
    geometric_grid(1.0, 29)
}

fn default_r() -> Vec<f64> {
    linear_grid(0.025, 1.0, 0.025)
}

fn default_gamma_eps() -> Vec<f64> {
    vec![0.05, 0.1, 0.2, 0.4]
}

fn default_budget() -> String {
    "default".into()
}

fn check_grid(name: &str, grid: &[f64], top: f64) -> Result<()> {
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config(format!("{name} grid is not strictly increasing")));
        }
    }
    if let Some(bad) = grid.iter().find(|&&v| !(v > 0.0 && v <= top)) {
        return Err(Error::Config(format!("{name} grid value {bad} outside (0, {top}]")));
    }
    Ok(())
}

impl SuiteConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: SuiteConfig = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_grid("eps", &self.grids.eps, 2.0)?;
        check_grid("tau", &self.grids.tau, 1.0)?;
        check_grid("r", &self.grids.r, 1.0)?;
        if let Some(bad) = self.gamma_eps.iter().find(|&&v| !(v > 0.0 && v <= 0.5)) {
            return Err(Error::Config(format!("gamma eps {bad} outside (0, 0.5]")));
        }
        SearchBudget::named(&self.budget)?;
        for id in &self.norms {
            resolve_norm(id, None).map_err(|e| Error::Config(format!("norm {id:?}: {e}")))?;
        }
        for s in &self.sets {
            if !(s.r > 0.0 && s.r.is_finite()) {
                return Err(Error::Config(format!("set {:?} has invalid R {}", s.id, s.r)));
            }
            let set = resolve_set(&s.id).map_err(|e| Error::Config(format!("set {:?}: {e}", s.id)))?;
            resolve_norm(&self.set_norm, Some(set.dim())).map_err(|e| Error::Config(format!("set norm: {e}")))?;
        }
        Ok(())
    }

    pub fn budget(&self) -> SearchBudget {
        SearchBudget::named(&self.budget).expect("validated")
    }
}

/// Norms by id: `euclid`, `l<p>` (`l1.5`, `linf`, ...), `polygon_random`,
/// `ellipse_random`, `hexagon`. `dim` overrides the default dimension two
/// for the `lp` family.
pub fn resolve_norm(id: &str, dim: Option<usize>) -> Result<NormSpec> {
    let d = dim.unwrap_or(2);
    let planar = |n: NormSpec| {
        if d == 2 {
            Ok(n)
        } else {
            Err(Error::Config(format!("{id} exists only in the plane")))
        }
    };
    match id {
        "euclid" => Ok(NormSpec::euclid(d)),
        "polygon_random" => planar(NormSpec::random_polygon(&mut ChaCha8Rng::seed_from_u64(REGISTRY_SEED), 4)),
        "ellipse_random" => planar(NormSpec::random_ellipse(&mut ChaCha8Rng::seed_from_u64(REGISTRY_SEED + 1))),
        "hexagon" => planar(NormSpec::regular_polygon(6, 1.0)?),
        _ => {
            let p = id.strip_prefix('l').ok_or_else(|| Error::Config(format!("unknown norm id {id:?}")))?;
            let p = if p == "inf" { f64::INFINITY } else { p.parse().map_err(|_| Error::Config(format!("unknown norm id {id:?}")))? };
            NormSpec::lp(p, d)
        }
    }
}

/// Test sets by id, all built around the unit ball of the chosen norm or the
/// coordinate square.
pub fn resolve_set(id: &str) -> Result<ClosedSetSpec> {
    let hs = |x: f64, y: f64| Halfspace { normal: Vector::xy(x, y), offset: 1.0 };
    match id {
        "ball_complement" => ClosedSetSpec::ball_complement(Vector::zeros(2), 1.0, 1.2),
        "ball" => ClosedSetSpec::ball(Vector::zeros(2), 1.0, 2.0),
        "halfspace" => ClosedSetSpec::halfspace(Vector::xy(0.0, 1.0), 0.0, 3.0),
        "two_points" => ClosedSetSpec::finite_points(vec![Vector::xy(-1.0, 0.0), Vector::xy(1.0, 0.0)], 2.6),
        "square_complement" => ClosedSetSpec::polytope_complement(vec![hs(1.0, 0.0), hs(-1.0, 0.0), hs(0.0, 1.0), hs(0.0, -1.0)], 1.2),
        "cylinder" => cylinder_extend(ClosedSetSpec::ball_complement(Vector::zeros(2), 1.0, 1.2)?, 3, vec![0, 1]),
        other => Err(Error::Config(format!("unknown set id {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = SuiteConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.norms.len(), 7);
        assert_eq!(cfg.sets.len(), 8);
    }

    #[test]
    fn rejects_out_of_domain_grids() {
        let cfg: SuiteConfig = serde_json::from_str(r#"{"grids": {"eps": [0.5, 2.5]}}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg: SuiteConfig = serde_json::from_str(r#"{"norms": ["l0.5"]}"#).unwrap();
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<SuiteConfig>(r#"{"unknown": 1}"#).is_err());
    }

    #[test]
    fn registry_ids() {
        assert_eq!(resolve_norm("linf", None).unwrap().label(), "linf");
        assert_eq!(resolve_norm("l1.5", Some(3)).unwrap().dim(), 3);
        assert!(resolve_norm("hexagon", Some(3)).is_err());
        assert_eq!(resolve_set("cylinder").unwrap().dim(), 3);
        // registry norms do not depend on anything but their id
        assert_eq!(resolve_norm("polygon_random", None).unwrap(), resolve_norm("polygon_random", None).unwrap());
    }
}
