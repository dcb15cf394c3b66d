use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_banachlab"))
}

fn write_config(dir: &Path, json: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn verdict(r: &Value, id: &str) -> String {
    r["records"].as_array().unwrap().iter().find(|x| x["id"] == id).unwrap_or_else(|| panic!("no record {id}"))["verdict"]
        .as_str()
        .unwrap()
        .to_string()
}

#[test]
fn moduli_writes_curves_for_euclid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"norms": ["euclid"], "budget": "low"}"#);
    let out = tmp.path().join("out");
    let st = bin().args(["moduli", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    for m in ["delta", "rho", "lambda_minus", "lambda_plus", "omega"] {
        let text = std::fs::read_to_string(out.join(format!("euclid_{m}.csv"))).unwrap();
        assert!(text.starts_with("arg,value,direction\n"), "{m}");
    }
    let r = report(&out);
    assert_eq!(verdict(&r, "moduli/euclid/lambda_plus_sandwich"), "pass");
    assert_eq!(verdict(&r, "moduli/euclid/doubling"), "pass");
}

#[test]
fn out_of_domain_grid_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"grids": {"eps": [0.5, 2.5]}}"#);
    let st = bin().args(["moduli", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("o")).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn empty_norm_list_gives_empty_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"norms": []}"#);
    let out = tmp.path().join("o");
    let st = bin().args(["moduli", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    assert!(report(&out)["records"].as_array().unwrap().is_empty());
}

#[test]
fn two_point_set_without_expectation_fails_coherently() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"norms": [], "sets": [{"id": "two_points", "R": 1.5}, {"id": "two_points", "R": 0.5}], "budget": "low"}"#,
    );
    let out = tmp.path().join("o");
    let st = bin().args(["sets", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(1));
    let r = report(&out);
    for check in ["prox_smooth", "omega_p", "omega_n"] {
        assert_eq!(verdict(&r, &format!("sets/two_points@1.5/{check}")), "fail");
        assert_eq!(verdict(&r, &format!("sets/two_points@0.5/{check}")), "pass");
    }
    assert_eq!(verdict(&r, "sets/two_points@1.5/coherence"), "pass");
}

#[test]
fn missing_moduli_dependency_is_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"norms": ["l3"], "sets": [{"id": "halfspace", "R": 2}], "budget": "low"}"#);
    let out = tmp.path().join("o");
    bin().args(["hypo", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    let r = report(&out);
    let rec = r["records"].as_array().unwrap().iter().find(|x| x["id"] == "hypo/halfspace@2/section").unwrap();
    assert_eq!(rec["verdict"], "skipped");
    assert!(rec["detail"].as_str().unwrap().contains("dependency not computed"));
    assert_eq!(verdict(&r, "hypo/halfspace@2/touching"), "pass");
    assert!(out.join("l3_gamma.csv").exists());
    let head = std::fs::read_to_string(out.join("l3_gamma.csv")).unwrap();
    assert!(head.starts_with("eps,gamma,lower_bound,upper_bound\n"));
}

#[test]
fn seed_change_keeps_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"norms": ["euclid"], "sets": [{"id": "ball_complement", "R": 1}, {"id": "halfspace", "R": 10}], "budget": "low"}"#);
    let mut verdicts = Vec::new();
    for seed in ["1", "2"] {
        let out = tmp.path().join(seed);
        bin().args(["all", "--seed", seed, "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
        let r = report(&out);
        let v: Vec<(String, String)> = r["records"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| (x["id"].as_str().unwrap().to_string(), x["verdict"].as_str().unwrap().to_string()))
            .collect();
        verdicts.push(v);
    }
    assert_eq!(verdicts[0], verdicts[1]);
}

#[test]
fn unknown_command_is_rejected() {
    let st = bin().args(["plots", "--out", "/tmp/x"]).status().unwrap();
    assert_ne!(st.code(), Some(0));
}
