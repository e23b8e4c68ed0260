use boxcast_cli::fixtures;
use boxcast_cli::suite::{self, run_suite, Scope, SuiteParams};
use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn boxcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boxcast")).args(args).env("BOXCAST_THREADS", "1").output().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn path(name: &str) -> String {
    fixture(name).display().to_string()
}

#[test]
fn committed_fixtures_match_the_generator() {
    for (name, text) in fixtures::generate() {
        let on_disk = std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(on_disk == text, "{name} is stale; run `boxcast gen-fixtures fixtures`");
    }
}

#[test]
fn pr_box_is_outside_the_local_set() {
    let out = boxcast(&["check", &path("pr_box.json"), "--kind", "local"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["results"]["inside"], false);
    assert!(r["results"]["margin"].as_f64().unwrap() > 0.0);
    assert!(r["results"]["functional"]["functional"].is_array());
}

#[test]
fn uniform_box_is_local() {
    let out = boxcast(&["check", &path("uniform.json"), "--kind", "local"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["results"]["inside"], true);
    assert_eq!(r["command"], "check");
    assert_eq!(r["inputs_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn malformed_input_exits_with_two() {
    let dir = std::env::temp_dir().join(format!("boxcast-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\"scenario\": ").unwrap();
    let out = boxcast(&["check", bad.to_str().unwrap(), "--kind", "ns"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("input error"));
    // well-formed JSON of the wrong kind
    let out = boxcast(&["check", &path("pr_box.json"), "--kind", "unsteerable"]);
    assert_eq!(out.status.code(), Some(2));
    let out = boxcast(&["check", bad.with_file_name("missing.json").to_str().unwrap(), "--kind", "ns"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn memberships_of_the_other_fixtures() {
    assert_eq!(boxcast(&["check", &path("pr_box.json"), "--kind", "ns"]).status.code(), Some(0));
    assert_eq!(boxcast(&["check", &path("pr_squared.json"), "--kind", "lrns"]).status.code(), Some(1));
    assert_eq!(boxcast(&["check", &path("werner_0.3.json"), "--kind", "unsteerable"]).status.code(), Some(0));
    let out = boxcast(&["check", &path("werner_0.9.json"), "--kind", "unsteerable"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["results"]["status"], "no-model-within-budget");
    assert!(r["results"]["violation"].as_f64().unwrap() > 0.0);
}

#[test]
fn text_format_renders_the_same_content() {
    let json = report(&boxcast(&["check", &path("pr_box.json"), "--kind", "local"]));
    let out = boxcast(&["check", &path("pr_box.json"), "--kind", "local", "--format", "text"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(&format!("inputs_digest: {}", json["inputs_digest"].as_str().unwrap())));
    assert!(text.contains(&format!("margin: {}", json["results"]["margin"])));
    assert!(text.contains("inside: false"));
}

#[test]
fn elr_of_fixtures() {
    let local = report(&boxcast(&["elr", &path("local_vertex.json")]));
    assert!(local["results"]["value"].as_f64().unwrap() <= 1e-6);
    let a = report(&boxcast(&["elr", &path("pr_box.json"), "--seed", "1"]));
    let b = report(&boxcast(&["elr", &path("pr_box.json"), "--seed", "2"]));
    let (va, vb) = (a["results"]["value"].as_f64().unwrap(), b["results"]["value"].as_f64().unwrap());
    assert!(va > 0.1);
    assert!((va - vb).abs() <= 1e-3, "{va} vs {vb}");
    for key in ["setting", "witness_weights", "ladder"] {
        assert!(a["results"][key].is_array(), "{key}");
    }
}

#[test]
fn elr_writes_the_witness() {
    let w = std::env::temp_dir().join(format!("boxcast-witness-{}.json", std::process::id()));
    let out = boxcast(&["elr", &path("pr_box.json"), "--witness", w.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let b: boxcast::Behavior = serde_json::from_str(&std::fs::read_to_string(&w).unwrap()).unwrap();
    assert!(boxcast::polytopes::is_local(&b).unwrap());
}

#[test]
fn steering_bound_of_an_unsteerable_fixture() {
    let out = boxcast(&["steering", &path("werner_0.3.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(report(&out)["results"]["upper_bound"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn out_flag_writes_the_report() {
    let dest = std::env::temp_dir().join(format!("boxcast-report-{}.json", std::process::id()));
    let out = boxcast(&["check", &path("uniform.json"), "--kind", "ns", "--out", dest.to_str().unwrap()]);
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&dest).unwrap()).unwrap();
    assert_eq!(r["results"]["inside"], true);
}

#[test]
fn tampered_chain_rule_fails_by_name() {
    let p = SuiteParams { seed: 0, quick: true, inject: Some("chain-rule".into()) };
    let c = suite::box_chain_rule(&p);
    assert_eq!(c.name, "box_chain_rule");
    assert!(!c.passed);
    assert!(!c.failures.is_empty());
    assert!(suite::box_chain_rule(&SuiteParams { inject: None, ..p }).passed);
}

#[test]
fn assemblage_scope_runs_only_assemblage_checks() {
    let checks = run_suite(Scope::Assemblages, &SuiteParams { seed: 3, quick: true, inject: None });
    let names: Vec<&str> = checks.iter().map(|c| c.name).collect();
    assert!(names.contains(&"thm2_no_broadcast"));
    assert!(!names.contains(&"box_chain_rule"));
    for c in &checks {
        assert!(c.passed, "{}: {:?}", c.name, c.failures);
    }
}
