use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const PLUS: &str = "state 0 owner=max prio=0\nedge 0 0 reward=1\n";
const MINUS: &str = "state 0 owner=max prio=1\nedge 0 0 reward=-1\n";
const GAMBLE: &str = "game gamble
state 0 owner=max prio=0
state 1 owner=ran prio=0
state 2 owner=max prio=1
edge 0 1 reward=0
edge 0 2 reward=0
edge 1 0 reward=1 prob=2/3
edge 1 0 reward=-1 prob=1/3
edge 2 2 reward=1
edge 2 0 reward=0
";

fn enpar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enpar")).args(args).env_remove("ENPAR_CAPS").output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn file(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn plus_loop_wins_with_zero_credit() {
    let d = tempfile::tempdir().unwrap();
    let g = file(d.path(), "plus.game", PLUS);
    let v = json(&enpar(&["solve", &g, "--objective", "energy-parity", "--state", "0", "--k", "0"]));
    assert_eq!(v["verdict"], true);
    assert_eq!(v["W"], serde_json::json!([0]));
}

#[test]
fn expect_turns_no_into_status_one() {
    let d = tempfile::tempdir().unwrap();
    let g = file(d.path(), "minus.game", MINUS);
    let out = enpar(&["solve", &g, "--state", "0", "--expect"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], false);
}

#[test]
fn malformed_game_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let g = file(d.path(), "bad.game", "state 0 owner=max prio=0\nedge 0 3 reward=1\n");
    let out = enpar(&["solve", &g]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().starts_with("E_"));
    assert_eq!(enpar(&["solve"]).status.code(), Some(2));
    assert_eq!(enpar(&["generate"]).status.code(), Some(2), "seed is required");
}

#[test]
fn unwinnable_credit_is_null() {
    let d = tempfile::tempdir().unwrap();
    let g = file(d.path(), "minus.game", MINUS);
    let v = json(&enpar(&["min-credit", &g, "--state", "0"]));
    assert!(v["credit"].is_null());
    let g = file(d.path(), "gamble.game", GAMBLE);
    let v = json(&enpar(&["min-credit", &g]));
    assert_eq!(v["credits"]["0"], 0);
}

#[test]
fn resource_caps_map_to_status_three() {
    let d = tempfile::tempdir().unwrap();
    let g = file(d.path(), "gamble.game", GAMBLE);
    let out = Command::new(env!("CARGO_BIN_EXE_enpar")).args(["solve", &g]).env("ENPAR_CAPS", "product=2").output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "E_RESOURCE_CAP");
    assert_eq!(enpar(&["--caps", "product=0", "solve", &g]).status.code(), Some(2));
}

#[test]
fn bailout_and_gain_objectives() {
    let d = tempfile::tempdir().unwrap();
    let g = file(d.path(), "gamble.game", GAMBLE);
    let v = json(&enpar(&["solve", &g, "--objective", "bailout", "--k", "0"]));
    assert_eq!(v["verdicts"]["0"], true);
    let g = file(d.path(), "minus.game", MINUS);
    let v = json(&enpar(&["solve", &g, "--objective", "gain"]));
    assert_eq!(v["verdicts"]["0"], false);
}

#[test]
fn synthesize_then_simulate() {
    let d = tempfile::tempdir().unwrap();
    let g = file(d.path(), "gamble.game", GAMBLE);
    let s = d.path().join("s.json");
    let s = s.to_str().unwrap();
    let v = json(&enpar(&["synthesize", &g, "--state", "0", "--k", "0", "--out", s, "--three-mode"]));
    assert_eq!(v["modes"], "three-mode");
    assert_eq!(v["validation"]["energy_safe"], true);
    assert_eq!(v["validation"]["switching_ok"], true);
    let args = ["simulate", &g, "--strategy", s, "--trials", "40", "--seed", "9", "--horizon", "2000"];
    let a = enpar(&args);
    let v = json(&a);
    assert_eq!(v["stats"]["violations"], 0);
    assert_eq!(v["stats"]["start_to_gain"], 40);
    assert_eq!(a.stdout, enpar(&args).stdout, "seeded runs repeat");
}

#[test]
fn transforms_come_with_provenance() {
    let d = tempfile::tempdir().unwrap();
    let g = file(d.path(), "gamble.game", GAMBLE);
    for to in ["g-prime", "g-doubleprime", "g1", "g2", "g3"] {
        let out = d.path().join(format!("{to}.game"));
        let v = json(&enpar(&["transform", &g, "--to", to, "--out", out.to_str().unwrap()]));
        let text = std::fs::read_to_string(&out).unwrap();
        let states = text.lines().filter(|l| l.starts_with("state")).count();
        assert_eq!(v["states"], states);
        let side: Value = serde_json::from_str(&std::fs::read_to_string(v["provenance"].as_str().unwrap()).unwrap()).unwrap();
        assert_eq!(side["target"], to);
        assert_eq!(side["origin"].as_array().unwrap().len(), states);
        assert_eq!(side["origin"][0], 0);
        let again = json(&enpar(&["solve", out.to_str().unwrap(), "--objective", "gain"]));
        assert!(again["verdicts"].is_object(), "{to} reparses");
    }
}

#[test]
fn certificates_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let g = file(d.path(), "gamble.game", GAMBLE);
    let np = d.path().join("np.json");
    let conp = d.path().join("conp.json");
    json(&enpar(&[
        "solve", &g, "--objective", "gain", "--emit-np", np.to_str().unwrap(), "--emit-conp", conp.to_str().unwrap(),
    ]));
    let v = json(&enpar(&["check-cert", &g, "--np", np.to_str().unwrap()]));
    assert_eq!(v["wins_gain"]["0"], true);
    let v = json(&enpar(&["check-cert", &g, "--conp", conp.to_str().unwrap(), "--state", "0"]));
    assert_eq!(v["loses_gain"]["0"], false);
    let g = file(d.path(), "minus.game", MINUS);
    let empty = file(d.path(), "empty.json", "{\"choice\": {}}");
    let v = json(&enpar(&["check-cert", &g, "--conp", &empty]));
    assert_eq!(v["loses_gain"]["0"], true);
    let out = enpar(&["check-cert", &g, "--np", &empty, "--conp", &empty]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_compare_agrees() {
    let v = json(&enpar(&["oracle-compare", "--trials", "25", "--seed", "5", "--max-states", "3"]));
    assert_eq!(v["mismatches"], serde_json::json!([]));
    assert!(v["queries"].as_u64().unwrap() > 0);
}

#[test]
fn generate_is_seeded() {
    let a = enpar(&["generate", "--seed", "12", "--format", "text"]);
    let b = enpar(&["generate", "--seed", "12", "--format", "text"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&enpar(&["generate", "--seed", "3", "--max-states", "1"]));
    assert_eq!(v["states"].as_array().unwrap().len(), 1);
    assert_eq!(v["edges"][0]["dst"], 0);
    let v = json(&enpar(&["generate", "--seed", "3", "--max-states", "3", "--exact-size", "--density", "1"]));
    assert_eq!(v["edges"].as_array().unwrap().len(), 9);
}
