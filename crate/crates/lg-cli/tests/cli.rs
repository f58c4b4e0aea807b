//! Command-line contract: exit codes, JSON shape, and byte-exact
//! serialization round-trips.

use std::path::{Path, PathBuf};
use std::process::Command;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn lg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lg")).args(args).output().unwrap()
}

#[test]
fn check_succeeds_on_good_files() {
    for f in ["nabla.lg", "quant.lg", "cut.lg", "eq.lg", "lists.lg", "nat.lg"] {
        let out = lg(&["check", corpus(f).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}: {:?}", f, out);
    }
}

#[test]
fn json_output_carries_the_format_marker() {
    for verb in ["check", "normalize", "level"] {
        let out = lg(&[verb, corpus("lists.lg").to_str().unwrap(), "--json"]);
        assert_eq!(out.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["format"], 1, "{} lacks the format marker", verb);
    }
}

#[test]
fn parse_errors_exit_2() {
    let dir = std::env::temp_dir().join("lg-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad_syntax.lg");
    std::fs::write(&bad, "pred p : o\ntheorem").unwrap();
    let out = lg(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = lg(&["check", dir.join("does_not_exist.lg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stratification_violations_exit_3() {
    for f in ["bad_level.lg", "bad_nominal.lg"] {
        let out = lg(&["check", corpus(f).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(3), "{}", f);
        let out = lg(&["level", corpus(f).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(3), "{} (level)", f);
    }
}

#[test]
fn failed_proofs_exit_1() {
    let dir = std::env::temp_dir().join("lg-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("wrong_proof.lg");
    std::fs::write(
        &f,
        "nominal type nm.\nnominal a : nm.\npred p : nm -> o.\n\
         theorem no : p a |- p a := (topr).\n",
    )
    .unwrap();
    let out = lg(&["check", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn normalized_output_round_trips_byte_exactly() {
    let dir = std::env::temp_dir().join("lg-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("normalized.json");
    let out = lg(&[
        "normalize",
        corpus("cut.lg").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["format"], 1);
    for item in v["derivations"].as_array().unwrap() {
        let d: lg::Derivation = serde_json::from_value(item["derivation"].clone()).unwrap();
        let once = serde_json::to_string(&d).unwrap();
        let again: lg::Derivation = serde_json::from_str(&once).unwrap();
        assert_eq!(d, again);
        assert_eq!(once, serde_json::to_string(&again).unwrap());
    }
}

#[test]
fn translation_round_trips_through_files() {
    let dir = std::env::temp_dir().join("lg-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let fwd = dir.join("folnb.json");
    let out = lg(&[
        "translate",
        corpus("nabla.lg").to_str().unwrap(),
        "--to",
        "folnb",
        "--out",
        fwd.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    let out = lg(&[
        "translate",
        corpus("nabla.lg").to_str().unwrap(),
        "--to",
        "lg",
        "--input",
        fwd.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["theorems"].as_array().unwrap().len(), 7);
}

#[test]
fn unify_reports_results_over_the_theory() {
    let file = corpus("nat.lg");
    let out = lg(&[
        "unify",
        file.to_str().unwrap(),
        "--sig",
        "X : nt",
        "--left",
        "s X",
        "--right",
        "s (s z)",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "unifiable");
    assert_eq!(v["bindings"][0]["var"], "X");
    let out = lg(&[
        "unify",
        file.to_str().unwrap(),
        "--left",
        "z",
        "--right",
        "s z",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
