use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use omega_cube::contraction::ContractionDoc;
use omega_cube::models::{build_product, pair_groupoid, partial_isometry, seed_presentation};
use omega_cube::strict::{eval_term, GeneratorAssignment};
use omega_cube::{Mode, TermStore, TruncationConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omega-cube"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn missing_input_is_an_io_error() {
    let o = run(&["validate", "/nonexistent/table.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("reading"));
}

#[test]
fn check_all_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(code(&run(&["check-all", "--seed", "7", "--out", path(&a)])), 0);
    assert_eq!(code(&run(&["check-all", "--seed", "7", "--out", path(&b)])), 0);
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!x.is_empty());
    assert_eq!(x, y);
    let v: Value = serde_json::from_slice(&x).unwrap();
    assert_eq!(v["config"]["seed"], 7);
    assert_eq!(v["result"]["criteria"].as_array().unwrap().len(), 7);
}

#[test]
fn product_fixture_validates() {
    let dir = tempfile::tempdir().unwrap();
    let c1 = dir.path().join("pi.json");
    let c2 = dir.path().join("pair.json");
    let table = dir.path().join("table.json");
    std::fs::write(&c1, partial_isometry().to_json()).unwrap();
    std::fs::write(&c2, pair_groupoid(2).to_json()).unwrap();
    let o = run(&["product", path(&c1), path(&c2), "--out", path(&table), "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&o);
    assert_eq!(report["result"]["cells"], 48);
    assert_eq!(report["config"]["truncation"]["max_dim"], 2);

    let o = run(&["validate", path(&table)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 violations"));
    assert_eq!(code(&run(&["validate", path(&c1)])), 0);
}

#[test]
fn broken_category_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("broken.json");
    let mut doc = partial_isometry().to_doc();
    doc.star.as_mut().unwrap().insert("u".into(), "u".into());
    std::fs::write(&c, serde_json::to_string(&doc).unwrap()).unwrap();
    let o = run(&["validate", path(&c), "--json"]);
    assert_eq!(code(&o), 1);
    assert!(!json(&o)["result"]["report"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn unit_law_is_decided_equal() {
    let o = run(&[
        "decide",
        "--depth",
        "3",
        "--t1",
        "comp[1](gen(f),id[1](gen(a)))",
        "--t2",
        "gen(f)",
        "--json",
    ]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["result"]["decision"]["verdict"], "Equal");
    assert_eq!(v["config"]["truncation"]["term_depth"], 3);
}

#[test]
fn word_separators_give_not_equal() {
    let args = [
        "decide", "--max-dim", "1", "--dirs", "1", "--depth", "3", "--t1", "gen(f)", "--t2", "dual[1](gen(g))",
    ];
    assert_eq!(code(&run(&args)), 1);
    let mut with_words = args.to_vec();
    with_words.extend(["--words", "--json"]);
    let o = run(&with_words);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["result"]["decision"]["verdict"], "NotEqual");
}

#[test]
fn eval_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TruncationConfig::new(2, 2, 1);
    let t = Arc::new(build_product(&[partial_isometry(), pair_groupoid(2)], &cfg).unwrap());
    let p = seed_presentation(TruncationConfig::default());
    let a = GeneratorAssignment::random(&p, t.clone(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let table = dir.path().join("table.json");
    let map = dir.path().join("map.json");
    std::fs::write(&table, t.to_json()).unwrap();
    std::fs::write(&map, a.map().to_json()).unwrap();

    let term = "dual[1](comp[1](gen(f),gen(g)))";
    let o = run(&["eval", path(&table), "--assign", path(&map), "--term", term, "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut store = TermStore::new(p);
    let x = store.parse(term, Mode::Magma, &omega_cube::term::NoCertificate).unwrap();
    let want = t.underlying().qualified(eval_term(&store, x, &a).unwrap());
    assert_eq!(json(&o)["result"]["value"], want.as_str());
}

#[test]
fn contract_writes_the_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("contraction.json");
    let o = run(&["contract", "--depth", "2", "--out", path(&out)]);
    assert_eq!(code(&o), 0);
    let doc: ContractionDoc = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc.stages.len(), 3);
    assert!(!doc.kappa.is_empty());
}

#[test]
fn enumerate_and_oracle_report_their_config() {
    let o = run(&["enumerate", "--depth", "1", "--json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["result"]["total"], 15);

    let o = Command::new(env!("CARGO_BIN_EXE_omega-cube"))
        .args(["oracle", "--depth", "4", "--json"])
        .env("OMEGA_CUBE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["result"]["unknown"], 0);
    assert_eq!(v["config"]["truncation"]["term_depth"], 4);
    assert_eq!(code(&run(&["oracle", "--max-dim", "2", "--dirs", "2"])), 2);
}
