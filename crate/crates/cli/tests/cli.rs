use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use foon::format::parse_subgraph;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

fn foon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foon")).args(args).output().unwrap()
}

fn path(rel: &str) -> String {
    fixture(rel).to_string_lossy().into_owned()
}

fn units_in(rel: &str) -> usize {
    parse_subgraph(&fs::read_to_string(fixture(rel)).unwrap()).unwrap().units.len()
}

#[test]
fn merging_disjoint_fixtures_keeps_every_unit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.foon");
    let o = foon(&[
        "merge",
        &path("subgraphs/fried_egg.foon"),
        &path("subgraphs/cereal.foon"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let merged = parse_subgraph(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(merged.units.len(), units_in("subgraphs/fried_egg.foon") + units_in("subgraphs/cereal.foon"));
}

#[test]
fn merging_a_file_with_itself_dedups() {
    let f = path("subgraphs/salsa.foon");
    let o = foon(&["merge", &f, &f]);
    assert!(o.status.success());
    let merged = parse_subgraph(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(merged.units.len(), units_in("subgraphs/salsa.foon"));
}

#[test]
fn optimal_retrieval_on_the_dicing_scene() {
    let o = foon(&[
        "retrieve",
        &path("subgraphs/tomato_dice.foon"),
        "--goal",
        &path("goals/diced_tomato.foon"),
        "--kitchen",
        &path("kitchens/tomato_kitchen.foon"),
        "--model",
        &path("rates.tsv"),
        "--optimal",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let tree = parse_subgraph(&String::from_utf8(o.stdout).unwrap()).unwrap();
    let motions: Vec<&str> = tree.units.iter().map(|u| u.motion.label.as_str()).collect();
    assert_eq!(motions, ["pick-and-place", "dice"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("0.855"));
}

#[test]
fn unreachable_goal_exits_one() {
    let o = foon(&[
        "retrieve",
        &path("subgraphs/tomato_salad.foon"),
        "--goal",
        &path("goals/unreachable.foon"),
        "--kitchen",
        &path("kitchens/tomato_kitchen.foon"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Unsolvable"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(foon(&["merge", "--bogus"]).status.code(), Some(2));
    assert_eq!(foon(&["retrieve", "x.foon", "--goal", "g", "--kitchen", "k", "--optimal"]).status.code(), Some(2));
    assert_eq!(foon(&["validate", "/nonexistent/file.foon"]).status.code(), Some(2));
}

#[test]
fn config_without_operators_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("scenarios/tomato/run.cfg")).unwrap();
    let base = fixture("scenarios/tomato");
    let rewritten: String = text
        .lines()
        .filter(|l| !l.starts_with("operators"))
        .map(|l| match l.split_once('=') {
            Some((k, v)) if !matches!(k.trim(), "seed" | "trials") => format!("{k}= {}\n", base.join(v.trim()).display()),
            _ => format!("{l}\n"),
        })
        .collect();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, rewritten).unwrap();
    let o = foon(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("operators"));
}

#[test]
fn validate_reports_each_fixture() {
    let o = foon(&["validate", &path("subgraphs/tomato_dice.foon"), &path("subgraphs/tea.foon")]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.ends_with("units")).count(), 2);
}

#[test]
fn pddl_export_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let (d, p) = (dir.path().join("d.pddl"), dir.path().join("p.pddl"));
    let o = foon(&[
        "pddl",
        &path("subgraphs/pour_water.foon"),
        "--init",
        &path("scenarios/pour/init.txt"),
        "--domain-out",
        d.to_str().unwrap(),
        "--problem-out",
        p.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let problem = fs::read_to_string(p).unwrap();
    assert!(fs::read_to_string(d).unwrap().starts_with("(define (domain"));
    assert!(problem.contains("(in water bowl)"), "{problem}");
}
