//! End-to-end run from a flat configuration file.
//!
//! ```text
//! # comments start with #
//! subgraph     = ../../subgraphs/tomato_dice.foon
//! subgraph     = ../../subgraphs/salsa.foon
//! rules        = rules.tsv
//! observations = observations.json
//! operators    = ../../../data/primitives.ops
//! goal_map     = ../../../data/goal_map.txt
//! init         = init.txt
//! skills       = skills.json
//! anchors      = anchors.json
//! model        = rates.tsv
//! goal         = goal.foon
//! seed         = 42
//! trials       = 10000
//! ```
//!
//! Relative paths resolve against the configuration file's directory.
//! Optional keys: `seed` (0), `trials` (10000), `depth_bound` (8),
//! `max_trees` (64) and `out` (an output directory).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::dmp::DmpParams;
use crate::format::{parse_objects, parse_subgraph, serialize_objects, serialize_subgraph};
use crate::grounding::{ground_scene, parse_observations, parse_rules};
use crate::merge::merge;
use crate::model::{FoonGraph, FunctionalUnit};
use crate::planfoon::{decompose_all, ground_plan, parse_goal_map, parse_init, parse_operators, plan_view, SkillStep};
use crate::retrieval::{retrieve_optimal, score_tree, SuccessModel, DEFAULT_MAX_TREES};
use crate::simulator::{simulate, SimulationReport};

pub const ARTIFACTS: [&str; 6] = [
    "universal.foon",
    "kitchen.foon",
    "task_tree.foon",
    "plans.json",
    "skill_schedule.json",
    "simulation.json",
];

const REQUIRED: [&str; 10] = [
    "subgraph",
    "rules",
    "observations",
    "operators",
    "goal_map",
    "init",
    "skills",
    "anchors",
    "model",
    "goal",
];
const OPTIONAL: [&str; 5] = ["seed", "trials", "depth_bound", "max_trees", "out"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("config is missing key `{0}`")]
    MissingKey(String),
    #[error("{}: {message}", .path.display())]
    Io { path: PathBuf, message: String },
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

impl PipelineError {
    /// True for failures of the planning itself rather than of the inputs.
    pub fn is_domain(&self) -> bool {
        matches!(self, PipelineError::Stage { stage, .. } if matches!(*stage, "retrieve" | "decompose" | "ground-skills" | "simulate"))
    }
}

fn stage(stage: &'static str) -> impl Fn(String) -> PipelineError {
    move |message| PipelineError::Stage { stage, message }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub subgraphs: Vec<PathBuf>,
    pub paths: BTreeMap<String, PathBuf>,
    pub seed: u64,
    pub trials: u64,
    pub depth_bound: usize,
    pub max_trees: usize,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut subgraphs = Vec::new();
        let mut paths = BTreeMap::new();
        let mut scalars: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let Some((k, v)) = t.split_once('=') else {
                return Err(PipelineError::Config {
                    line,
                    message: format!("expected `key = value`, got {t:?}"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if v.is_empty() {
                return Err(PipelineError::Config {
                    line,
                    message: format!("`{k}` has no value"),
                });
            }
            if k == "subgraph" {
                subgraphs.push(base.join(v));
            } else if REQUIRED.contains(&k) || OPTIONAL.contains(&k) {
                if scalars.insert(k.to_string(), (line, v.to_string())).is_some() {
                    return Err(PipelineError::Config {
                        line,
                        message: format!("`{k}` given twice"),
                    });
                }
            } else {
                return Err(PipelineError::Config {
                    line,
                    message: format!("unknown key `{k}`"),
                });
            }
        }
        if subgraphs.is_empty() {
            return Err(PipelineError::MissingKey("subgraph".into()));
        }
        for k in &REQUIRED[1..] {
            let Some((_, v)) = scalars.get(*k) else {
                return Err(PipelineError::MissingKey(k.to_string()));
            };
            paths.insert(k.to_string(), base.join(v));
        }
        fn number<T: std::str::FromStr>(scalars: &BTreeMap<String, (usize, String)>, k: &str, default: T) -> Result<T, PipelineError> {
            match scalars.get(k) {
                None => Ok(default),
                Some((line, v)) => v.parse().map_err(|_| PipelineError::Config {
                    line: *line,
                    message: format!("`{k}` must be a non-negative integer, got {v:?}"),
                }),
            }
        }
        let cfg = RunConfig {
            subgraphs,
            paths,
            seed: number(&scalars, "seed", 0u64)?,
            trials: number(&scalars, "trials", 10_000u64)?,
            depth_bound: number(&scalars, "depth_bound", crate::planfoon::DEFAULT_DEPTH_BOUND)?,
            max_trees: number(&scalars, "max_trees", DEFAULT_MAX_TREES)?,
            out: scalars.get("out").map(|(_, v)| base.join(v)),
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = read(path)?;
        RunConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn path(&self, key: &str) -> &Path {
        &self.paths[key]
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), PipelineError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| PipelineError::Io {
        path,
        message: e.to_string(),
    })
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("artifact serializes") + "\n"
}

/// In-memory artifacts of one run, keyed like [`ARTIFACTS`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: BTreeMap<&'static str, String>,
    pub tree: Vec<FunctionalUnit>,
    pub score: f64,
    pub report: SimulationReport,
    pub schedule: Vec<SkillStep>,
}

/// Reads a JSON file mapping lowercase labels to `[x, y, z]`.
pub fn parse_anchors(text: &str) -> Result<BTreeMap<String, [f64; 3]>, serde_json::Error> {
    let raw: BTreeMap<String, [f64; 3]> = serde_json::from_str(text)?;
    Ok(raw.into_iter().map(|(k, v)| (k.trim().to_lowercase(), v)).collect())
}

pub fn parse_skills(text: &str) -> Result<BTreeMap<String, DmpParams>, serde_json::Error> {
    let raw: BTreeMap<String, DmpParams> = serde_json::from_str(text)?;
    Ok(raw.into_iter().map(|(k, v)| (k.trim().to_lowercase(), v)).collect())
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput, PipelineError> {
    let mut graphs: Vec<FoonGraph> = Vec::new();
    for p in &cfg.subgraphs {
        let g = parse_subgraph(&read(p)?).map_err(|e| PipelineError::Stage {
            stage: "parse",
            message: format!("{}: {e}", p.display()),
        })?;
        graphs.push(g);
    }
    let universal = merge(&graphs).map_err(|e| stage("merge")(e.to_string()))?;

    let rules = parse_rules(&read(cfg.path("rules"))?).map_err(|e| stage("ground")(format!("rules {e}")))?;
    let observations =
        parse_observations(&read(cfg.path("observations"))?).map_err(|e| stage("ground")(format!("observations: {e}")))?;
    let scene = ground_scene(&observations, &rules).map_err(|e| stage("ground")(e.to_string()))?;

    let model = SuccessModel::parse(&read(cfg.path("model"))?).map_err(|e| stage("retrieve")(format!("model {e}")))?;
    let goals = parse_objects(&read(cfg.path("goal"))?).map_err(|e| stage("retrieve")(format!("goal {e}")))?;
    let [goal] = goals.as_slice() else {
        return Err(stage("retrieve")(format!("goal file must hold one object, found {}", goals.len())));
    };
    let tree = retrieve_optimal(&universal, goal, &scene.kitchen, &model, cfg.max_trees)
        .map_err(|e| stage("retrieve")(e.to_string()))?;
    let score = score_tree(&tree, &model).map_err(|e| stage("retrieve")(e.to_string()))?;

    let ops = parse_operators(&read(cfg.path("operators"))?).map_err(|e| stage("decompose")(format!("operators {e}")))?;
    let goal_map = parse_goal_map(&read(cfg.path("goal_map"))?).map_err(|e| stage("decompose")(format!("goal map {e}")))?;
    let init = parse_init(&read(cfg.path("init"))?).map_err(|e| stage("decompose")(format!("init {e}")))?;
    let decomps = decompose_all(&tree.steps, &ops, &goal_map, &init, cfg.depth_bound)
        .map_err(|(i, e)| stage("decompose")(format!("unit {i}: {e}")))?;

    let skills = parse_skills(&read(cfg.path("skills"))?).map_err(|e| stage("ground-skills")(format!("skills: {e}")))?;
    let mut anchors = parse_anchors(&read(cfg.path("anchors"))?).map_err(|e| stage("ground-skills")(format!("anchors: {e}")))?;
    anchors.extend(scene.anchors.clone());
    let home = *anchors
        .get("home")
        .ok_or_else(|| stage("ground-skills")("anchors need a `home` position".into()))?;
    let chain: Vec<_> = decomps.iter().flat_map(|d| d.plan.iter().cloned()).collect();
    let schedule = ground_plan(&chain, &skills, &anchors, home).map_err(|e| stage("ground-skills")(e.to_string()))?;

    let report = simulate(&tree, &model, cfg.seed, cfg.trials).map_err(|e| stage("simulate")(e.to_string()))?;

    let text = |g: &FoonGraph, s: &'static str| serialize_subgraph(g).map_err(|e| stage(s)(e.to_string()));
    let mut files = BTreeMap::new();
    files.insert(ARTIFACTS[0], text(&universal, "merge")?);
    files.insert(ARTIFACTS[1], serialize_objects(scene.kitchen.iter()));
    files.insert(ARTIFACTS[2], text(&tree.to_graph(), "retrieve")?);
    files.insert(ARTIFACTS[3], json(&plan_view(&tree.steps, &decomps)));
    files.insert(ARTIFACTS[4], json(&schedule));
    files.insert(ARTIFACTS[5], report.to_json());
    Ok(RunOutput {
        files,
        tree: tree.steps,
        score,
        report,
        schedule,
    })
}

/// Runs and writes every artifact into `out`, creating it if needed.
pub fn run_to_dir(cfg: &RunConfig, out: &Path) -> Result<RunOutput, PipelineError> {
    let output = run(cfg)?;
    fs::create_dir_all(out).map_err(|e| PipelineError::Io {
        path: out.to_path_buf(),
        message: e.to_string(),
    })?;
    for (name, text) in &output.files {
        write(out, name, text)?;
    }
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios").join(name).join("run.cfg")
    }

    #[test]
    fn missing_key_is_named() {
        let text = read(&scenario("tomato")).unwrap();
        let without: String = text.lines().filter(|l| !l.starts_with("operators")).map(|l| format!("{l}\n")).collect();
        assert_eq!(
            RunConfig::parse(&without, Path::new(".")),
            Err(PipelineError::MissingKey("operators".into()))
        );
    }

    #[test]
    fn config_errors() {
        assert!(matches!(RunConfig::parse("bogus = 1\n", Path::new(".")), Err(PipelineError::Config { line: 1, .. })));
        assert!(matches!(RunConfig::parse("subgraph\n", Path::new(".")), Err(PipelineError::Config { line: 1, .. })));
        assert_eq!(RunConfig::parse("", Path::new(".")), Err(PipelineError::MissingKey("subgraph".into())));
    }

    #[test]
    fn tomato_scenario_runs() {
        let cfg = RunConfig::load(&scenario("tomato")).unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.tree.len(), 2);
        assert!((out.score - 0.855).abs() < 1e-12);
        assert_eq!(out.files.len(), 6);
        assert_eq!(out, run(&cfg).unwrap());
    }

    #[test]
    fn pour_scenario_runs() {
        let cfg = RunConfig::load(&scenario("pour")).unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.tree.len(), 1);
        assert_eq!(out.schedule.len(), 6);
    }
}
