//! `foon` command-line front end.
//!
//! Exit status: 0 on success, 1 when planning fails on valid inputs
//! (unsolvable goal, no plan, ...), 2 on usage, parse and I/O errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use foon::dmp::{learn_dmp, rollout, DmpParams, Trajectory, DEFAULT_DT};
use foon::format::{export_dot, export_json, parse_objects, serialize_objects, serialize_subgraph};
use foon::grounding::{ground_scene, parse_observations, parse_rules};
use foon::merge::{merge, merge_stats};
use foon::pipeline::{run_to_dir, RunConfig};
use foon::planfoon::{
    bundled_goal_map, bundled_operators, decompose_all, export_pddl, parse_goal_map, parse_init, parse_operators,
    plan_view, MotionGoalMap, PlanningOperator, DEFAULT_DEPTH_BOUND,
};
use foon::retrieval::{retrieve_optimal, retrieve_task_tree, score_tree, SuccessModel, TaskTree, DEFAULT_MAX_TREES};
use foon::simulator::simulate;
use foon::{validate, FoonGraph, Kitchen, ObjectNode};

#[derive(Parser)]
#[command(name = "foon", version, about = "Task planning with functional object-oriented networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate subgraph files.
    Validate { files: Vec<PathBuf> },
    /// Merge subgraphs into one universal graph.
    Merge {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a graph as JSON or DOT.
    Export {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn observations into a kitchen via threshold rules.
    Ground {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the observed centroids as JSON.
        #[arg(long)]
        anchors_out: Option<PathBuf>,
    },
    /// Retrieve a task tree for a goal object.
    Retrieve {
        file: PathBuf,
        #[arg(long)]
        goal: PathBuf,
        #[arg(long)]
        kitchen: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Pick the enumerated tree with the highest success score.
        #[arg(long, requires = "model")]
        optimal: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_TREES)]
        max_trees: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decompose every unit of a task tree into motion primitives.
    #[command(alias = "decompose-all")]
    Decompose {
        tree: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[command(flatten)]
        library: Library,
        #[arg(long, default_value_t = DEFAULT_DEPTH_BOUND)]
        depth_bound: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the operator library and one unit's problem as PDDL.
    Pddl {
        file: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long, default_value_t = 0)]
        unit: usize,
        #[command(flatten)]
        library: Library,
        #[arg(long)]
        domain_out: Option<PathBuf>,
        #[arg(long)]
        problem_out: Option<PathBuf>,
    },
    /// Learn or roll out movement primitives.
    Dmp {
        #[command(subcommand)]
        action: DmpCommand,
    },
    /// Estimate a task tree's success rate by simulation.
    Simulate {
        tree: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the whole pipeline from a configuration file.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config's `out` key.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DmpCommand {
    /// Fit a primitive to a CSV demonstration.
    Learn {
        demo: PathBuf,
        #[arg(long, default_value_t = 20)]
        basis: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a learned primitive and write the trajectory as CSV.
    Rollout {
        params: PathBuf,
        /// Start position, comma-separated; defaults to the learned start.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        y0: Option<Vec<f64>>,
        /// Goal position, comma-separated; defaults to the learned goal.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        goal: Option<Vec<f64>>,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        /// Defaults to the learned duration.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Library {
    /// Operator library; the bundled one when omitted.
    #[arg(long)]
    operators: Option<PathBuf>,
    /// Goal map; the bundled one when omitted.
    #[arg(long)]
    goal_map: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Json,
    Dot,
}

enum Failure {
    /// Valid inputs, but no answer.
    Domain(String),
    /// Unreadable or malformed inputs.
    Input(String),
}

type Outcome = Result<(), Failure>;

fn input(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure::Domain(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_graph(path: &Path) -> Result<FoonGraph, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    foon::format::parse_subgraph_bytes(&bytes).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_valid_graph(path: &Path) -> Result<FoonGraph, Failure> {
    let g = load_graph(path)?;
    let v = validate(&g);
    if v.is_empty() {
        Ok(g)
    } else {
        let msgs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        Err(Failure::Input(format!("{}: {}", path.display(), msgs.join("; "))))
    }
}

fn load_objects(path: &Path) -> Result<Vec<ObjectNode>, Failure> {
    parse_objects(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<SuccessModel, Failure> {
    SuccessModel::parse(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_library(lib: &Library) -> Result<(Vec<PlanningOperator>, MotionGoalMap), Failure> {
    let ops = match &lib.operators {
        Some(p) => parse_operators(&read(p)?).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => bundled_operators(),
    };
    let map = match &lib.goal_map {
        Some(p) => parse_goal_map(&read(p)?).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => bundled_goal_map(),
    };
    Ok((ops, map))
}

fn tree_of(g: FoonGraph) -> Result<TaskTree, Failure> {
    let goal = g
        .units
        .last()
        .and_then(|u| u.outputs.first())
        .cloned()
        .ok_or_else(|| Failure::Input("task tree has no units".into()))?;
    Ok(TaskTree { steps: g.units, goal })
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn execute(cmd: Command) -> Outcome {
    match cmd {
        Command::Validate { files } => {
            let mut bad = false;
            for f in &files {
                let g = load_graph(f)?;
                let v = validate(&g);
                if v.is_empty() {
                    println!("{}: ok, {} units", f.display(), g.units.len());
                } else {
                    bad = true;
                    for x in v {
                        eprintln!("{}: {x}", f.display());
                    }
                }
            }
            if bad {
                return Err(Failure::Domain("validation failed".into()));
            }
            Ok(())
        }
        Command::Merge { files, out } => {
            let graphs = files.iter().map(|f| load_graph(f)).collect::<Result<Vec<_>, _>>()?;
            let merged = merge(&graphs).map_err(input)?;
            let stats = merge_stats(&graphs).map_err(input)?;
            eprintln!(
                "merged {} units into {} ({} duplicates, {} objects)",
                stats.units_in, stats.units_out, stats.duplicates_removed, stats.distinct_objects
            );
            emit(out.as_deref(), &serialize_subgraph(&merged).map_err(input)?)
        }
        Command::Export { file, format, out } => {
            let g = load_graph(&file)?;
            let text = match format {
                ExportFormat::Json => export_json(&g).map_err(input)? + "\n",
                ExportFormat::Dot => export_dot(&g).map_err(input)?,
            };
            emit(out.as_deref(), &text)
        }
        Command::Ground {
            rules,
            observations,
            out,
            anchors_out,
        } => {
            let rules = parse_rules(&read(&rules)?).map_err(input)?;
            let obs = parse_observations(&read(&observations)?).map_err(input)?;
            let scene = ground_scene(&obs, &rules).map_err(domain)?;
            if let Some(p) = anchors_out {
                emit(Some(&p), &json(&scene.anchors))?;
            }
            emit(out.as_deref(), &serialize_objects(scene.kitchen.iter()))
        }
        Command::Retrieve {
            file,
            goal,
            kitchen,
            model,
            optimal,
            max_trees,
            out,
        } => {
            let g = load_valid_graph(&file)?;
            let goals = load_objects(&goal)?;
            let [goal] = goals.as_slice() else {
                return Err(Failure::Input(format!("goal file must hold one object, found {}", goals.len())));
            };
            let kitchen = Kitchen::new(load_objects(&kitchen)?);
            let model = model.as_deref().map(load_model).transpose()?;
            let tree = match (&model, optimal) {
                (Some(m), true) => retrieve_optimal(&g, goal, &kitchen, m, max_trees).map_err(domain)?,
                _ => retrieve_task_tree(&g, goal, &kitchen).map_err(domain)?,
            };
            if let Some(m) = &model {
                if let Ok(s) = score_tree(&tree, m) {
                    eprintln!("{} units, score {s}", tree.steps.len());
                }
            }
            emit(out.as_deref(), &serialize_subgraph(&tree.to_graph()).map_err(input)?)
        }
        Command::Decompose {
            tree,
            init,
            library,
            depth_bound,
            out,
        } => {
            let g = load_valid_graph(&tree)?;
            let init = parse_init(&read(&init)?).map_err(input)?;
            let (ops, map) = load_library(&library)?;
            let d = decompose_all(&g.units, &ops, &map, &init, depth_bound).map_err(|(i, e)| domain(format!("unit {i}: {e}")))?;
            emit(out.as_deref(), &json(&plan_view(&g.units, &d)))
        }
        Command::Pddl {
            file,
            init,
            unit,
            library,
            domain_out,
            problem_out,
        } => {
            let g = load_valid_graph(&file)?;
            let u = g
                .units
                .get(unit)
                .ok_or_else(|| Failure::Input(format!("unit {unit} out of range, graph has {}", g.units.len())))?;
            let init = parse_init(&read(&init)?).map_err(input)?;
            let (ops, map) = load_library(&library)?;
            let ex = export_pddl(&ops, &map, u, &init).map_err(domain)?;
            match (domain_out, problem_out) {
                (None, None) => {
                    print!("{}\n{}", ex.domain, ex.problem);
                    Ok(())
                }
                (d, p) => {
                    emit(d.as_deref(), &ex.domain)?;
                    emit(p.as_deref(), &ex.problem)
                }
            }
        }
        Command::Dmp { action } => match action {
            DmpCommand::Learn { demo, basis, out } => {
                let demo = Trajectory::from_csv(&read(&demo)?).map_err(input)?;
                let p = learn_dmp(&demo, basis).map_err(input)?;
                emit(out.as_deref(), &json(&p))
            }
            DmpCommand::Rollout {
                params,
                y0,
                goal,
                dt,
                duration,
                out,
            } => {
                let p: DmpParams = serde_json::from_str(&read(&params)?).map_err(input)?;
                let y0 = y0.unwrap_or_else(|| p.y0.clone());
                let g = goal.unwrap_or_else(|| p.g.clone());
                let t = rollout(&p, &y0, &g, dt, duration.unwrap_or(p.tau)).map_err(input)?;
                emit(out.as_deref(), &t.to_csv())
            }
        },
        Command::Simulate {
            tree,
            model,
            seed,
            trials,
            out,
        } => {
            let tree = tree_of(load_valid_graph(&tree)?)?;
            let model = load_model(&model)?;
            let r = simulate(&tree, &model, seed, trials).map_err(domain)?;
            emit(out.as_deref(), &r.to_json())
        }
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config).map_err(input)?;
            let dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("artifacts"));
            let r = run_to_dir(&cfg, &dir).map_err(|e| if e.is_domain() { domain(e) } else { input(e) })?;
            let summary: BTreeMap<&str, String> = BTreeMap::from([
                ("units", r.tree.len().to_string()),
                ("score", r.score.to_string()),
                ("simulated", r.report.rate.to_string()),
                ("out", dir.display().to_string()),
            ]);
            for (k, v) in summary {
                eprintln!("{k}: {v}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
