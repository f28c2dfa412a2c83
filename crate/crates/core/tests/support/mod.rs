//! Random instance generators and brute-force oracles shared by the
//! property tests and the acceptance suite.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use foon::planfoon::{GroundedOperator, PlanningOperator, Predicate, SymbolicState};
use foon::{unit_equals, FoonGraph, FunctionalUnit, Kitchen, ObjectNode};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A pool of distinct object nodes, some with states.
pub fn object_pool(n: usize) -> Vec<ObjectNode> {
    (0..n)
        .map(|i| match i % 3 {
            0 => ObjectNode::new(format!("o{i}")),
            1 => ObjectNode::new(format!("o{i}")).with_state("s"),
            _ => ObjectNode::new(format!("o{}", i - 2)).with_relation("on", "o1"),
        })
        .collect()
}

pub fn random_unit(r: &mut ChaCha8Rng, pool: &[ObjectNode], motions: usize) -> FunctionalUnit {
    let n_in = r.gen_range(1..=3);
    let n_out = r.gen_range(1..=2);
    let inputs = (0..n_in).map(|_| pool.choose(r).unwrap().clone()).collect();
    let outputs = (0..n_out).map(|_| pool.choose(r).unwrap().clone()).collect();
    FunctionalUnit::new(inputs, format!("m{}", r.gen_range(0..motions)).as_str(), outputs)
}

/// A valid graph: duplicate draws are dropped.
pub fn random_graph(r: &mut ChaCha8Rng, pool: &[ObjectNode], max_units: usize, motions: usize) -> FoonGraph {
    let n = r.gen_range(0..=max_units);
    let mut units: Vec<FunctionalUnit> = Vec::new();
    for _ in 0..n {
        let u = random_unit(r, pool, motions);
        if !units.iter().any(|k| unit_equals(k, &u)) {
            units.push(u);
        }
    }
    FoonGraph::new(units)
}

/// Like [`random_graph`] but duplicates are kept, for merge tests.
pub fn random_graph_with_duplicates(r: &mut ChaCha8Rng, pool: &[ObjectNode], max_units: usize, motions: usize) -> FoonGraph {
    let n = r.gen_range(0..=max_units);
    FoonGraph::new((0..n).map(|_| random_unit(r, pool, motions)).collect())
}

pub fn random_kitchen(r: &mut ChaCha8Rng, pool: &[ObjectNode], max: usize) -> Kitchen {
    let n = r.gen_range(1..=max);
    Kitchen::new((0..n).map(|_| pool.choose(r).unwrap().clone()))
}

/// A retrieval query over at most `max_units` units and 8 objects.
pub struct Query {
    pub foon: FoonGraph,
    pub kitchen: Kitchen,
    pub goal: ObjectNode,
    pub pool: Vec<ObjectNode>,
}

pub fn random_query(r: &mut ChaCha8Rng, max_units: usize) -> Query {
    let pool = object_pool(8);
    let foon = random_graph(r, &pool, max_units, 4);
    let kitchen = random_kitchen(r, &pool, 3);
    let goal = pool.choose(r).unwrap().clone();
    Query { foon, kitchen, goal, pool }
}

/// Saturates the kitchen under every unit whose inputs are available.
pub fn forward_closure(units: &[&FunctionalUnit], kitchen: &Kitchen) -> BTreeSet<ObjectNode> {
    let mut avail: BTreeSet<ObjectNode> = kitchen.available.clone();
    loop {
        let before = avail.len();
        for u in units {
            if u.inputs.iter().all(|i| avail.contains(i)) {
                avail.extend(u.outputs.iter().cloned());
            }
        }
        if avail.len() == before {
            return avail;
        }
    }
}

/// True when every unit of the subset fires under the subset's own closure
/// and the goal is reached.
fn subset_derives(units: &[&FunctionalUnit], kitchen: &Kitchen, goal: &ObjectNode) -> bool {
    let closure = forward_closure(units, kitchen);
    closure.contains(goal) && units.iter().all(|u| u.inputs.iter().all(|i| closure.contains(i)))
}

/// Inclusion-minimal unit subsets deriving the goal, by exhaustive search.
/// Units are deduplicated first; each set is returned as sorted indices
/// into the deduplicated list.
pub fn minimal_tree_sets(foon: &FoonGraph, kitchen: &Kitchen, goal: &ObjectNode) -> (Vec<FunctionalUnit>, Vec<BTreeSet<usize>>) {
    let mut distinct: Vec<FunctionalUnit> = Vec::new();
    for u in &foon.units {
        if !distinct.iter().any(|d| unit_equals(d, u)) {
            distinct.push(u.clone());
        }
    }
    if kitchen.contains(goal) {
        return (distinct, vec![BTreeSet::new()]);
    }
    let n = distinct.len();
    assert!(n <= 16, "oracle is exponential");
    let mut valid: Vec<u32> = Vec::new();
    for mask in 1u32..(1 << n) {
        let units: Vec<&FunctionalUnit> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &distinct[i]).collect();
        if subset_derives(&units, kitchen, goal) {
            valid.push(mask);
        }
    }
    let minimal = valid
        .iter()
        .filter(|&&m| !valid.iter().any(|&o| o != m && o & m == o))
        .map(|&m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect();
    (distinct, minimal)
}

/// Index set of a tree's steps within `distinct`.
pub fn tree_set(distinct: &[FunctionalUnit], steps: &[FunctionalUnit]) -> BTreeSet<usize> {
    steps
        .iter()
        .map(|s| distinct.iter().position(|d| unit_equals(d, s)).expect("step comes from the graph"))
        .collect()
}

/// Counts distinct units by pairwise comparison.
pub fn pairwise_distinct(units: &[&FunctionalUnit]) -> usize {
    let mut kept: Vec<&FunctionalUnit> = Vec::new();
    for u in units {
        if !kept.iter().any(|k| unit_equals(k, u)) {
            kept.push(u);
        }
    }
    kept.len()
}

/// Units as a set of canonical keys, for order-free comparison.
pub fn unit_set(g: &FoonGraph) -> BTreeSet<String> {
    g.units.iter().map(|u| u.canonical_key()).collect()
}

/// Several routes of equal length from kitchen items to one goal, each
/// through private intermediates.
pub fn equal_length_routes(r: &mut ChaCha8Rng) -> (FoonGraph, Kitchen, ObjectNode, usize) {
    let routes = r.gen_range(2..=4);
    let len = r.gen_range(1..=3);
    let goal = ObjectNode::new("goal");
    let mut units = Vec::new();
    let mut kitchen = Kitchen::default();
    for k in 0..routes {
        let start = ObjectNode::new(format!("start{k}"));
        kitchen.insert(start.clone());
        let mut prev = start;
        for step in 0..len {
            let next = if step + 1 == len {
                goal.clone()
            } else {
                ObjectNode::new(format!("mid{k}-{step}"))
            };
            let motion = format!("m{}", r.gen_range(0..6));
            units.push(FunctionalUnit::new(vec![prev.clone()], motion.as_str(), vec![next.clone()]));
            prev = next;
        }
    }
    units.shuffle(r);
    (FoonGraph::new(units), kitchen, goal, len)
}

/// Rates for motions `m0..m{n}` drawn from `(0.5, 1)`.
pub fn random_rates(r: &mut ChaCha8Rng, n: usize) -> Vec<(String, f64)> {
    (0..n).map(|i| (format!("m{i}"), r.gen_range(0.5..1.0))).collect()
}

/// Minimum-jerk trajectory from `y0` to `g` over one second.
pub fn min_jerk(y0: &[f64], g: &[f64], samples: usize) -> foon::dmp::Trajectory {
    let times: Vec<f64> = (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
    let positions = times
        .iter()
        .map(|&s| {
            let b = 10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5);
            y0.iter().zip(g).map(|(a, z)| a + (z - a) * b).collect()
        })
        .collect();
    foon::dmp::Trajectory::new(times, positions).unwrap()
}

/// A small random STRIPS domain: operators, objects, initial state, goal.
pub struct StripsDomain {
    pub ops: Vec<PlanningOperator>,
    pub objects: BTreeSet<String>,
    pub init: SymbolicState,
    pub goal: BTreeSet<Predicate>,
}

const PREDS: [(&str, usize); 4] = [("p", 0), ("q", 1), ("r", 1), ("s", 2)];

fn random_literal(r: &mut ChaCha8Rng, args: &[String]) -> Predicate {
    let usable: Vec<&(&str, usize)> = PREDS.iter().filter(|(_, a)| *a == 0 || !args.is_empty()).collect();
    let (name, arity) = **usable.choose(r).unwrap();
    Predicate::new(name, (0..arity).map(|_| args.choose(r).unwrap().clone()))
}

pub fn random_strips(r: &mut ChaCha8Rng) -> StripsDomain {
    let n_obj = r.gen_range(1..=5);
    let objects: BTreeSet<String> = (0..n_obj).map(|i| format!("c{i}")).collect();
    let objs: Vec<String> = objects.iter().cloned().collect();
    let n_ops = r.gen_range(1..=6);
    let mut ops = Vec::new();
    for k in 0..n_ops {
        let arity = r.gen_range(0..=2);
        let params: Vec<String> = (0..arity).map(|i| format!("?x{i}")).collect();
        let pre: BTreeSet<Predicate> = (0..r.gen_range(0..=2)).map(|_| random_literal(r, &params)).collect();
        let add: BTreeSet<Predicate> = (0..r.gen_range(1..=2)).map(|_| random_literal(r, &params)).collect();
        let del: BTreeSet<Predicate> = (0..r.gen_range(0..=1))
            .map(|_| random_literal(r, &params))
            .filter(|p| !add.contains(p))
            .collect();
        ops.push(PlanningOperator::new(&format!("op{k}"), params, pre, add, del, None).unwrap());
    }
    let init: SymbolicState = SymbolicState::new((0..r.gen_range(0..=4)).map(|_| random_literal(r, &objs)));
    let goal: BTreeSet<Predicate> = (0..r.gen_range(1..=2)).map(|_| random_literal(r, &objs)).collect();
    StripsDomain { ops, objects, init, goal }
}

/// Every grounding of every operator, regardless of applicability.
pub fn all_groundings(d: &StripsDomain) -> Vec<GroundedOperator> {
    let objs: Vec<String> = d.objects.iter().cloned().collect();
    let mut out = Vec::new();
    for op in &d.ops {
        let mut tuples: Vec<Vec<String>> = vec![Vec::new()];
        for _ in &op.params {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    objs.iter().map(move |o| {
                        let mut t = t.clone();
                        t.push(o.clone());
                        t
                    })
                })
                .collect();
        }
        out.extend(tuples.iter().map(|t| op.ground(t).unwrap()));
    }
    out
}

/// Shortest plan length by iterative deepening over all action sequences.
///
/// States already known to fail with at least as many steps left are
/// skipped; this prunes repeats without changing the answer.
pub fn brute_force_plan_length(d: &StripsDomain, bound: usize) -> Option<usize> {
    let acts = all_groundings(d);
    fn dfs(
        s: &SymbolicState,
        goal: &BTreeSet<Predicate>,
        acts: &[GroundedOperator],
        left: usize,
        failed: &mut HashMap<SymbolicState, usize>,
    ) -> bool {
        if s.satisfies(goal) {
            return true;
        }
        if left == 0 || failed.get(s).is_some_and(|&l| l >= left) {
            return false;
        }
        for a in acts {
            if let Ok(n) = foon::planfoon::apply_operator(s, a) {
                if dfs(&n, goal, acts, left - 1, failed) {
                    return true;
                }
            }
        }
        failed.insert(s.clone(), left);
        false
    }
    (0..=bound).find(|&k| dfs(&d.init, &d.goal, &acts, k, &mut HashMap::new()))
}

/// Object label → anchor map with every object the bundled scenes use.
pub fn scene_anchors() -> BTreeMap<String, [f64; 3]> {
    [
        ("tomato", [0.4, 0.1, 0.02]),
        ("cutting board", [0.2, -0.1, 0.02]),
        ("knife", [0.35, -0.25, 0.01]),
        ("knife-home", [0.5, -0.3, 0.01]),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}
