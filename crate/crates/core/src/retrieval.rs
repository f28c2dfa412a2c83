//! Task tree retrieval over a universal FOON.
//!
//! Retrieval walks backwards from the goal: for each object still needed it
//! picks a producing unit (depth-first) and checks that all of that unit's
//! inputs can themselves be obtained (breadth over the inputs). Objects are
//! never consumed, so anything made once stays available.
//!
//! Trees are reported in a canonical order: repeatedly fire the unit with the
//! lowest graph index whose inputs are available. Enumerated trees are
//! minimal, meaning no unit can be dropped without losing the goal.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use thiserror::Error;

use crate::format::serialize_subgraph;
use crate::model::{object_index, validate, FoonGraph, FunctionalUnit, Kitchen, Label, ObjectIndex, ObjectNode, Violation};

pub const DEFAULT_MAX_TREES: usize = 64;

/// Upper bound on alternative derivations kept per intermediate object.
const ALTERNATIVES_PER_NODE: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("Unsolvable: goal {0} cannot be derived from the kitchen")]
    Unsolvable(String),
    #[error("GoalUnknown: goal {0} is neither in the graph nor in the kitchen")]
    GoalUnknown(String),
    #[error("invalid goal: {0}")]
    InvalidGoal(String),
    #[error("MissingRate: no success rate for motion {0:?} and no default")]
    MissingRate(String),
    #[error("max_trees must be positive")]
    ZeroMaxTrees,
    #[error("invalid graph: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidGraph(Vec<Violation>),
}

/// An ordered, executable list of units that makes `goal` from a kitchen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskTree {
    pub steps: Vec<FunctionalUnit>,
    pub goal: ObjectNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {step}: input {input} is not available")]
    MissingInput { step: usize, input: String },
    #[error("step {step} repeats step {first}")]
    RepeatedStep { step: usize, first: usize },
    #[error("goal is not produced by the final step")]
    GoalNotReached,
}

impl TaskTree {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Checks the executability invariant against `kitchen`.
    pub fn replay(&self, kitchen: &Kitchen) -> Result<(), ReplayError> {
        let mut available: BTreeSet<&ObjectNode> = kitchen.iter().collect();
        for (i, step) in self.steps.iter().enumerate() {
            if let Some(first) = self.steps[..i].iter().position(|s| s == step) {
                return Err(ReplayError::RepeatedStep { step: i, first });
            }
            if let Some(missing) = step.inputs.iter().find(|o| !available.contains(o)) {
                return Err(ReplayError::MissingInput {
                    step: i,
                    input: missing.to_string(),
                });
            }
            available.extend(step.outputs.iter());
        }
        let reached = match self.steps.last() {
            Some(last) => last.produces(&self.goal),
            None => kitchen.contains(&self.goal),
        };
        if reached {
            Ok(())
        } else {
            Err(ReplayError::GoalNotReached)
        }
    }

    pub fn to_graph(&self) -> FoonGraph {
        FoonGraph::new(self.steps.clone())
    }
}

/// Per-motion success probabilities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuccessModel {
    rates: BTreeMap<Label, f64>,
    default: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ModelParseError {
    pub line: usize,
    pub message: String,
}

fn is_probability(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

impl SuccessModel {
    /// Fails with the offending entry if any value lies outside `[0, 1]`.
    pub fn new<I, S>(rates: I, default: Option<f64>) -> Result<Self, String>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<Label>,
    {
        let mut map = BTreeMap::new();
        for (motion, rate) in rates {
            let motion = motion.into();
            if !is_probability(rate) {
                return Err(format!("rate {rate} for {motion} is outside [0, 1]"));
            }
            map.insert(motion, rate);
        }
        if let Some(d) = default {
            if !is_probability(d) {
                return Err(format!("default rate {d} is outside [0, 1]"));
            }
        }
        Ok(SuccessModel { rates: map, default })
    }

    /// Reads `motion<TAB>rate` lines; `*` sets the default.
    pub fn parse(text: &str) -> Result<Self, ModelParseError> {
        let mut rates = BTreeMap::new();
        let mut default = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ModelParseError { line, message };
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let Some((motion, rate)) = raw.split_once('\t') else {
                return Err(err(format!("expected `motion<TAB>rate`, got {t:?}")));
            };
            let rate: f64 = rate.trim().parse().map_err(|_| err(format!("bad rate {:?}", rate.trim())))?;
            if !is_probability(rate) {
                return Err(err(format!("rate {rate} is outside [0, 1]")));
            }
            let motion = motion.trim();
            if motion == "*" {
                if default.replace(rate).is_some() {
                    return Err(err("default rate given twice".into()));
                }
            } else {
                if motion.is_empty() {
                    return Err(err("empty motion label".into()));
                }
                if rates.insert(Label::new(motion), rate).is_some() {
                    return Err(err(format!("duplicate motion {motion:?}")));
                }
            }
        }
        Ok(SuccessModel { rates, default })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (m, r) in &self.rates {
            out.push_str(&format!("{m}\t{r}\n"));
        }
        if let Some(d) = self.default {
            out.push_str(&format!("*\t{d}\n"));
        }
        out
    }

    pub fn rate(&self, motion: &Label) -> Result<f64, RetrievalError> {
        self.rates
            .get(motion)
            .copied()
            .or(self.default)
            .ok_or_else(|| RetrievalError::MissingRate(motion.to_string()))
    }

    /// A model with every rate (and the default) multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        SuccessModel {
            rates: self.rates.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
            default: self.default.map(|d| d * c),
        }
    }
}

/// Product of the step success rates; 1.0 for the empty tree.
pub fn score_tree(tree: &TaskTree, model: &SuccessModel) -> Result<f64, RetrievalError> {
    let mut rates = tree
        .steps
        .iter()
        .map(|s| model.rate(&s.motion.label))
        .collect::<Result<Vec<f64>, _>>()?;
    // a fixed multiplication order keeps equal multisets bit-identical
    rates.sort_by(f64::total_cmp);
    Ok(rates.into_iter().product())
}

type UnitSet = BTreeSet<usize>;

struct Search<'a> {
    foon: &'a FoonGraph,
    kitchen: &'a Kitchen,
    index: ObjectIndex,
    found: HashMap<ObjectNode, Rc<UnitSet>>,
    failed: HashSet<ObjectNode>,
    alternatives: HashMap<ObjectNode, Rc<Vec<UnitSet>>>,
}

enum Outcome {
    Found(Rc<UnitSet>),
    // `cut` records whether an on-path object was skipped, in which case the
    // failure depends on the path and may not be cached
    Failed { cut: bool },
}

impl<'a> Search<'a> {
    fn new(foon: &'a FoonGraph, kitchen: &'a Kitchen) -> Self {
        Search {
            foon,
            kitchen,
            index: object_index(foon),
            found: HashMap::new(),
            failed: HashSet::new(),
            alternatives: HashMap::new(),
        }
    }

    fn producers(&self, node: &ObjectNode) -> Vec<usize> {
        self.index.get(node).map(|u| u.producers.clone()).unwrap_or_default()
    }

    fn distinct_inputs(&self, unit: usize) -> Vec<ObjectNode> {
        let mut seen = BTreeSet::new();
        self.foon.units[unit]
            .inputs
            .iter()
            .filter(|o| seen.insert(*o))
            .cloned()
            .collect()
    }

    fn solve(&mut self, node: &ObjectNode, path: &mut Vec<ObjectNode>) -> Outcome {
        if self.kitchen.contains(node) {
            return Outcome::Found(Rc::new(UnitSet::new()));
        }
        if let Some(hit) = self.found.get(node) {
            return Outcome::Found(hit.clone());
        }
        if self.failed.contains(node) {
            return Outcome::Failed { cut: false };
        }
        if path.contains(node) {
            return Outcome::Failed { cut: true };
        }
        path.push(node.clone());
        let mut cut = false;
        let mut result = None;
        'units: for unit in self.producers(node) {
            let mut set = UnitSet::from([unit]);
            for input in self.distinct_inputs(unit) {
                match self.solve(&input, path) {
                    Outcome::Found(sub) => set.extend(sub.iter().copied()),
                    Outcome::Failed { cut: c } => {
                        cut |= c;
                        continue 'units;
                    }
                }
            }
            result = Some(Rc::new(set));
            break;
        }
        path.pop();
        match result {
            Some(set) => {
                self.found.insert(node.clone(), set.clone());
                Outcome::Found(set)
            }
            None => {
                if !cut {
                    self.failed.insert(node.clone());
                }
                Outcome::Failed { cut }
            }
        }
    }

    fn derivations(&mut self, node: &ObjectNode, path: &mut Vec<ObjectNode>) -> (Rc<Vec<UnitSet>>, bool) {
        if self.kitchen.contains(node) {
            return (Rc::new(vec![UnitSet::new()]), false);
        }
        if let Some(hit) = self.alternatives.get(node) {
            return (hit.clone(), false);
        }
        if path.contains(node) {
            return (Rc::new(Vec::new()), true);
        }
        path.push(node.clone());
        let mut cut = false;
        let mut all: Vec<UnitSet> = Vec::new();
        for unit in self.producers(node) {
            let mut combos = vec![UnitSet::from([unit])];
            for input in self.distinct_inputs(unit) {
                let (subs, c) = self.derivations(&input, path);
                cut |= c;
                let mut next = Vec::new();
                for base in &combos {
                    for sub in subs.iter() {
                        let mut s = base.clone();
                        s.extend(sub.iter().copied());
                        next.push(s);
                    }
                }
                combos = keep_minimal(next);
                if combos.is_empty() {
                    break;
                }
            }
            all.extend(combos);
            all = keep_minimal(all);
        }
        path.pop();
        let all = Rc::new(all);
        if !cut {
            self.alternatives.insert(node.clone(), all.clone());
        }
        (all, cut)
    }

    /// True iff firing the units of `set` (in any order) reaches `goal`.
    fn reaches(&self, set: &UnitSet, goal: &ObjectNode) -> bool {
        let mut available: BTreeSet<&ObjectNode> = self.kitchen.iter().collect();
        let mut pending: Vec<usize> = set.iter().copied().collect();
        loop {
            if available.contains(goal) {
                return true;
            }
            let before = pending.len();
            pending.retain(|&u| {
                let unit = &self.foon.units[u];
                if unit.inputs.iter().all(|o| available.contains(o)) {
                    available.extend(unit.outputs.iter());
                    false
                } else {
                    true
                }
            });
            if pending.len() == before {
                return available.contains(goal);
            }
        }
    }

    fn minimize(&self, mut set: UnitSet, goal: &ObjectNode) -> UnitSet {
        for u in set.clone() {
            set.remove(&u);
            if !self.reaches(&set, goal) {
                set.insert(u);
            }
        }
        set
    }

    /// Fires units of `set` in canonical order.
    fn order(&self, set: &UnitSet) -> Vec<FunctionalUnit> {
        let mut available: BTreeSet<&ObjectNode> = self.kitchen.iter().collect();
        let mut pending: Vec<usize> = set.iter().copied().collect();
        let mut steps = Vec::new();
        while let Some(pos) = pending
            .iter()
            .position(|&u| self.foon.units[u].inputs.iter().all(|o| available.contains(o)))
        {
            let u = pending.remove(pos);
            available.extend(self.foon.units[u].outputs.iter());
            steps.push(self.foon.units[u].clone());
        }
        steps
    }
}

fn keep_minimal(sets: Vec<UnitSet>) -> Vec<UnitSet> {
    let mut out: Vec<UnitSet> = Vec::new();
    for s in sets {
        if out.iter().any(|o| o.is_subset(&s)) {
            continue;
        }
        out.retain(|o| !s.is_subset(o));
        out.push(s);
        if out.len() >= ALTERNATIVES_PER_NODE {
            break;
        }
    }
    out
}

fn check_query(foon: &FoonGraph, goal: &ObjectNode, kitchen: &Kitchen) -> Result<(), RetrievalError> {
    let violations = validate(foon);
    if !violations.is_empty() {
        return Err(RetrievalError::InvalidGraph(violations));
    }
    if let Some(v) = goal.violations().into_iter().next() {
        return Err(RetrievalError::InvalidGoal(v));
    }
    if !kitchen.contains(goal) && !foon.contains_node(goal) {
        return Err(RetrievalError::GoalUnknown(goal.to_string()));
    }
    Ok(())
}

/// Finds one executable task tree for `goal`.
pub fn retrieve_task_tree(foon: &FoonGraph, goal: &ObjectNode, kitchen: &Kitchen) -> Result<TaskTree, RetrievalError> {
    check_query(foon, goal, kitchen)?;
    let mut search = Search::new(foon, kitchen);
    if kitchen.contains(goal) {
        return Ok(TaskTree {
            steps: Vec::new(),
            goal: goal.clone(),
        });
    }
    match search.solve(goal, &mut Vec::new()) {
        Outcome::Found(set) => {
            let set = search.minimize((*set).clone(), goal);
            Ok(TaskTree {
                steps: search.order(&set),
                goal: goal.clone(),
            })
        }
        Outcome::Failed { .. } => Err(RetrievalError::Unsolvable(goal.to_string())),
    }
}

/// Lists up to `max_trees` distinct minimal task trees for `goal`.
pub fn enumerate_task_trees(
    foon: &FoonGraph,
    goal: &ObjectNode,
    kitchen: &Kitchen,
    max_trees: usize,
) -> Result<Vec<TaskTree>, RetrievalError> {
    if max_trees == 0 {
        return Err(RetrievalError::ZeroMaxTrees);
    }
    check_query(foon, goal, kitchen)?;
    if kitchen.contains(goal) {
        return Ok(vec![TaskTree {
            steps: Vec::new(),
            goal: goal.clone(),
        }]);
    }
    let mut search = Search::new(foon, kitchen);
    let (candidates, _) = search.derivations(goal, &mut Vec::new());
    let mut seen = BTreeSet::new();
    let mut trees = Vec::new();
    for c in candidates.iter() {
        let set = search.minimize(c.clone(), goal);
        if seen.insert(set.clone()) {
            trees.push(TaskTree {
                steps: search.order(&set),
                goal: goal.clone(),
            });
            if trees.len() == max_trees {
                break;
            }
        }
    }
    if trees.is_empty() {
        return Err(RetrievalError::Unsolvable(goal.to_string()));
    }
    Ok(trees)
}

/// The enumerated tree with the highest success score.
///
/// Ties go to fewer steps, then to the lexicographically smaller canonical
/// serialization.
pub fn retrieve_optimal(
    foon: &FoonGraph,
    goal: &ObjectNode,
    kitchen: &Kitchen,
    model: &SuccessModel,
    max_trees: usize,
) -> Result<TaskTree, RetrievalError> {
    let trees = enumerate_task_trees(foon, goal, kitchen, max_trees)?;
    let mut best: Option<(f64, usize, String, TaskTree)> = None;
    for tree in trees {
        let score = score_tree(&tree, model)?;
        let text = serialize_subgraph(&tree.to_graph()).expect("tree units come from a valid graph");
        let better = match &best {
            None => true,
            Some((s, n, t, _)) => score > *s || (score == *s && (tree.len() < *n || (tree.len() == *n && text < *t))),
        };
        if better {
            best = Some((score, tree.len(), text, tree));
        }
    }
    Ok(best.expect("enumeration returns at least one tree").3)
}
