//! Decomposing functional units into chains of atomic motion primitives.
//!
//! Planning operators are STRIPS schemas over object-centred predicates.
//! A goal map says, for each abstract motion, which predicates must hold
//! once the unit has been executed; a breadth-first planner then finds the
//! shortest primitive chain reaching them. Operators, goal maps and initial
//! states are read from line-based text files ([`library`]); operator
//! libraries can also be exported as PDDL ([`pddl`]). [`skills`] binds each
//! primitive to a movement skill with concrete start and goal positions.

pub mod library;
pub mod pddl;
pub mod skills;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{FunctionalUnit, Label};

pub use library::{
    bundled_goal_map, bundled_operators, parse_goal_map, parse_init, parse_operators, serialize_init, FormatError,
};
pub use pddl::{export_pddl, read_domain, read_problem, PddlExport, PddlProblem};
pub use skills::{ground_plan, SkillStep};

pub const DEFAULT_DEPTH_BOUND: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("NoPlan: no plan for `{motion}` within {depth_bound} steps")]
    NoPlan { motion: String, depth_bound: usize },
    #[error("UnknownMotion: `{0}` has no goal-map entry")]
    UnknownMotion(String),
    #[error("UnboundRole: cannot bind {role} for `{motion}`")]
    UnboundRole { motion: String, role: String },
    #[error("PreconditionViolation: {op} is missing {}", .missing.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", "))]
    PreconditionViolation { op: String, missing: Vec<Predicate> },
    #[error("invalid operator {name}: {message}")]
    InvalidOperator { name: String, message: String },
    #[error("MissingSkill: step {step} ({op}) uses unknown skill `{skill}`")]
    MissingSkill { step: usize, op: String, skill: String },
    #[error("MissingAnchor: step {step} ({op}) targets `{object}` which has no anchor")]
    MissingAnchor { step: usize, op: String, object: String },
    #[error("skill `{skill}` is {found}-dimensional, anchors are {expected}-dimensional")]
    DimensionMismatch { skill: String, expected: usize, found: usize },
}

pub fn is_variable(arg: &str) -> bool {
    arg.starts_with('?')
}

fn norm(s: &str) -> String {
    s.trim().to_lowercase()
}

/// A relational fact, or a fact template when some args are `?variables`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub name: String,
    pub args: Vec<String>,
}

impl Predicate {
    /// Name and args are trimmed and lowercased.
    pub fn new<S: AsRef<str>>(name: &str, args: impl IntoIterator<Item = S>) -> Self {
        Predicate {
            name: norm(name),
            args: args.into_iter().map(|a| norm(a.as_ref())).collect(),
        }
    }

    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(|a| is_variable(a))
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().map(String::as_str).filter(|a| is_variable(a))
    }

    /// Replaces bound variables; unbound ones stay as they are.
    pub fn substitute(&self, binding: &BTreeMap<String, String>) -> Predicate {
        Predicate {
            name: self.name.clone(),
            args: self
                .args
                .iter()
                .map(|a| binding.get(a).cloned().unwrap_or_else(|| a.clone()))
                .collect(),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))
    }
}

impl Serialize for Predicate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Which skill a primitive runs, and which parameter names its target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillRef {
    pub skill: String,
    pub target: String,
}

/// A lifted STRIPS schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanningOperator {
    pub name: String,
    pub params: Vec<String>,
    pub preconditions: BTreeSet<Predicate>,
    pub add_effects: BTreeSet<Predicate>,
    pub del_effects: BTreeSet<Predicate>,
    pub skill: Option<SkillRef>,
}

impl PlanningOperator {
    pub fn new(
        name: &str,
        params: Vec<String>,
        preconditions: BTreeSet<Predicate>,
        add_effects: BTreeSet<Predicate>,
        del_effects: BTreeSet<Predicate>,
        skill: Option<SkillRef>,
    ) -> Result<Self, PlanError> {
        let op = PlanningOperator {
            name: norm(name),
            params: params.iter().map(|p| norm(p)).collect(),
            preconditions,
            add_effects,
            del_effects,
            skill,
        };
        op.check()?;
        Ok(op)
    }

    fn check(&self) -> Result<(), PlanError> {
        let fail = |message: String| {
            Err(PlanError::InvalidOperator {
                name: self.name.clone(),
                message,
            })
        };
        if self.name.is_empty() {
            return fail("empty name".into());
        }
        let mut seen = BTreeSet::new();
        for p in &self.params {
            if !is_variable(p) || p.len() < 2 {
                return fail(format!("parameter `{p}` is not a variable"));
            }
            if !seen.insert(p.as_str()) {
                return fail(format!("parameter `{p}` repeated"));
            }
        }
        let all = self.preconditions.iter().chain(&self.add_effects).chain(&self.del_effects);
        for pred in all {
            if pred.name.is_empty() {
                return fail("predicate with empty name".into());
            }
            if let Some(v) = pred.variables().find(|v| !seen.contains(v)) {
                return fail(format!("variable `{v}` in {pred} is not a parameter"));
            }
        }
        if let Some(p) = self.add_effects.intersection(&self.del_effects).next() {
            return fail(format!("{p} is both added and deleted"));
        }
        if let Some(s) = &self.skill {
            if !seen.contains(s.target.as_str()) {
                return fail(format!("skill target `{}` is not a parameter", s.target));
            }
        }
        Ok(())
    }

    /// Instantiates the schema with one object per parameter.
    pub fn ground(&self, args: &[String]) -> Result<GroundedOperator, PlanError> {
        if args.len() != self.params.len() {
            return Err(PlanError::InvalidOperator {
                name: self.name.clone(),
                message: format!("expects {} arguments, got {}", self.params.len(), args.len()),
            });
        }
        let binding: BTreeMap<String, String> = self.params.iter().cloned().zip(args.iter().map(|a| norm(a))).collect();
        let inst = |set: &BTreeSet<Predicate>| set.iter().map(|p| p.substitute(&binding)).collect();
        Ok(GroundedOperator {
            name: self.name.clone(),
            args: args.iter().map(|a| norm(a)).collect(),
            preconditions: inst(&self.preconditions),
            add_effects: inst(&self.add_effects),
            del_effects: inst(&self.del_effects),
            skill: self.skill.as_ref().map(|s| (s.skill.clone(), binding[&s.target].clone())),
        })
    }
}

/// An operator with every parameter bound to an object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundedOperator {
    pub name: String,
    pub args: Vec<String>,
    pub preconditions: BTreeSet<Predicate>,
    pub add_effects: BTreeSet<Predicate>,
    pub del_effects: BTreeSet<Predicate>,
    /// Skill id and the object whose anchor is the skill's goal.
    pub skill: Option<(String, String)>,
}

impl GroundedOperator {
    /// An anonymous operator with the given effects, mostly for tests.
    pub fn from_parts(
        name: &str,
        preconditions: BTreeSet<Predicate>,
        add_effects: BTreeSet<Predicate>,
        del_effects: BTreeSet<Predicate>,
    ) -> Self {
        GroundedOperator {
            name: norm(name),
            args: Vec::new(),
            preconditions,
            add_effects,
            del_effects,
            skill: None,
        }
    }
}

impl fmt::Display for GroundedOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))
    }
}

/// A set of ground facts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SymbolicState {
    pub facts: BTreeSet<Predicate>,
}

impl SymbolicState {
    pub fn new(facts: impl IntoIterator<Item = Predicate>) -> Self {
        SymbolicState {
            facts: facts.into_iter().collect(),
        }
    }

    pub fn holds(&self, p: &Predicate) -> bool {
        self.facts.contains(p)
    }

    pub fn satisfies(&self, goal: &BTreeSet<Predicate>) -> bool {
        goal.is_subset(&self.facts)
    }

    /// Every constant mentioned by some fact.
    pub fn constants(&self) -> BTreeSet<String> {
        self.facts.iter().flat_map(|p| p.args.iter().cloned()).collect()
    }
}

/// STRIPS transition: `(facts \ del) ∪ add`.
pub fn apply_operator(state: &SymbolicState, op: &GroundedOperator) -> Result<SymbolicState, PlanError> {
    let missing: Vec<Predicate> = op.preconditions.difference(&state.facts).cloned().collect();
    if !missing.is_empty() {
        return Err(PlanError::PreconditionViolation { op: op.to_string(), missing });
    }
    let mut facts: BTreeSet<Predicate> = state.facts.difference(&op.del_effects).cloned().collect();
    facts.extend(op.add_effects.iter().cloned());
    Ok(SymbolicState { facts })
}

/// Applies every step in turn, returning the final state.
pub fn replay(init: &SymbolicState, plan: &[GroundedOperator]) -> Result<SymbolicState, PlanError> {
    plan.iter().try_fold(init.clone(), |s, op| apply_operator(&s, op))
}

fn match_preconditions(
    pre: &[&Predicate],
    state: &SymbolicState,
    binding: &mut BTreeMap<String, String>,
    found: &mut Vec<BTreeMap<String, String>>,
) {
    let Some((first, rest)) = pre.split_first() else {
        found.push(binding.clone());
        return;
    };
    let probe = Predicate {
        name: first.name.clone(),
        args: Vec::new(),
    };
    for fact in state.facts.range(probe..) {
        if fact.name != first.name {
            break;
        }
        if fact.args.len() != first.args.len() {
            continue;
        }
        let mut added = Vec::new();
        let mut ok = true;
        for (pat, val) in first.args.iter().zip(&fact.args) {
            if is_variable(pat) {
                match binding.get(pat) {
                    Some(b) if b != val => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        binding.insert(pat.clone(), val.clone());
                        added.push(pat.clone());
                    }
                }
            } else if pat != val {
                ok = false;
                break;
            }
        }
        if ok {
            match_preconditions(rest, state, binding, found);
        }
        for v in added {
            binding.remove(&v);
        }
    }
}

/// All argument tuples for which `op` is applicable in `state`, sorted.
///
/// Parameters constrained by no precondition range over `universe`.
pub fn applicable_groundings(
    op: &PlanningOperator,
    state: &SymbolicState,
    universe: &BTreeSet<String>,
) -> BTreeSet<Vec<String>> {
    let pre: Vec<&Predicate> = op.preconditions.iter().collect();
    let mut partial = Vec::new();
    match_preconditions(&pre, state, &mut BTreeMap::new(), &mut partial);
    let mut out = BTreeSet::new();
    for b in partial {
        let mut tuples: Vec<Vec<String>> = vec![Vec::new()];
        for p in &op.params {
            tuples = match b.get(p) {
                Some(v) => tuples
                    .into_iter()
                    .map(|mut t| {
                        t.push(v.clone());
                        t
                    })
                    .collect(),
                None => tuples
                    .into_iter()
                    .flat_map(|t| {
                        universe.iter().map(move |u| {
                            let mut t = t.clone();
                            t.push(u.clone());
                            t
                        })
                    })
                    .collect(),
            };
        }
        out.extend(tuples);
    }
    out
}

/// Breadth-first search over grounded operator applications.
///
/// Operators are tried in library order and groundings in sorted order, so
/// the result is deterministic and of minimal length. Returns `None` when
/// no plan of at most `depth_bound` steps exists.
pub fn plan(
    ops: &[PlanningOperator],
    init: &SymbolicState,
    goal: &BTreeSet<Predicate>,
    universe: &BTreeSet<String>,
    depth_bound: usize,
) -> Option<Vec<GroundedOperator>> {
    if init.satisfies(goal) {
        return Some(Vec::new());
    }
    // Each node: state, parent index, operator that produced it, depth.
    let mut nodes: Vec<(SymbolicState, usize, Option<GroundedOperator>, usize)> = vec![(init.clone(), 0, None, 0)];
    let mut seen: HashSet<SymbolicState> = HashSet::from([init.clone()]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let depth = nodes[i].3;
        if depth >= depth_bound {
            continue;
        }
        for op in ops {
            for args in applicable_groundings(op, &nodes[i].0, universe) {
                let Ok(g) = op.ground(&args) else { continue };
                let Ok(next) = apply_operator(&nodes[i].0, &g) else { continue };
                if !seen.insert(next.clone()) {
                    continue;
                }
                let done = next.satisfies(goal);
                nodes.push((next, i, Some(g), depth + 1));
                let j = nodes.len() - 1;
                if done {
                    let mut steps = Vec::new();
                    let mut k = j;
                    while let Some(op) = nodes[k].2.take() {
                        steps.push(op);
                        k = nodes[k].1;
                    }
                    steps.reverse();
                    return Some(steps);
                }
                queue.push_back(j);
            }
        }
    }
    None
}

/// A role filled from the unit's input objects, optionally restricted to
/// objects for which `type_pred(object)` holds initially.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleSpec {
    pub var: String,
    pub type_pred: Option<String>,
}

/// Goal template of one abstract motion.
///
/// `binds` introduce one new variable each, taken from the first initial
/// fact matching the template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionGoal {
    pub motion: Label,
    pub roles: Vec<RoleSpec>,
    pub binds: Vec<Predicate>,
    pub goals: Vec<Predicate>,
}

impl MotionGoal {
    /// Variable each bind introduces, in order.
    fn bind_targets(&self) -> Vec<String> {
        let mut known: BTreeSet<&str> = self.roles.iter().map(|r| r.var.as_str()).collect();
        let mut out = Vec::new();
        for b in &self.binds {
            let new = b.variables().find(|v| !known.contains(v)).unwrap_or_default();
            known.insert(new);
            out.push(new.to_string());
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MotionGoalMap {
    pub entries: BTreeMap<Label, MotionGoal>,
}

impl MotionGoalMap {
    pub fn get(&self, motion: &Label) -> Option<&MotionGoal> {
        self.entries.get(motion)
    }
}

/// Assigns objects to the entry's variables.
///
/// Typed roles first (first unused input satisfying the type), then binds
/// whose other variables are known, then untyped roles positionally over
/// the remaining inputs, then any binds still pending.
pub fn bind_roles(
    entry: &MotionGoal,
    unit: &FunctionalUnit,
    init: &SymbolicState,
) -> Result<BTreeMap<String, String>, PlanError> {
    let motion = entry.motion.as_str().to_string();
    let unbound = |role: &str| PlanError::UnboundRole {
        motion: motion.clone(),
        role: role.to_string(),
    };
    let mut inputs: Vec<String> = Vec::new();
    for o in &unit.inputs {
        if !inputs.iter().any(|k| k == o.label.key()) {
            inputs.push(o.label.key().to_string());
        }
    }
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut binding: BTreeMap<String, String> = BTreeMap::new();

    for r in &entry.roles {
        let Some(t) = &r.type_pred else { continue };
        let pick = inputs
            .iter()
            .find(|l| !used.contains(*l) && init.holds(&Predicate::new(t, [l.as_str()])))
            .ok_or_else(|| unbound(&r.var))?;
        used.insert(pick.clone());
        binding.insert(r.var.clone(), pick.clone());
    }

    let targets = entry.bind_targets();
    let mut pending: Vec<usize> = (0..entry.binds.len()).collect();
    let run_binds = |pending: &mut Vec<usize>,
                         binding: &mut BTreeMap<String, String>,
                         used: &mut BTreeSet<String>,
                         strict: bool|
     -> Result<(), PlanError> {
        let mut i = 0;
        while i < pending.len() {
            let b = &entry.binds[pending[i]];
            let target = &targets[pending[i]];
            let ready = b.variables().all(|v| v == target || binding.contains_key(v));
            if !ready {
                if strict {
                    return Err(unbound(target));
                }
                i += 1;
                continue;
            }
            let template = b.substitute(binding);
            let value = init
                .facts
                .iter()
                .find_map(|f| {
                    if f.name != template.name || f.args.len() != template.args.len() {
                        return None;
                    }
                    let mut val = None;
                    for (pat, a) in template.args.iter().zip(&f.args) {
                        if pat == target {
                            if val.is_some_and(|v: &String| v != a) {
                                return None;
                            }
                            val = Some(a);
                        } else if pat != a {
                            return None;
                        }
                    }
                    val.cloned()
                })
                .ok_or_else(|| unbound(target))?;
            used.insert(value.clone());
            binding.insert(target.clone(), value);
            pending.remove(i);
        }
        Ok(())
    };
    run_binds(&mut pending, &mut binding, &mut used, false)?;

    for r in entry.roles.iter().filter(|r| r.type_pred.is_none()) {
        let pick = inputs.iter().find(|l| !used.contains(*l)).ok_or_else(|| unbound(&r.var))?;
        used.insert(pick.clone());
        binding.insert(r.var.clone(), pick.clone());
    }
    run_binds(&mut pending, &mut binding, &mut used, false)?;
    run_binds(&mut pending, &mut binding, &mut used, true)?;
    Ok(binding)
}

/// Everything known about one unit's decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub bindings: BTreeMap<String, String>,
    pub goal: BTreeSet<Predicate>,
    pub plan: Vec<GroundedOperator>,
    pub final_state: SymbolicState,
}

/// Binds the unit's roles and instantiates its goal predicates.
pub fn unit_goal(
    unit: &FunctionalUnit,
    goal_map: &MotionGoalMap,
    init: &SymbolicState,
) -> Result<(BTreeMap<String, String>, BTreeSet<Predicate>), PlanError> {
    let entry = goal_map
        .get(&unit.motion.label)
        .ok_or_else(|| PlanError::UnknownMotion(unit.motion.label.as_str().to_string()))?;
    let bindings = bind_roles(entry, unit, init)?;
    let goal = entry.goals.iter().map(|g| g.substitute(&bindings)).collect();
    Ok((bindings, goal))
}

/// Plans one unit and keeps the bindings, goal and final state.
pub fn decompose_unit(
    unit: &FunctionalUnit,
    ops: &[PlanningOperator],
    goal_map: &MotionGoalMap,
    init: &SymbolicState,
    depth_bound: usize,
) -> Result<Decomposition, PlanError> {
    let (bindings, goal) = unit_goal(unit, goal_map, init)?;
    let mut universe = init.constants();
    universe.extend(bindings.values().cloned());
    let plan = plan(ops, init, &goal, &universe, depth_bound).ok_or_else(|| PlanError::NoPlan {
        motion: unit.motion.label.as_str().to_string(),
        depth_bound,
    })?;
    let final_state = replay(init, &plan)?;
    Ok(Decomposition {
        bindings,
        goal,
        plan,
        final_state,
    })
}

/// Shortest primitive chain realising `unit` from `init`.
pub fn decompose(
    unit: &FunctionalUnit,
    ops: &[PlanningOperator],
    goal_map: &MotionGoalMap,
    init: &SymbolicState,
    depth_bound: usize,
) -> Result<Vec<GroundedOperator>, PlanError> {
    decompose_unit(unit, ops, goal_map, init, depth_bound).map(|d| d.plan)
}

/// Decomposes units in order, each starting from the previous final state.
pub fn decompose_all(
    units: &[FunctionalUnit],
    ops: &[PlanningOperator],
    goal_map: &MotionGoalMap,
    init: &SymbolicState,
    depth_bound: usize,
) -> Result<Vec<Decomposition>, (usize, PlanError)> {
    let mut state = init.clone();
    let mut out = Vec::with_capacity(units.len());
    for (i, u) in units.iter().enumerate() {
        let d = decompose_unit(u, ops, goal_map, &state, depth_bound).map_err(|e| (i, e))?;
        state = d.final_state.clone();
        out.push(d);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitPlanView {
    pub unit: usize,
    pub motion: String,
    pub bindings: BTreeMap<String, String>,
    pub goal: Vec<Predicate>,
    pub steps: Vec<String>,
}

/// JSON-friendly view of a decomposed tree: each unit with its chain.
pub fn plan_view(units: &[FunctionalUnit], decomps: &[Decomposition]) -> Vec<UnitPlanView> {
    units
        .iter()
        .zip(decomps)
        .enumerate()
        .map(|(i, (u, d))| UnitPlanView {
            unit: i,
            motion: u.motion.label.as_str().to_string(),
            bindings: d.bindings.clone(),
            goal: d.goal.iter().cloned().collect(),
            steps: d.plan.iter().map(|s| s.to_string()).collect(),
        })
        .collect()
}
