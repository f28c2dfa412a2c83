//! PDDL export of an operator library and one unit's planning problem,
//! plus a small reader for the STRIPS subset that export produces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use super::{unit_goal, GroundedOperator, MotionGoalMap, PlanError, PlanningOperator, Predicate, SymbolicState};
use crate::model::FunctionalUnit;

pub const DOMAIN_NAME: &str = "foon-primitives";

const RESERVED: &[&str] = &[
    "and", "not", "or", "define", "domain", "problem", "either", "object", "forall", "exists", "when", "imply",
];

/// Maps free-form names onto PDDL identifiers, keeping them distinct.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NameTable {
    forward: BTreeMap<String, String>,
    taken: BTreeSet<String>,
}

fn sanitize(name: &str) -> String {
    let mut s: String = name
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if !s.starts_with(|c: char| c.is_ascii_alphabetic()) {
        s.insert_str(0, "x-");
    }
    if RESERVED.contains(&s.as_str()) {
        s.push('_');
    }
    s
}

impl NameTable {
    fn intern(&mut self, name: &str) -> String {
        self.intern_as(name, name)
    }

    /// Interns `key`, deriving the identifier from `base`.
    fn intern_as(&mut self, key: &str, base: &str) -> String {
        if let Some(n) = self.forward.get(key) {
            return n.clone();
        }
        let base = sanitize(base);
        let mut cand = base.clone();
        let mut k = 2;
        while self.taken.contains(&cand) {
            cand = format!("{base}-{k}");
            k += 1;
        }
        self.taken.insert(cand.clone());
        self.forward.insert(key.to_string(), cand.clone());
        cand
    }

    /// Predicates are keyed as `name/arity`.
    pub fn get(&self, name: &str) -> Option<&str> {
        self.forward.get(name).map(String::as_str)
    }
}

/// Exported texts and the identifier each original name received.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PddlExport {
    pub domain: String,
    pub problem: String,
    pub objects: NameTable,
    pub predicates: NameTable,
    pub actions: NameTable,
}

impl PddlExport {
    /// Rewrites a plan into exported action and object names.
    pub fn translate(&self, plan: &[GroundedOperator]) -> Option<Vec<(String, Vec<String>)>> {
        plan.iter()
            .map(|s| {
                let name = self.actions.get(&s.name)?.to_string();
                let args = s
                    .args
                    .iter()
                    .map(|a| self.objects.get(a).map(str::to_string))
                    .collect::<Option<Vec<_>>>()?;
                Some((name, args))
            })
            .collect()
    }
}

fn atom(out: &mut String, preds: &mut NameTable, p: &Predicate, arg: impl Fn(&str) -> String) {
    let key = format!("{}/{}", p.name, p.args.len());
    out.push('(');
    out.push_str(&preds.intern_as(&key, &p.name));
    for a in &p.args {
        out.push(' ');
        out.push_str(&arg(a));
    }
    out.push(')');
}

fn conj(
    out: &mut String,
    preds: &mut NameTable,
    pos: &BTreeSet<Predicate>,
    neg: &BTreeSet<Predicate>,
    arg: &dyn Fn(&str) -> String,
) {
    out.push_str("(and");
    for p in pos {
        out.push(' ');
        atom(out, preds, p, arg);
    }
    for p in neg {
        out.push_str(" (not ");
        atom(out, preds, p, arg);
        out.push(')');
    }
    out.push(')');
}

/// Domain for `ops` and a problem whose goal is the unit's instantiated
/// goal predicates.
pub fn export_pddl(
    ops: &[PlanningOperator],
    goal_map: &MotionGoalMap,
    unit: &FunctionalUnit,
    init: &SymbolicState,
) -> Result<PddlExport, PlanError> {
    let (bindings, goal) = unit_goal(unit, goal_map, init)?;
    let mut preds = NameTable::default();
    let mut actions = NameTable::default();
    let mut objects = NameTable::default();

    // Intern predicates first so the declaration list is complete.
    let mut arities: BTreeMap<String, usize> = BTreeMap::new();
    let all = ops
        .iter()
        .flat_map(|o| o.preconditions.iter().chain(&o.add_effects).chain(&o.del_effects))
        .chain(&init.facts)
        .chain(&goal);
    for p in all {
        let key = format!("{}/{}", p.name, p.args.len());
        let id = preds.intern_as(&key, &p.name);
        arities.insert(id, p.args.len());
    }

    let mut d = String::new();
    writeln!(d, "(define (domain {DOMAIN_NAME})").unwrap();
    writeln!(d, "  (:requirements :strips)").unwrap();
    d.push_str("  (:predicates");
    for (id, n) in &arities {
        d.push_str(&format!("\n    ({id}"));
        for i in 0..*n {
            d.push_str(&format!(" ?a{i}"));
        }
        d.push(')');
    }
    d.push_str(")\n");
    for op in ops {
        let mut vars = NameTable::default();
        for p in &op.params {
            vars.intern(&p[1..]);
        }
        let var = |a: &str| format!("?{}", vars.get(&a[1..]).unwrap_or("x"));
        let name = actions.intern(&op.name);
        writeln!(d, "  (:action {name}").unwrap();
        let params: Vec<String> = op.params.iter().map(|p| var(p)).collect();
        writeln!(d, "    :parameters ({})", params.join(" ")).unwrap();
        d.push_str("    :precondition ");
        conj(&mut d, &mut preds, &op.preconditions, &BTreeSet::new(), &var);
        d.push_str("\n    :effect ");
        conj(&mut d, &mut preds, &op.add_effects, &op.del_effects, &var);
        d.push_str(")\n");
    }
    d.push_str(")\n");

    let mut universe = init.constants();
    universe.extend(bindings.values().cloned());
    universe.extend(goal.iter().flat_map(|g| g.args.iter().cloned()));
    let obj_ids: Vec<String> = universe.iter().map(|o| objects.intern(o)).collect();
    let obj = |a: &str| objects.get(a).unwrap_or(a).to_string();

    let mut p = String::new();
    let pname = sanitize(&format!("{}-problem", unit.motion.label.key()));
    writeln!(p, "(define (problem {pname})").unwrap();
    writeln!(p, "  (:domain {DOMAIN_NAME})").unwrap();
    writeln!(p, "  (:objects {})", obj_ids.join(" ")).unwrap();
    p.push_str("  (:init");
    for f in &init.facts {
        p.push_str("\n    ");
        atom(&mut p, &mut preds, f, obj);
    }
    p.push_str(")\n  (:goal ");
    conj(&mut p, &mut preds, &goal, &BTreeSet::new(), &obj);
    p.push_str("))\n");

    Ok(PddlExport {
        domain: d,
        problem: p,
        objects,
        predicates: preds,
        actions,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("PDDL: {0}")]
pub struct PddlError(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexpr {
    Atom(String),
    List(Vec<Sexpr>),
}

impl Sexpr {
    fn list(&self) -> Result<&[Sexpr], PddlError> {
        match self {
            Sexpr::List(v) => Ok(v),
            Sexpr::Atom(a) => Err(PddlError(format!("expected a list, found `{a}`"))),
        }
    }

    fn atom(&self) -> Result<&str, PddlError> {
        match self {
            Sexpr::Atom(a) => Ok(a),
            Sexpr::List(_) => Err(PddlError("expected an atom, found a list".into())),
        }
    }
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split(';').next().unwrap_or("");
        let spaced = line.replace('(', " ( ").replace(')', " ) ");
        out.extend(spaced.split_whitespace().map(|t| t.to_lowercase()));
    }
    out
}

fn parse_sexpr(text: &str) -> Result<Sexpr, PddlError> {
    let tokens = tokenize(text);
    let mut stack: Vec<Vec<Sexpr>> = Vec::new();
    let mut done: Option<Sexpr> = None;
    for t in tokens {
        if done.is_some() {
            return Err(PddlError("trailing input after the top-level form".into()));
        }
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let l = stack.pop().ok_or_else(|| PddlError("unbalanced `)`".into()))?;
                match stack.last_mut() {
                    Some(top) => top.push(Sexpr::List(l)),
                    None => done = Some(Sexpr::List(l)),
                }
            }
            _ => match stack.last_mut() {
                Some(top) => top.push(Sexpr::Atom(t)),
                None => return Err(PddlError(format!("atom `{t}` outside any form"))),
            },
        }
    }
    if !stack.is_empty() {
        return Err(PddlError("unbalanced `(`".into()));
    }
    done.ok_or_else(|| PddlError("empty input".into()))
}

fn header<'a>(top: &'a Sexpr, kind: &str) -> Result<(String, &'a [Sexpr]), PddlError> {
    let items = top.list()?;
    if items.first().map(Sexpr::atom).transpose()? != Some("define") || items.len() < 2 {
        return Err(PddlError("expected (define ...)".into()));
    }
    let h = items[1].list()?;
    if h.len() != 2 || h[0].atom()? != kind {
        return Err(PddlError(format!("expected ({kind} <name>)")));
    }
    Ok((h[1].atom()?.to_string(), &items[2..]))
}

fn literal(e: &Sexpr) -> Result<Predicate, PddlError> {
    let l = e.list()?;
    let (name, args) = l.split_first().ok_or_else(|| PddlError("empty literal".into()))?;
    let args = args.iter().map(Sexpr::atom).collect::<Result<Vec<_>, _>>()?;
    Ok(Predicate::new(name.atom()?, args))
}

/// Positive and negated literals of an `(and ...)` or a single literal.
fn conjunction(e: &Sexpr) -> Result<(BTreeSet<Predicate>, BTreeSet<Predicate>), PddlError> {
    let l = e.list()?;
    let parts: Vec<&Sexpr> = match l.first() {
        Some(Sexpr::Atom(a)) if a == "and" => l[1..].iter().collect(),
        _ if l.is_empty() => Vec::new(),
        _ => vec![e],
    };
    let mut pos = BTreeSet::new();
    let mut neg = BTreeSet::new();
    for p in parts {
        let inner = p.list()?;
        if let Some(Sexpr::Atom(a)) = inner.first() {
            if a == "not" {
                if inner.len() != 2 {
                    return Err(PddlError("(not ...) takes one literal".into()));
                }
                neg.insert(literal(&inner[1])?);
                continue;
            }
        }
        pos.insert(literal(p)?);
    }
    Ok((pos, neg))
}

/// Reads a STRIPS domain into operators (without skills).
pub fn read_domain(text: &str) -> Result<Vec<PlanningOperator>, PddlError> {
    let top = parse_sexpr(text)?;
    let (_, body) = header(&top, "domain")?;
    let mut ops = Vec::new();
    let mut strips = false;
    for section in body {
        let s = section.list()?;
        let Some(key) = s.first() else { continue };
        match key.atom()? {
            ":requirements" => {
                for r in &s[1..] {
                    match r.atom()? {
                        ":strips" => strips = true,
                        other => return Err(PddlError(format!("unsupported requirement {other}"))),
                    }
                }
            }
            ":predicates" => {
                for p in &s[1..] {
                    literal(p)?;
                }
            }
            ":action" => {
                let name = s.get(1).ok_or_else(|| PddlError("action without a name".into()))?.atom()?;
                let mut params = Vec::new();
                let mut pre = BTreeSet::new();
                let mut add = BTreeSet::new();
                let mut del = BTreeSet::new();
                let mut i = 2;
                while i < s.len() {
                    let k = s[i].atom()?;
                    let v = s.get(i + 1).ok_or_else(|| PddlError(format!("{k} without a value")))?;
                    match k {
                        ":parameters" => {
                            params = v.list()?.iter().map(|a| a.atom().map(str::to_string)).collect::<Result<_, _>>()?;
                        }
                        ":precondition" => {
                            let (p, n) = conjunction(v)?;
                            if !n.is_empty() {
                                return Err(PddlError("negative preconditions are not STRIPS".into()));
                            }
                            pre = p;
                        }
                        ":effect" => (add, del) = conjunction(v)?,
                        other => return Err(PddlError(format!("unknown action field {other}"))),
                    }
                    i += 2;
                }
                let op = PlanningOperator::new(name, params, pre, add, del, None).map_err(|e| PddlError(e.to_string()))?;
                ops.push(op);
            }
            other => return Err(PddlError(format!("unknown domain section {other}"))),
        }
    }
    if !strips {
        return Err(PddlError("missing (:requirements :strips)".into()));
    }
    Ok(ops)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PddlProblem {
    pub name: String,
    pub domain: String,
    pub objects: BTreeSet<String>,
    pub init: SymbolicState,
    pub goal: BTreeSet<Predicate>,
}

pub fn read_problem(text: &str) -> Result<PddlProblem, PddlError> {
    let top = parse_sexpr(text)?;
    let (name, body) = header(&top, "problem")?;
    let mut prob = PddlProblem {
        name,
        domain: String::new(),
        objects: BTreeSet::new(),
        init: SymbolicState::default(),
        goal: BTreeSet::new(),
    };
    for section in body {
        let s = section.list()?;
        let Some(key) = s.first() else { continue };
        match key.atom()? {
            ":domain" => prob.domain = s.get(1).ok_or_else(|| PddlError("(:domain) without a name".into()))?.atom()?.to_string(),
            ":objects" => {
                for o in &s[1..] {
                    prob.objects.insert(o.atom()?.to_string());
                }
            }
            ":init" => {
                for f in &s[1..] {
                    let p = literal(f)?;
                    if let Some(a) = p.args.iter().find(|a| !prob.objects.contains(*a)) {
                        return Err(PddlError(format!("undeclared object `{a}` in init")));
                    }
                    prob.init.facts.insert(p);
                }
            }
            ":goal" => {
                let g = s.get(1).ok_or_else(|| PddlError("(:goal) without a formula".into()))?;
                let (pos, neg) = conjunction(g)?;
                if !neg.is_empty() {
                    return Err(PddlError("negative goals are not STRIPS".into()));
                }
                prob.goal = pos;
            }
            other => return Err(PddlError(format!("unknown problem section {other}"))),
        }
    }
    Ok(prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::dicing_graph;
    use crate::planfoon::tests::{dicing_init, pour_init, pour_unit};
    use crate::planfoon::{bundled_goal_map, bundled_operators, decompose, replay, DEFAULT_DEPTH_BOUND};

    fn solves(export: &PddlExport, plan: &[GroundedOperator]) {
        let ops = read_domain(&export.domain).unwrap();
        let prob = read_problem(&export.problem).unwrap();
        assert_eq!(prob.domain, DOMAIN_NAME);
        let mut state = prob.init.clone();
        for (name, args) in export.translate(plan).unwrap() {
            let op = ops.iter().find(|o| o.name == name).unwrap();
            state = crate::planfoon::apply_operator(&state, &op.ground(&args).unwrap()).unwrap();
        }
        assert!(state.satisfies(&prob.goal));
    }

    #[test]
    fn pick_and_place_export_is_self_consistent() {
        let unit = &dicing_graph().units[0];
        let init = dicing_init();
        let ops = bundled_operators();
        let export = export_pddl(&ops, &bundled_goal_map(), unit, &init).unwrap();
        assert!(export.domain.contains("(:requirements :strips)"));
        assert!(export.domain.matches("(:action").count() >= 4);
        let prob = read_problem(&export.problem).unwrap();
        assert_eq!(prob.goal, BTreeSet::from([Predicate::new("on", ["tomato", "cutting_board"])]));
        let plan = decompose(unit, &ops, &bundled_goal_map(), &init, DEFAULT_DEPTH_BOUND).unwrap();
        solves(&export, &plan);
    }

    #[test]
    fn pour_export_goal() {
        let init = pour_init();
        let export = export_pddl(&bundled_operators(), &bundled_goal_map(), &pour_unit(), &init).unwrap();
        assert!(export.problem.contains("(in water bowl)"));
        let plan = decompose(&pour_unit(), &bundled_operators(), &bundled_goal_map(), &init, DEFAULT_DEPTH_BOUND).unwrap();
        assert!(replay(&init, &plan).is_ok());
        solves(&export, &plan);
    }

    #[test]
    fn empty_library_is_valid() {
        let unit = &dicing_graph().units[0];
        let export = export_pddl(&[], &bundled_goal_map(), unit, &dicing_init()).unwrap();
        assert_eq!(export.domain.matches("(:action").count(), 0);
        assert!(read_domain(&export.domain).unwrap().is_empty());
        assert!(read_problem(&export.problem).is_ok());
    }

    #[test]
    fn names_stay_distinct() {
        let mut t = NameTable::default();
        assert_eq!(t.intern("cutting board"), "cutting_board");
        assert_eq!(t.intern("cutting_board"), "cutting_board-2");
        assert_eq!(t.intern("3pans"), "x-3pans");
        assert_eq!(t.intern("and"), "and_");
        assert_eq!(t.intern("cutting board"), "cutting_board");
    }

    #[test]
    fn reader_rejects_bad_input() {
        assert!(parse_sexpr("(a (b)").is_err());
        assert!(parse_sexpr("(a))").is_err());
        assert!(read_domain("(define (domain d))").is_err());
        assert!(read_domain("(define (domain d) (:requirements :typing))").is_err());
        assert!(read_problem("(define (domain d))").is_err());
    }
}
