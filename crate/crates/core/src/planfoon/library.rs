//! Text formats for operator libraries, goal maps and initial states.
//!
//! All three are tab-separated and line-based; blank lines and lines
//! starting with `#` are ignored.
//!
//! Operators:
//!
//! ```text
//! OP      grasp       ?g  ?o
//! SKILL   grasp       ?o
//! PRE     at          ?g  ?o
//! ADD     in-hand     ?g  ?o
//! DEL     hand-empty  ?g
//! END
//! ```
//!
//! Goal maps:
//!
//! ```text
//! MOTION  dice
//! ROLE    ?tool   blade
//! BIND    home    ?tool   ?tool-home
//! GOAL    diced   ?obj
//! END
//! ```
//!
//! Initial states list one fact per line: `pred<TAB>arg<TAB>arg`.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{is_variable, MotionGoal, MotionGoalMap, PlanningOperator, Predicate, RoleSpec, SkillRef, SymbolicState};
use crate::model::Label;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError {
        line,
        message: message.into(),
    })
}

fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') {
            None
        } else {
            Some((i + 1, l.split('\t').map(str::trim).filter(|f| !f.is_empty()).collect()))
        }
    })
}

fn predicate(line: usize, fields: &[&str]) -> Result<Predicate, FormatError> {
    match fields.split_first() {
        Some((name, args)) => Ok(Predicate::new(name, args.iter().copied())),
        None => err(line, "missing predicate name"),
    }
}

#[derive(Default)]
struct OpDraft {
    line: usize,
    name: String,
    params: Vec<String>,
    pre: BTreeSet<Predicate>,
    add: BTreeSet<Predicate>,
    del: BTreeSet<Predicate>,
    skill: Option<SkillRef>,
}

pub fn parse_operators(text: &str) -> Result<Vec<PlanningOperator>, FormatError> {
    let mut ops = Vec::new();
    let mut cur: Option<OpDraft> = None;
    let mut names = BTreeSet::new();
    for (n, f) in lines(text) {
        match (f[0], cur.as_mut()) {
            ("OP", None) => {
                if f.len() < 2 {
                    return err(n, "OP needs a name");
                }
                cur = Some(OpDraft {
                    line: n,
                    name: f[1].to_lowercase(),
                    params: f[2..].iter().map(|p| p.to_lowercase()).collect(),
                    ..Default::default()
                });
            }
            ("OP", Some(_)) => return err(n, "OP inside an unterminated operator"),
            ("SKILL", Some(d)) => {
                if f.len() != 3 {
                    return err(n, "SKILL takes an id and a target parameter");
                }
                if d.skill.is_some() {
                    return err(n, "second SKILL line");
                }
                d.skill = Some(SkillRef {
                    skill: f[1].to_lowercase(),
                    target: f[2].to_lowercase(),
                });
            }
            ("PRE", Some(d)) => {
                d.pre.insert(predicate(n, &f[1..])?);
            }
            ("ADD", Some(d)) => {
                d.add.insert(predicate(n, &f[1..])?);
            }
            ("DEL", Some(d)) => {
                d.del.insert(predicate(n, &f[1..])?);
            }
            ("END", Some(_)) => {
                let d = cur.take().unwrap();
                if !names.insert(d.name.clone()) {
                    return err(d.line, format!("operator `{}` defined twice", d.name));
                }
                let op = PlanningOperator::new(&d.name, d.params, d.pre, d.add, d.del, d.skill)
                    .map_err(|e| FormatError {
                        line: d.line,
                        message: e.to_string(),
                    })?;
                ops.push(op);
            }
            ("SKILL" | "PRE" | "ADD" | "DEL" | "END", None) => return err(n, format!("{} outside an operator", f[0])),
            (other, _) => return err(n, format!("unknown keyword `{other}`")),
        }
    }
    if let Some(d) = cur {
        return err(d.line, format!("operator `{}` is missing END", d.name));
    }
    Ok(ops)
}

fn pred_fields(p: &Predicate) -> String {
    std::iter::once(p.name.as_str())
        .chain(p.args.iter().map(String::as_str))
        .collect::<Vec<_>>()
        .join("\t")
}

pub fn serialize_operators(ops: &[PlanningOperator]) -> String {
    let mut out = String::new();
    for op in ops {
        out.push_str("OP\t");
        out.push_str(&op.name);
        for p in &op.params {
            out.push('\t');
            out.push_str(p);
        }
        out.push('\n');
        if let Some(s) = &op.skill {
            out.push_str(&format!("SKILL\t{}\t{}\n", s.skill, s.target));
        }
        for (kw, set) in [("PRE", &op.preconditions), ("ADD", &op.add_effects), ("DEL", &op.del_effects)] {
            for p in set {
                out.push_str(&format!("{kw}\t{}\n", pred_fields(p)));
            }
        }
        out.push_str("END\n");
    }
    out
}

struct GoalDraft {
    line: usize,
    motion: Label,
    roles: Vec<RoleSpec>,
    binds: Vec<Predicate>,
    goals: Vec<Predicate>,
    declared: BTreeSet<String>,
}

pub fn parse_goal_map(text: &str) -> Result<MotionGoalMap, FormatError> {
    let mut map = MotionGoalMap::default();
    let mut cur: Option<GoalDraft> = None;
    for (n, f) in lines(text) {
        match (f[0], cur.as_mut()) {
            ("MOTION", None) => {
                if f.len() != 2 {
                    return err(n, "MOTION takes one label");
                }
                cur = Some(GoalDraft {
                    line: n,
                    motion: Label::new(f[1]),
                    roles: Vec::new(),
                    binds: Vec::new(),
                    goals: Vec::new(),
                    declared: BTreeSet::new(),
                });
            }
            ("MOTION", Some(_)) => return err(n, "MOTION inside an unterminated entry"),
            ("ROLE", Some(d)) => {
                if !(2..=3).contains(&f.len()) {
                    return err(n, "ROLE takes a variable and an optional type predicate");
                }
                let var = f[1].to_lowercase();
                if !is_variable(&var) {
                    return err(n, format!("`{var}` is not a variable"));
                }
                if !d.declared.insert(var.clone()) {
                    return err(n, format!("`{var}` declared twice"));
                }
                d.roles.push(RoleSpec {
                    var,
                    type_pred: f.get(2).map(|t| t.to_lowercase()),
                });
            }
            ("BIND", Some(d)) => {
                let p = predicate(n, &f[1..])?;
                let fresh: BTreeSet<&str> = p.variables().filter(|v| !d.declared.contains(*v)).collect();
                if fresh.len() != 1 {
                    return err(n, format!("BIND must introduce exactly one new variable, {p} introduces {}", fresh.len()));
                }
                d.declared.insert(fresh.into_iter().next().unwrap().to_string());
                d.binds.push(p);
            }
            ("GOAL", Some(d)) => {
                let p = predicate(n, &f[1..])?;
                if let Some(v) = p.variables().find(|v| !d.declared.contains(*v)) {
                    return err(n, format!("`{v}` is not a declared role"));
                }
                d.goals.push(p);
            }
            ("END", Some(_)) => {
                let d = cur.take().unwrap();
                if d.goals.is_empty() {
                    return err(d.line, format!("`{}` has no GOAL", d.motion.as_str()));
                }
                if map.entries.contains_key(&d.motion) {
                    return err(d.line, format!("`{}` mapped twice", d.motion.as_str()));
                }
                map.entries.insert(
                    d.motion.clone(),
                    MotionGoal {
                        motion: d.motion,
                        roles: d.roles,
                        binds: d.binds,
                        goals: d.goals,
                    },
                );
            }
            ("ROLE" | "BIND" | "GOAL" | "END", None) => return err(n, format!("{} outside an entry", f[0])),
            (other, _) => return err(n, format!("unknown keyword `{other}`")),
        }
    }
    if let Some(d) = cur {
        return err(d.line, format!("`{}` is missing END", d.motion.as_str()));
    }
    Ok(map)
}

pub fn parse_init(text: &str) -> Result<SymbolicState, FormatError> {
    let mut facts = BTreeSet::new();
    for (n, f) in lines(text) {
        let p = predicate(n, &f)?;
        if !p.is_ground() {
            return err(n, format!("{p} is not ground"));
        }
        facts.insert(p);
    }
    Ok(SymbolicState { facts })
}

pub fn serialize_init(state: &SymbolicState) -> String {
    state.facts.iter().map(|p| pred_fields(p) + "\n").collect()
}

/// The operator library shipped with the crate.
pub fn bundled_operators() -> Vec<PlanningOperator> {
    parse_operators(include_str!("../../data/primitives.ops")).expect("bundled operators parse")
}

/// Goal templates for the bundled motions.
pub fn bundled_goal_map() -> MotionGoalMap {
    parse_goal_map(include_str!("../../data/goal_map.txt")).expect("bundled goal map parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_library_shape() {
        let ops = bundled_operators();
        let names: Vec<&str> = ops.iter().map(|o| o.name.as_str()).collect();
        assert_eq!(names, ["move-to", "grasp", "release", "transport", "tilt-pour", "dice-stroke"]);
        assert!(ops.iter().all(|o| o.skill.is_some()));
        let map = bundled_goal_map();
        assert_eq!(map.entries.len(), 3);
    }

    #[test]
    fn operators_round_trip() {
        let ops = bundled_operators();
        assert_eq!(parse_operators(&serialize_operators(&ops)).unwrap(), ops);
    }

    #[test]
    fn operator_errors_carry_lines() {
        assert_eq!(parse_operators("OP\tx\t?a\nPRE\tf\t?b\nEND\n").unwrap_err().line, 1);
        assert_eq!(parse_operators("PRE\tf\n").unwrap_err().line, 1);
        assert_eq!(parse_operators("OP\tx\n\nADD\tf\n").unwrap_err().line, 1);
        assert_eq!(parse_operators("OP\tx\nEND\nOP\tx\nEND\n").unwrap_err().line, 3);
        assert!(parse_operators("\n# nothing\n").unwrap().is_empty());
    }

    #[test]
    fn goal_map_validation() {
        assert!(parse_goal_map("MOTION\tm\nROLE\t?a\nGOAL\tf\t?b\nEND\n").is_err());
        assert!(parse_goal_map("MOTION\tm\nROLE\t?a\nBIND\tf\t?a\nGOAL\tf\t?a\nEND\n").is_err());
        assert!(parse_goal_map("MOTION\tm\nROLE\t?a\nEND\n").is_err());
        let ok = parse_goal_map("MOTION\tM\nROLE\t?a\nBIND\th\t?a\t?b\nGOAL\tf\t?b\nEND\n").unwrap();
        assert!(ok.get(&Label::new("m")).is_some());
    }

    #[test]
    fn init_round_trip() {
        let s = parse_init("at\tgripper\tcutting board\n# c\nhand-empty\tgripper\n").unwrap();
        assert_eq!(s.facts.len(), 2);
        assert_eq!(parse_init(&serialize_init(&s)).unwrap(), s);
        assert!(parse_init("at\t?x\n").is_err());
    }
}
