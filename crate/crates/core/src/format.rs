//! The line-based `.foon` subgraph format, plus JSON and DOT export.
//!
//! ```text
//! # placing a tomato on the board
//! O	tomato
//! S	whole
//! O	cutting board
//! S	empty
//! M	pick-and-place
//! O	tomato
//! S	whole
//! S	on	[cutting board]
//! //
//! ```
//!
//! `O` starts an object, `S` and `I` attach a state or an ingredient to the
//! most recent object, `M` names the motion and separates inputs from
//! outputs, and `//` closes the unit. `#` lines and blank lines are skipped.
//! Kitchen and goal files use the same object lines without `M` or `//`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate, FoonGraph, FunctionalUnit, Label, ObjectNode, StateDescriptor, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticKind {
    BadPrefix,
    MissingMotion,
    EmptyUnit,
    OrphanState,
    OrphanIngredient,
    DuplicateDelimiter,
    InvalidEncoding,
}

/// The first problem found while parsing, with a 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind:?}: {message}")]
pub struct ParseDiagnostic {
    pub line: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl ParseDiagnostic {
    fn new(line: usize, kind: DiagnosticKind, message: impl Into<String>) -> Self {
        ParseDiagnostic {
            line,
            kind,
            message: message.into(),
        }
    }
}

/// Returned when asked to export a graph that fails validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct InvalidGraph {
    pub violations: Vec<Violation>,
}

impl fmt::Display for InvalidGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "graph has {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "; {v}")?;
        }
        Ok(())
    }
}

enum Line<'a> {
    Object(&'a str),
    State(&'a str, Option<&'a str>),
    Ingredient(&'a str),
    Motion(&'a str),
    Delimiter,
}

fn classify(n: usize, raw: &str) -> Result<Option<Line<'_>>, ParseDiagnostic> {
    let line = raw.strip_suffix('\r').unwrap_or(raw);
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    if trimmed == "//" {
        return Ok(Some(Line::Delimiter));
    }
    let Some((prefix, rest)) = line.split_once('\t') else {
        return Err(ParseDiagnostic::new(n, DiagnosticKind::BadPrefix, format!("expected `<prefix><TAB>...`, got {trimmed:?}")));
    };
    let fields: Vec<&str> = rest.split('\t').collect();
    let single = |kind: &str| -> Result<&str, ParseDiagnostic> {
        if fields.len() == 1 {
            Ok(fields[0])
        } else {
            Err(ParseDiagnostic::new(n, DiagnosticKind::BadPrefix, format!("{kind} line takes one field, found {}", fields.len())))
        }
    };
    let parsed = match prefix.trim() {
        "O" => Line::Object(single("O")?),
        "I" => Line::Ingredient(single("I")?),
        "M" => Line::Motion(single("M")?),
        "S" => match fields.as_slice() {
            [name] => Line::State(name, None),
            [name, rel] => Line::State(name, Some(strip_brackets(rel))),
            _ => {
                return Err(ParseDiagnostic::new(n, DiagnosticKind::BadPrefix, format!("S line takes one or two fields, found {}", fields.len())))
            }
        },
        other => return Err(ParseDiagnostic::new(n, DiagnosticKind::BadPrefix, format!("unknown line prefix {other:?}"))),
    };
    Ok(Some(parsed))
}

fn strip_brackets(field: &str) -> &str {
    let t = field.trim();
    t.strip_prefix('[').and_then(|s| s.strip_suffix(']')).unwrap_or(t)
}

#[derive(Default)]
struct Block {
    inputs: Vec<ObjectNode>,
    motion: Option<Label>,
    outputs: Vec<ObjectNode>,
    // true while the last `O` is on the current side
    has_current: bool,
    content_lines: usize,
    last_line: usize,
}

impl Block {
    fn current(&mut self) -> Option<&mut ObjectNode> {
        if !self.has_current {
            return None;
        }
        if self.motion.is_some() {
            self.outputs.last_mut()
        } else {
            self.inputs.last_mut()
        }
    }
}

/// Parses `.foon` text into a graph. Units keep file order.
pub fn parse_subgraph(text: &str) -> Result<FoonGraph, ParseDiagnostic> {
    let mut units = Vec::new();
    let mut block = Block::default();
    for (i, raw) in text.split('\n').enumerate() {
        let n = i + 1;
        let Some(line) = classify(n, raw)? else { continue };
        match line {
            Line::Delimiter => {
                let done = std::mem::take(&mut block);
                if done.content_lines == 0 {
                    return Err(ParseDiagnostic::new(n, DiagnosticKind::EmptyUnit, "unit delimiter with no unit content"));
                }
                units.push(finish(done, n)?);
                continue;
            }
            Line::Object(label) => {
                let node = ObjectNode::new(label);
                if block.motion.is_some() {
                    block.outputs.push(node);
                } else {
                    block.inputs.push(node);
                }
                block.has_current = true;
            }
            Line::State(name, rel) => {
                let state = StateDescriptor {
                    name: Label::new(name),
                    relation: rel.map(Label::new),
                };
                let Some(obj) = block.current() else {
                    return Err(ParseDiagnostic::new(n, DiagnosticKind::OrphanState, "state line with no preceding object"));
                };
                obj.states.insert(state);
            }
            Line::Ingredient(label) => {
                let Some(obj) = block.current() else {
                    return Err(ParseDiagnostic::new(n, DiagnosticKind::OrphanIngredient, "ingredient line with no preceding object"));
                };
                obj.ingredients.insert(Label::new(label));
            }
            Line::Motion(label) => {
                if block.motion.is_some() {
                    return Err(ParseDiagnostic::new(n, DiagnosticKind::DuplicateDelimiter, "second motion line in one unit"));
                }
                block.motion = Some(Label::new(label));
                block.has_current = false;
            }
        }
        block.content_lines += 1;
        block.last_line = n;
    }
    if block.content_lines > 0 {
        let last = block.last_line;
        units.push(finish(block, last)?);
    }
    Ok(FoonGraph::new(units))
}

fn finish(block: Block, line: usize) -> Result<FunctionalUnit, ParseDiagnostic> {
    let Some(motion) = block.motion else {
        return Err(ParseDiagnostic::new(line, DiagnosticKind::MissingMotion, "unit has no motion line"));
    };
    Ok(FunctionalUnit::new(block.inputs, motion, block.outputs))
}

/// Parses raw bytes, reporting invalid UTF-8 as a diagnostic.
pub fn parse_subgraph_bytes(bytes: &[u8]) -> Result<FoonGraph, ParseDiagnostic> {
    parse_subgraph(decode(bytes)?)
}

fn decode(bytes: &[u8]) -> Result<&str, ParseDiagnostic> {
    std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        ParseDiagnostic::new(line, DiagnosticKind::InvalidEncoding, "text is not valid UTF-8")
    })
}

/// Parses a flat list of objects (a kitchen or a goal): `O`, `S` and `I`
/// lines only.
pub fn parse_objects(text: &str) -> Result<Vec<ObjectNode>, ParseDiagnostic> {
    let mut out: Vec<ObjectNode> = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let n = i + 1;
        let Some(line) = classify(n, raw)? else { continue };
        match line {
            Line::Object(label) => out.push(ObjectNode::new(label)),
            Line::State(name, rel) => {
                let Some(obj) = out.last_mut() else {
                    return Err(ParseDiagnostic::new(n, DiagnosticKind::OrphanState, "state line with no preceding object"));
                };
                obj.states.insert(StateDescriptor {
                    name: Label::new(name),
                    relation: rel.map(Label::new),
                });
            }
            Line::Ingredient(label) => {
                let Some(obj) = out.last_mut() else {
                    return Err(ParseDiagnostic::new(n, DiagnosticKind::OrphanIngredient, "ingredient line with no preceding object"));
                };
                obj.ingredients.insert(Label::new(label));
            }
            Line::Motion(_) | Line::Delimiter => {
                return Err(ParseDiagnostic::new(n, DiagnosticKind::BadPrefix, "object lists take only O, S and I lines"));
            }
        }
    }
    Ok(out)
}

fn write_object(out: &mut String, o: &ObjectNode) {
    out.push_str("O\t");
    out.push_str(o.label.as_str());
    out.push('\n');
    for s in &o.states {
        out.push_str("S\t");
        out.push_str(s.name.as_str());
        if let Some(r) = &s.relation {
            out.push_str("\t[");
            out.push_str(r.as_str());
            out.push(']');
        }
        out.push('\n');
    }
    for i in &o.ingredients {
        out.push_str("I\t");
        out.push_str(i.as_str());
        out.push('\n');
    }
}

/// Canonical `.foon` text: states and ingredients sorted, one `//` per unit.
pub fn serialize_subgraph(g: &FoonGraph) -> Result<String, InvalidGraph> {
    let violations = validate(g);
    if !violations.is_empty() {
        return Err(InvalidGraph { violations });
    }
    let mut out = String::new();
    for u in &g.units {
        for o in &u.inputs {
            write_object(&mut out, o);
        }
        out.push_str("M\t");
        out.push_str(u.motion.label.as_str());
        out.push('\n');
        for o in &u.outputs {
            write_object(&mut out, o);
        }
        out.push_str("//\n");
    }
    Ok(out)
}

/// Object-list text for kitchens and goals.
pub fn serialize_objects<'a, I: IntoIterator<Item = &'a ObjectNode>>(nodes: I) -> String {
    let mut out = String::new();
    for o in nodes {
        write_object(&mut out, o);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonState {
    pub name: String,
    pub relation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonObject {
    pub label: String,
    pub states: Vec<JsonState>,
    pub ingredients: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonUnit {
    pub inputs: Vec<JsonObject>,
    pub motion: String,
    pub outputs: Vec<JsonObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonGraph {
    pub name: Option<String>,
    pub units: Vec<JsonUnit>,
}

impl From<&ObjectNode> for JsonObject {
    fn from(o: &ObjectNode) -> Self {
        JsonObject {
            label: o.label.to_string(),
            states: o
                .states
                .iter()
                .map(|s| JsonState {
                    name: s.name.to_string(),
                    relation: s.relation.as_ref().map(|r| r.to_string()),
                })
                .collect(),
            ingredients: o.ingredients.iter().map(|i| i.to_string()).collect(),
        }
    }
}

impl From<&FoonGraph> for JsonGraph {
    fn from(g: &FoonGraph) -> Self {
        JsonGraph {
            name: g.name.clone(),
            units: g
                .units
                .iter()
                .map(|u| JsonUnit {
                    inputs: u.inputs.iter().map(JsonObject::from).collect(),
                    motion: u.motion.label.to_string(),
                    outputs: u.outputs.iter().map(JsonObject::from).collect(),
                })
                .collect(),
        }
    }
}

pub fn export_json(g: &FoonGraph) -> Result<String, InvalidGraph> {
    let violations = validate(g);
    if !violations.is_empty() {
        return Err(InvalidGraph { violations });
    }
    Ok(serde_json::to_string(&JsonGraph::from(g)).expect("graph json"))
}

/// Node role for DOT coloring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    InputOnly,
    OutputOnly,
    Both,
}

impl NodeRole {
    pub fn class(self) -> &'static str {
        match self {
            NodeRole::InputOnly => "input",
            NodeRole::OutputOnly => "output",
            NodeRole::Both => "both",
        }
    }

    fn color(self) -> &'static str {
        match self {
            NodeRole::InputOnly => "#7fc97f",
            NodeRole::OutputOnly => "#beaed4",
            NodeRole::Both => "#80b1d3",
        }
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: objects as circles colored by role, motions as squares.
pub fn export_dot(g: &FoonGraph) -> Result<String, InvalidGraph> {
    let violations = validate(g);
    if !violations.is_empty() {
        return Err(InvalidGraph { violations });
    }
    let nodes = g.nodes();
    let ids: BTreeMap<&ObjectNode, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut consumed = BTreeSet::new();
    let mut produced = BTreeSet::new();
    for u in &g.units {
        consumed.extend(u.inputs.iter());
        produced.extend(u.outputs.iter());
    }
    let mut out = String::from("digraph foon {\n  rankdir=LR;\n");
    if let Some(name) = &g.name {
        out.push_str(&format!("  label=\"{}\";\n", dot_escape(name)));
    }
    for (i, n) in nodes.iter().enumerate() {
        let role = match (consumed.contains(n), produced.contains(n)) {
            (true, true) => NodeRole::Both,
            (true, false) => NodeRole::InputOnly,
            _ => NodeRole::OutputOnly,
        };
        let mut text = dot_escape(n.label.as_str());
        if !n.states.is_empty() {
            let states: Vec<String> = n.states.iter().map(|s| s.to_string()).collect();
            text.push_str(&format!("\\n{{{}}}", dot_escape(&states.join(", "))));
        }
        if !n.ingredients.is_empty() {
            let ing: Vec<&str> = n.ingredients.iter().map(|i| i.as_str()).collect();
            text.push_str(&format!("\\n<{}>", dot_escape(&ing.join(", "))));
        }
        out.push_str(&format!(
            "  o{i} [shape=circle, style=filled, fillcolor=\"{}\", class=\"{}\", label=\"{}\"];\n",
            role.color(),
            role.class(),
            text
        ));
    }
    for (ui, u) in g.units.iter().enumerate() {
        out.push_str(&format!(
            "  m{ui} [shape=square, style=filled, fillcolor=\"#fb8072\", class=\"motion\", label=\"{}\"];\n",
            dot_escape(u.motion.label.as_str())
        ));
        let mut edges = BTreeSet::new();
        for o in &u.inputs {
            edges.insert(format!("  o{} -> m{ui};\n", ids[o]));
        }
        for o in &u.outputs {
            edges.insert(format!("  m{ui} -> o{};\n", ids[o]));
        }
        for e in edges {
            out.push_str(&e);
        }
    }
    out.push_str("}\n");
    Ok(out)
}
