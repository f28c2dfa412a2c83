//! Object and motion nodes, functional units and graphs.
//!
//! Labels keep the casing they were written with but compare
//! case-insensitively after trimming, so `Tomato` and ` tomato ` name the
//! same object type. Object identity is exact structural equality of the
//! label, the state set and the ingredient set.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

/// A trimmed, case-preserving label compared by its lowercase key.
#[derive(Clone)]
pub struct Label {
    text: String,
    key: String,
}

impl Label {
    pub fn new(text: impl AsRef<str>) -> Self {
        let text = text.as_ref().trim().to_string();
        let key = text.to_lowercase();
        Label { text, key }
    }

    /// The label as written (trimmed).
    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// The comparison key: trimmed and lowercased.
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    fn has_line_break_or_tab(&self) -> bool {
        self.text.contains(['\t', '\n', '\r'])
    }
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Label {}

impl Hash for Label {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.text)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label::new(s)
    }
}

/// A state such as `whole`, or a relational state such as `on [cutting board]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateDescriptor {
    pub name: Label,
    pub relation: Option<Label>,
}

impl StateDescriptor {
    pub fn new(name: impl Into<Label>) -> Self {
        StateDescriptor {
            name: name.into(),
            relation: None,
        }
    }

    pub fn related(name: impl Into<Label>, relation: impl Into<Label>) -> Self {
        StateDescriptor {
            name: name.into(),
            relation: Some(relation.into()),
        }
    }
}

impl fmt::Display for StateDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.relation {
            Some(r) => write!(f, "{} [{}]", self.name, r),
            None => write!(f, "{}", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectNode {
    pub label: Label,
    pub states: BTreeSet<StateDescriptor>,
    pub ingredients: BTreeSet<Label>,
}

impl ObjectNode {
    pub fn new(label: impl Into<Label>) -> Self {
        ObjectNode {
            label: label.into(),
            states: BTreeSet::new(),
            ingredients: BTreeSet::new(),
        }
    }

    pub fn with_state(mut self, name: &str) -> Self {
        self.states.insert(StateDescriptor::new(name));
        self
    }

    pub fn with_relation(mut self, name: &str, relation: &str) -> Self {
        self.states.insert(StateDescriptor::related(name, relation));
        self
    }

    pub fn with_ingredient(mut self, ingredient: &str) -> Self {
        self.ingredients.insert(Label::new(ingredient));
        self
    }

    /// Rule violations of this node alone, as short messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.label.is_empty() {
            out.push("object with empty label".to_string());
        } else if self.label.has_line_break_or_tab() {
            out.push(format!("object label {:?} contains a tab or line break", self.label.as_str()));
        }
        for s in &self.states {
            if s.name.is_empty() {
                out.push(format!("object {:?}: state with empty name", self.label.as_str()));
            } else if s.name.has_line_break_or_tab() {
                out.push(format!("object {:?}: state name contains a tab or line break", self.label.as_str()));
            }
            if let Some(r) = &s.relation {
                if r.is_empty() {
                    out.push(format!("object {:?}: state {:?} with empty relation", self.label.as_str(), s.name.as_str()));
                } else if r.has_line_break_or_tab() {
                    out.push(format!("object {:?}: relation contains a tab or line break", self.label.as_str()));
                }
            }
        }
        for i in &self.ingredients {
            if i.is_empty() {
                out.push(format!("object {:?}: empty ingredient label", self.label.as_str()));
            } else if i.has_line_break_or_tab() {
                out.push(format!("object {:?}: ingredient contains a tab or line break", self.label.as_str()));
            }
        }
        out
    }
}

impl fmt::Display for ObjectNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)?;
        if !self.states.is_empty() {
            let states: Vec<String> = self.states.iter().map(|s| s.to_string()).collect();
            write!(f, "{{{}}}", states.join(", "))?;
        }
        if !self.ingredients.is_empty() {
            let ing: Vec<&str> = self.ingredients.iter().map(|i| i.as_str()).collect();
            write!(f, "<{}>", ing.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MotionNode {
    pub label: Label,
}

impl MotionNode {
    pub fn new(label: impl Into<Label>) -> Self {
        MotionNode { label: label.into() }
    }
}

/// One state transition: input objects, a motion, output objects.
///
/// Objects are kept in file order, but equality treats each side as a
/// multiset.
#[derive(Debug, Clone)]
pub struct FunctionalUnit {
    pub inputs: Vec<ObjectNode>,
    pub motion: MotionNode,
    pub outputs: Vec<ObjectNode>,
}

impl FunctionalUnit {
    pub fn new(inputs: Vec<ObjectNode>, motion: impl Into<Label>, outputs: Vec<ObjectNode>) -> Self {
        FunctionalUnit {
            inputs,
            motion: MotionNode::new(motion),
            outputs,
        }
    }

    fn sorted_sides(&self) -> (Vec<&ObjectNode>, Vec<&ObjectNode>) {
        let mut i: Vec<&ObjectNode> = self.inputs.iter().collect();
        let mut o: Vec<&ObjectNode> = self.outputs.iter().collect();
        i.sort();
        o.sort();
        (i, o)
    }

    /// Order-free text key for the unit; equal units have equal keys.
    pub fn canonical_key(&self) -> String {
        fn push_obj(out: &mut String, o: &ObjectNode) {
            out.push_str(o.label.key());
            out.push('{');
            for s in &o.states {
                out.push_str(s.name.key());
                if let Some(r) = &s.relation {
                    out.push('[');
                    out.push_str(r.key());
                    out.push(']');
                }
                out.push(';');
            }
            out.push('}');
            out.push('<');
            for i in &o.ingredients {
                out.push_str(i.key());
                out.push(';');
            }
            out.push('>');
            out.push('\t');
        }
        let (i, o) = self.sorted_sides();
        let mut out = String::new();
        for n in i {
            push_obj(&mut out, n);
        }
        out.push_str("\n=> ");
        out.push_str(self.motion.label.key());
        out.push_str(" =>\n");
        for n in o {
            push_obj(&mut out, n);
        }
        out
    }

    pub fn produces(&self, node: &ObjectNode) -> bool {
        self.outputs.iter().any(|o| o == node)
    }

    pub fn consumes(&self, node: &ObjectNode) -> bool {
        self.inputs.iter().any(|o| o == node)
    }
}

/// True iff motions match and both sides are equal as multisets.
pub fn unit_equals(a: &FunctionalUnit, b: &FunctionalUnit) -> bool {
    a.motion == b.motion && a.sorted_sides() == b.sorted_sides()
}

impl PartialEq for FunctionalUnit {
    fn eq(&self, other: &Self) -> bool {
        unit_equals(self, other)
    }
}

impl Eq for FunctionalUnit {}

impl Hash for FunctionalUnit {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let (i, o) = self.sorted_sides();
        i.hash(state);
        self.motion.hash(state);
        o.hash(state);
    }
}

impl fmt::Display for FunctionalUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i: Vec<String> = self.inputs.iter().map(|o| o.to_string()).collect();
        let o: Vec<String> = self.outputs.iter().map(|o| o.to_string()).collect();
        write!(f, "[{}] --{}--> [{}]", i.join(", "), self.motion.label, o.join(", "))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FoonGraph {
    pub name: Option<String>,
    pub units: Vec<FunctionalUnit>,
}

impl FoonGraph {
    pub fn new(units: Vec<FunctionalUnit>) -> Self {
        FoonGraph { name: None, units }
    }

    pub fn named(name: impl Into<String>, units: Vec<FunctionalUnit>) -> Self {
        FoonGraph {
            name: Some(name.into()),
            units,
        }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Distinct object nodes, in order of first appearance.
    pub fn nodes(&self) -> Vec<&ObjectNode> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for u in &self.units {
            for o in u.inputs.iter().chain(&u.outputs) {
                if seen.insert(o) {
                    out.push(o);
                }
            }
        }
        out
    }

    pub fn contains_node(&self, node: &ObjectNode) -> bool {
        self.units.iter().any(|u| u.consumes(node) || u.produces(node))
    }
}

/// The objects available to the robot when planning.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Kitchen {
    pub available: BTreeSet<ObjectNode>,
}

impl Kitchen {
    pub fn new<I: IntoIterator<Item = ObjectNode>>(nodes: I) -> Self {
        Kitchen {
            available: nodes.into_iter().collect(),
        }
    }

    pub fn contains(&self, node: &ObjectNode) -> bool {
        self.available.contains(node)
    }

    pub fn insert(&mut self, node: ObjectNode) -> bool {
        self.available.insert(node)
    }

    pub fn len(&self) -> usize {
        self.available.len()
    }

    pub fn is_empty(&self) -> bool {
        self.available.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObjectNode> {
        self.available.iter()
    }
}

/// Which units produce and consume one object node, by unit index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeUsage {
    pub producers: Vec<usize>,
    pub consumers: Vec<usize>,
}

pub type ObjectIndex = BTreeMap<ObjectNode, NodeUsage>;

/// Maps every object node in `g` to the units producing and consuming it.
/// Each unit index appears at most once per list, in ascending order.
pub fn object_index(g: &FoonGraph) -> ObjectIndex {
    let mut index: ObjectIndex = BTreeMap::new();
    for (ui, u) in g.units.iter().enumerate() {
        for o in &u.inputs {
            let usage = index.entry(o.clone()).or_default();
            if usage.consumers.last() != Some(&ui) {
                usage.consumers.push(ui);
            }
        }
        for o in &u.outputs {
            let usage = index.entry(o.clone()).or_default();
            if usage.producers.last() != Some(&ui) {
                usage.producers.push(ui);
            }
        }
    }
    index
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    NoInputs,
    NoOutputs,
    EmptyMotion,
    BadObject(String),
    DuplicateUnit { first: usize },
}

/// A broken invariant, attributed to a unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub unit: usize,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rule {
            Rule::NoInputs => write!(f, "unit {}: no inputs", self.unit),
            Rule::NoOutputs => write!(f, "unit {}: no outputs", self.unit),
            Rule::EmptyMotion => write!(f, "unit {}: empty motion label", self.unit),
            Rule::BadObject(msg) => write!(f, "unit {}: {}", self.unit, msg),
            Rule::DuplicateUnit { first } => {
                write!(f, "unit {}: duplicate unit (same as unit {})", self.unit, first)
            }
        }
    }
}

pub fn validate(g: &FoonGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: std::collections::HashMap<&FunctionalUnit, usize> = Default::default();
    for (ui, u) in g.units.iter().enumerate() {
        if u.inputs.is_empty() {
            out.push(Violation { unit: ui, rule: Rule::NoInputs });
        }
        if u.outputs.is_empty() {
            out.push(Violation { unit: ui, rule: Rule::NoOutputs });
        }
        if u.motion.label.is_empty() {
            out.push(Violation { unit: ui, rule: Rule::EmptyMotion });
        } else if u.motion.label.has_line_break_or_tab() {
            out.push(Violation {
                unit: ui,
                rule: Rule::BadObject("motion label contains a tab or line break".into()),
            });
        }
        for o in u.inputs.iter().chain(&u.outputs) {
            for msg in o.violations() {
                out.push(Violation { unit: ui, rule: Rule::BadObject(msg) });
            }
        }
        match seen.get(u) {
            Some(&first) => out.push(Violation {
                unit: ui,
                rule: Rule::DuplicateUnit { first },
            }),
            None => {
                seen.insert(u, ui);
            }
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn tomato_whole() -> ObjectNode {
        ObjectNode::new("tomato").with_state("whole")
    }

    pub fn dicing_graph() -> FoonGraph {
        let board_empty = ObjectNode::new("cutting board").with_state("empty");
        let board_full = ObjectNode::new("cutting board").with_relation("contains", "tomato");
        let tomato_on = ObjectNode::new("tomato")
            .with_state("whole")
            .with_relation("on", "cutting board");
        let tomato_diced = ObjectNode::new("tomato")
            .with_state("diced")
            .with_relation("on", "cutting board");
        FoonGraph::new(vec![
            FunctionalUnit::new(
                vec![tomato_whole(), board_empty],
                "pick-and-place",
                vec![tomato_on.clone(), board_full.clone()],
            ),
            FunctionalUnit::new(
                vec![tomato_on, board_full.clone(), ObjectNode::new("knife")],
                "dice",
                vec![tomato_diced, board_full],
            ),
        ])
    }

    #[test]
    fn labels_compare_case_insensitively() {
        assert_eq!(Label::new(" Tomato "), Label::new("tomato"));
        assert_eq!(Label::new(" Tomato ").as_str(), "Tomato");
        assert_ne!(Label::new("tomato"), Label::new("potato"));
    }

    #[test]
    fn unit_equality() {
        let g = dicing_graph();
        assert!(unit_equals(&g.units[0], &g.units[0]));
        assert!(!unit_equals(&g.units[0], &g.units[1]));
        let mut reversed = g.units[1].clone();
        reversed.inputs.reverse();
        assert!(unit_equals(&g.units[1], &reversed));
        assert_eq!(g.units[1].canonical_key(), reversed.canonical_key());
    }

    #[test]
    fn multiset_sides_count_multiplicity() {
        let a = FunctionalUnit::new(vec![tomato_whole()], "dice", vec![ObjectNode::new("x")]);
        let b = FunctionalUnit::new(vec![tomato_whole(), tomato_whole()], "dice", vec![ObjectNode::new("x")]);
        assert!(!unit_equals(&a, &b));
    }

    #[test]
    fn index_of_empty_graph_is_empty() {
        assert!(object_index(&FoonGraph::default()).is_empty());
    }

    #[test]
    fn index_links_shared_node() {
        let g = dicing_graph();
        let idx = object_index(&g);
        let on_board = ObjectNode::new("tomato")
            .with_state("whole")
            .with_relation("on", "cutting board");
        let usage = &idx[&on_board];
        assert_eq!(usage.producers, vec![0]);
        assert_eq!(usage.consumers, vec![1]);
        assert_eq!(idx.len(), g.nodes().len());
    }

    #[test]
    fn index_lists_repeated_output_once() {
        let x = ObjectNode::new("x");
        let g = FoonGraph::new(vec![FunctionalUnit::new(
            vec![ObjectNode::new("a")],
            "split",
            vec![x.clone(), x.clone()],
        )]);
        let idx = object_index(&g);
        // linear scan oracle
        let expected: Vec<usize> = g
            .units
            .iter()
            .enumerate()
            .filter(|(_, u)| u.outputs.contains(&x))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(idx[&x].producers, expected);
    }

    #[test]
    fn dicing_graph_is_valid() {
        assert!(validate(&dicing_graph()).is_empty());
    }

    #[test]
    fn missing_outputs_reported() {
        let g = FoonGraph::new(vec![FunctionalUnit::new(vec![ObjectNode::new("knife")], "dice", vec![])]);
        let v = validate(&g);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "unit 0: no outputs");
    }

    #[test]
    fn duplicate_unit_reported() {
        let mut g = dicing_graph();
        let first = g.units[0].clone();
        g.units.push(first);
        let v = validate(&g);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::DuplicateUnit { first: 0 });
        assert!(v[0].to_string().contains("duplicate unit"));
    }

    #[test]
    fn empty_labels_reported() {
        let g = FoonGraph::new(vec![FunctionalUnit::new(
            vec![ObjectNode::new("  ")],
            "",
            vec![ObjectNode::new("a").with_relation("on", " ")],
        )]);
        let v = validate(&g);
        assert!(v.iter().any(|v| v.rule == Rule::EmptyMotion));
        assert_eq!(v.iter().filter(|v| matches!(v.rule, Rule::BadObject(_))).count(), 2);
    }
}
