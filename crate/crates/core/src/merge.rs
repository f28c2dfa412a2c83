//! Combining subgraphs into a universal FOON.

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{validate, FoonGraph, FunctionalUnit, MotionNode, ObjectNode, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("input graph {graph} is invalid: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct MergeError {
    pub graph: usize,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MergeStats {
    pub units_in: usize,
    pub units_out: usize,
    pub duplicates_removed: usize,
    pub distinct_objects: usize,
}

fn check_inputs(graphs: &[FoonGraph]) -> Result<(), MergeError> {
    for (gi, g) in graphs.iter().enumerate() {
        let violations = validate(g);
        if !violations.is_empty() {
            return Err(MergeError { graph: gi, violations });
        }
    }
    Ok(())
}

/// Rewrites objects and motions to the first-seen spelling of each identity.
#[derive(Default)]
struct Consolidator {
    objects: HashMap<ObjectNode, ObjectNode>,
    motions: HashMap<MotionNode, MotionNode>,
}

impl Consolidator {
    fn object(&mut self, o: &ObjectNode) -> ObjectNode {
        self.objects.entry(o.clone()).or_insert_with(|| o.clone()).clone()
    }

    fn unit(&mut self, u: &FunctionalUnit) -> FunctionalUnit {
        let motion = self.motions.entry(u.motion.clone()).or_insert_with(|| u.motion.clone()).clone();
        FunctionalUnit {
            inputs: u.inputs.iter().map(|o| self.object(o)).collect(),
            motion,
            outputs: u.outputs.iter().map(|o| self.object(o)).collect(),
        }
    }
}

/// Merges graphs, keeping the first occurrence of every distinct unit.
///
/// Object nodes with the same identity are consolidated to one spelling.
pub fn merge(graphs: &[FoonGraph]) -> Result<FoonGraph, MergeError> {
    check_inputs(graphs)?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut consolidate = Consolidator::default();
    let mut units = Vec::new();
    for u in graphs.iter().flat_map(|g| &g.units) {
        if seen.insert(u.canonical_key()) {
            units.push(consolidate.unit(u));
        }
    }
    Ok(FoonGraph::new(units))
}

pub fn merge_stats(graphs: &[FoonGraph]) -> Result<MergeStats, MergeError> {
    let merged = merge(graphs)?;
    let units_in: usize = graphs.iter().map(|g| g.units.len()).sum();
    Ok(MergeStats {
        units_in,
        units_out: merged.units.len(),
        duplicates_removed: units_in - merged.units.len(),
        distinct_objects: merged.nodes().len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::dicing_graph;
    use crate::model::unit_equals;

    fn pairwise_distinct(units: &[&FunctionalUnit]) -> usize {
        let mut kept: Vec<&FunctionalUnit> = Vec::new();
        for u in units {
            if !kept.iter().any(|k| unit_equals(k, u)) {
                kept.push(u);
            }
        }
        kept.len()
    }

    #[test]
    fn idempotent_on_self() {
        let g = dicing_graph();
        let m = merge(&[g.clone(), g.clone()]).unwrap();
        assert_eq!(m.units.len(), g.units.len());
        let stats = merge_stats(&[g.clone(), g.clone()]).unwrap();
        assert_eq!(stats.duplicates_removed, g.units.len());
        assert_eq!(merge_stats(&[g]).unwrap().duplicates_removed, 0);
    }

    #[test]
    fn disjoint_union() {
        let g = dicing_graph();
        let other = FoonGraph::new(vec![FunctionalUnit::new(
            vec![ObjectNode::new("egg").with_state("whole")],
            "crack",
            vec![ObjectNode::new("egg").with_state("cracked")],
        )]);
        let m = merge(&[g.clone(), other.clone()]).unwrap();
        assert_eq!(m.units.len(), 3);
        let all: Vec<&FunctionalUnit> = g.units.iter().chain(&other.units).collect();
        assert_eq!(pairwise_distinct(&all), 3);
    }

    #[test]
    fn rejects_invalid_input() {
        let bad = FoonGraph::new(vec![FunctionalUnit::new(vec![ObjectNode::new("a")], "x", vec![])]);
        let err = merge(&[dicing_graph(), bad]).unwrap_err();
        assert_eq!(err.graph, 1);
        assert_eq!(err.violations.len(), 1);
    }

    #[test]
    fn consolidates_spellings() {
        let a = FoonGraph::new(vec![FunctionalUnit::new(vec![ObjectNode::new("Tomato")], "Dice", vec![ObjectNode::new("x")])]);
        let b = FoonGraph::new(vec![FunctionalUnit::new(
            vec![ObjectNode::new("tomato")],
            "chop",
            vec![ObjectNode::new("X")],
        )]);
        let m = merge(&[a, b]).unwrap();
        assert_eq!(m.units.len(), 2);
        assert_eq!(m.units[1].inputs[0].label.as_str(), "Tomato");
        assert_eq!(m.units[1].outputs[0].label.as_str(), "x");
        assert_eq!(m.nodes().len(), 2);
    }
}
