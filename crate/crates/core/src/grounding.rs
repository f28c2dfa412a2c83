//! Threshold rules turning observed numeric features into object states.
//!
//! Rules file, one rule per line (blank lines and `#` comments skipped):
//!
//! ```text
//! R   tomato          pieces      >=          4       diced
//! R   cutting board   objects-on  in-range    0,0     empty
//! R   bowl            fill        >           0.05    contains    [water]
//! ```
//!
//! Operators are `<`, `<=`, `>`, `>=` (`≤` and `≥` also accepted) and
//! `in-range`, a closed interval.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::model::{Kitchen, Label, ObjectNode, StateDescriptor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Comparison {
    Lt(f64),
    Le(f64),
    Gt(f64),
    Ge(f64),
    InRange(f64, f64),
}

impl Comparison {
    pub fn holds(&self, v: f64) -> bool {
        match *self {
            Comparison::Lt(a) => v < a,
            Comparison::Le(a) => v <= a,
            Comparison::Gt(a) => v > a,
            Comparison::Ge(a) => v >= a,
            Comparison::InRange(lo, hi) => lo <= v && v <= hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRule {
    pub object: Label,
    pub feature: String,
    pub op: Comparison,
    pub state: StateDescriptor,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct RuleParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundingError {
    #[error("UnknownObject: no rules mention `{0}`")]
    UnknownObject(String),
    #[error("NoRuleMatched: no `{feature}` rule fires for `{label}`")]
    NoRuleMatched { label: String, feature: String },
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("observation {index}: {error}")]
pub struct SceneError {
    pub index: usize,
    pub error: GroundingError,
}

fn feature_key(s: &str) -> String {
    s.trim().to_lowercase()
}

fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad value {v:?}: {e}")))
        .collect()
}

pub fn parse_rules(text: &str) -> Result<Vec<ThresholdRule>, RuleParseError> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fail = |message: String| RuleParseError { line: n, message };
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f[0] != "R" {
            return Err(fail(format!("expected `R`, found {:?}", f[0])));
        }
        if !(6..=7).contains(&f.len()) {
            return Err(fail(format!("expected 6 or 7 fields, found {}", f.len())));
        }
        if f[1].is_empty() || f[2].is_empty() || f[5].is_empty() {
            return Err(fail("object, feature and state must be non-empty".into()));
        }
        let values = parse_values(f[4]).map_err(fail)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(fail("threshold values must be finite".into()));
        }
        let one = |op: fn(f64) -> Comparison| match values[..] {
            [v] => Ok(op(v)),
            _ => Err(fail(format!("`{}` takes exactly one value", f[3]))),
        };
        let op = match f[3] {
            "<" => one(Comparison::Lt)?,
            "<=" | "≤" => one(Comparison::Le)?,
            ">" => one(Comparison::Gt)?,
            ">=" | "≥" => one(Comparison::Ge)?,
            "in-range" => match values[..] {
                [lo, hi] if lo <= hi => Comparison::InRange(lo, hi),
                [_, _] => return Err(fail("in-range needs lo <= hi".into())),
                _ => return Err(fail("in-range takes exactly two values".into())),
            },
            other => return Err(fail(format!("unknown operator {other:?}"))),
        };
        let state = match f.get(6) {
            Some(r) => {
                let r = r.strip_prefix('[').and_then(|r| r.strip_suffix(']')).unwrap_or(r).trim();
                if r.is_empty() {
                    return Err(fail("empty relation".into()));
                }
                StateDescriptor::related(f[5], r)
            }
            None => StateDescriptor::new(f[5]),
        };
        rules.push(ThresholdRule {
            object: Label::new(f[1]),
            feature: feature_key(f[2]),
            op,
            state,
        });
    }
    Ok(rules)
}

/// One perceived object with already-extracted numeric features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub label: String,
    #[serde(deserialize_with = "unique_features")]
    pub features: BTreeMap<String, f64>,
    #[serde(default)]
    pub centroid: Option<[f64; 3]>,
}

fn unique_features<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
    struct Unique;
    impl<'de> Visitor<'de> for Unique {
        type Value = BTreeMap<String, f64>;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a map of feature names to numbers")
        }
        fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> Result<Self::Value, A::Error> {
            let mut out = BTreeMap::new();
            while let Some((k, v)) = m.next_entry::<String, f64>()? {
                if out.insert(k.clone(), v).is_some() {
                    return Err(serde::de::Error::custom(format!("duplicate feature {k:?}")));
                }
            }
            Ok(out)
        }
    }
    d.deserialize_map(Unique)
}

pub fn parse_observations(text: &str) -> Result<Vec<ObservationRecord>, serde_json::Error> {
    serde_json::from_str(text)
}

/// States assigned to one observation.
///
/// Rules for the observation's label are grouped by feature; within a
/// group the first rule that fires contributes its state. Groups whose
/// feature was not observed are skipped.
pub fn classify_state(obs: &ObservationRecord, rules: &[ThresholdRule]) -> Result<BTreeSet<StateDescriptor>, GroundingError> {
    let label = Label::new(&obs.label);
    if label.is_empty() {
        return Err(GroundingError::InvalidObservation("empty label".into()));
    }
    let mine: Vec<&ThresholdRule> = rules.iter().filter(|r| r.object == label).collect();
    if mine.is_empty() {
        return Err(GroundingError::UnknownObject(obs.label.clone()));
    }
    let features: BTreeMap<String, f64> = obs.features.iter().map(|(k, v)| (feature_key(k), *v)).collect();
    let mut groups: Vec<&str> = Vec::new();
    for r in &mine {
        if !groups.contains(&r.feature.as_str()) {
            groups.push(&r.feature);
        }
    }
    let mut states = BTreeSet::new();
    for g in groups {
        let Some(&v) = features.get(g) else { continue };
        let hit = mine.iter().find(|r| r.feature == g && r.op.holds(v));
        match hit {
            Some(r) => {
                states.insert(r.state.clone());
            }
            None => {
                return Err(GroundingError::NoRuleMatched {
                    label: obs.label.clone(),
                    feature: g.to_string(),
                })
            }
        }
    }
    Ok(states)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundedScene {
    pub kitchen: Kitchen,
    /// Lowercase label → centroid; later observations overwrite earlier ones.
    pub anchors: BTreeMap<String, [f64; 3]>,
}

pub fn ground_scene(observations: &[ObservationRecord], rules: &[ThresholdRule]) -> Result<GroundedScene, SceneError> {
    let mut scene = GroundedScene::default();
    for (index, obs) in observations.iter().enumerate() {
        let states = classify_state(obs, rules).map_err(|error| SceneError { index, error })?;
        let node = ObjectNode {
            label: Label::new(&obs.label),
            states,
            ingredients: BTreeSet::new(),
        };
        if let Some(c) = obs.centroid {
            scene.anchors.insert(node.label.key().to_string(), c);
        }
        scene.kitchen.insert(node);
    }
    Ok(scene)
}

/// The rules shipped with the bundled scenarios.
pub fn bundled_rules() -> Vec<ThresholdRule> {
    parse_rules(include_str!("../data/rules.tsv")).expect("bundled rules parse")
}
