//! Binding primitive chains to movement skills.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{GroundedOperator, PlanError};
use crate::dmp::DmpParams;

/// One primitive with its skill retargeted to concrete positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkillStep {
    pub step: usize,
    pub operator: String,
    pub skill: String,
    pub target: String,
    pub params: DmpParams,
}

/// Retargets the skill of every step that has one.
///
/// Each skill starts where the previous one ended (the first at `home`)
/// and ends at the anchor of the operator's target object. Anchor keys are
/// lowercase labels. Steps without a skill are skipped.
pub fn ground_plan(
    plan: &[GroundedOperator],
    skills: &BTreeMap<String, DmpParams>,
    anchors: &BTreeMap<String, [f64; 3]>,
    home: [f64; 3],
) -> Result<Vec<SkillStep>, PlanError> {
    let mut at = home.to_vec();
    let mut out = Vec::new();
    for (i, op) in plan.iter().enumerate() {
        let Some((skill, target)) = &op.skill else { continue };
        let params = skills.get(skill).ok_or_else(|| PlanError::MissingSkill {
            step: i,
            op: op.to_string(),
            skill: skill.clone(),
        })?;
        if params.dim() != 3 {
            return Err(PlanError::DimensionMismatch {
                skill: skill.clone(),
                expected: 3,
                found: params.dim(),
            });
        }
        let goal = anchors.get(&target.to_lowercase()).ok_or_else(|| PlanError::MissingAnchor {
            step: i,
            op: op.to_string(),
            object: target.clone(),
        })?;
        let bound = params.retargeted(at.clone(), goal.to_vec());
        at = goal.to_vec();
        out.push(SkillStep {
            step: i,
            operator: op.to_string(),
            skill: skill.clone(),
            target: target.clone(),
            params: bound,
        });
    }
    Ok(out)
}
