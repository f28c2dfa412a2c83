//! Monte-Carlo execution of task trees.
//!
//! Every step of every trial draws one uniform number from a counter-based
//! generator keyed by `(seed, trial, step)`, so trials are independent of
//! evaluation order. A step succeeds when the draw is below its motion's
//! success rate; the first failure ends the trial.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::{SuccessModel, TaskTree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimulationError {
    #[error("MissingRate: no success rate for motion `{0}`")]
    MissingRate(String),
    #[error("trials must be positive")]
    ZeroTrials,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub trials: u64,
    pub successes: u64,
    pub rate: f64,
    /// Step index → trials that failed there. Steps without failures are absent.
    pub per_step_failures: BTreeMap<usize, u64>,
    pub seed: u64,
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)` for one step of one trial.
pub fn draw(seed: u64, trial: u64, step: u64) -> f64 {
    let key = splitmix64(seed ^ splitmix64(trial));
    let v = splitmix64(key ^ step.wrapping_mul(0xD1B5_4A32_D192_ED03));
    (v >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Simulates a chain of steps with the given success rates.
pub fn simulate_rates(rates: &[f64], seed: u64, trials: u64) -> Result<SimulationReport, SimulationError> {
    if trials == 0 {
        return Err(SimulationError::ZeroTrials);
    }
    let mut successes = 0;
    let mut per_step_failures: BTreeMap<usize, u64> = BTreeMap::new();
    for t in 0..trials {
        match rates.iter().enumerate().find(|(s, &r)| draw(seed, t, *s as u64) >= r) {
            Some((s, _)) => *per_step_failures.entry(s).or_default() += 1,
            None => successes += 1,
        }
    }
    Ok(SimulationReport {
        trials,
        successes,
        rate: successes as f64 / trials as f64,
        per_step_failures,
        seed,
    })
}

pub fn simulate(tree: &TaskTree, model: &SuccessModel, seed: u64, trials: u64) -> Result<SimulationReport, SimulationError> {
    let rates = tree
        .steps
        .iter()
        .map(|u| {
            model
                .rate(&u.motion.label)
                .map_err(|_| SimulationError::MissingRate(u.motion.label.to_string()))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    simulate_rates(&rates, seed, trials)
}

/// Half-width of the `sigmas`-wide binomial band around `p`.
pub fn binomial_band(p: f64, trials: u64, sigmas: f64) -> f64 {
    sigmas * (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::dicing_graph;

    #[test]
    fn product_within_band() {
        let r = simulate_rates(&[0.9, 0.95], 42, 10_000).unwrap();
        assert!((r.rate - 0.855).abs() <= 0.0106, "rate {}", r.rate);
        assert_eq!(r.successes + r.per_step_failures.values().sum::<u64>(), r.trials);
        assert_eq!(r, simulate_rates(&[0.9, 0.95], 42, 10_000).unwrap());
        assert_eq!(r.to_json(), simulate_rates(&[0.9, 0.95], 42, 10_000).unwrap().to_json());
    }

    #[test]
    fn trivial_rates() {
        assert_eq!(simulate_rates(&[], 1, 50).unwrap().rate, 1.0);
        let r = simulate_rates(&[1.0, 0.0, 0.5], 1, 50).unwrap();
        assert_eq!(r.rate, 0.0);
        assert_eq!(r.per_step_failures, BTreeMap::from([(1, 50)]));
        assert_eq!(simulate_rates(&[0.5], 1, 0), Err(SimulationError::ZeroTrials));
    }

    #[test]
    fn draws_are_uniformish() {
        let n = 20_000;
        let mean: f64 = (0..n).map(|t| draw(7, t, 0)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01);
        assert!((0..1000).all(|t| (0.0..1.0).contains(&draw(3, t, 5))));
    }

    #[test]
    fn tree_uses_model() {
        let g = dicing_graph();
        let tree = TaskTree {
            steps: g.units.clone(),
            goal: g.units[1].outputs[0].clone(),
        };
        let model = SuccessModel::new([("pick-and-place", 0.95), ("dice", 0.9)], None).unwrap();
        let r = simulate(&tree, &model, 42, 10_000).unwrap();
        assert!((r.rate - 0.855).abs() <= binomial_band(0.855, 10_000, 3.0));
        let partial = SuccessModel::new([("dice", 0.9)], None).unwrap();
        assert_eq!(
            simulate(&tree, &partial, 42, 10),
            Err(SimulationError::MissingRate("pick-and-place".into()))
        );
    }
}
