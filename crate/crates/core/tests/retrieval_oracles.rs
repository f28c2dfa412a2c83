mod support;

use std::collections::BTreeSet;

use foon::retrieval::{enumerate_task_trees, retrieve_optimal, retrieve_task_tree, score_tree, RetrievalError, SuccessModel};
use foon::Kitchen;
use rand::seq::SliceRandom;
use support::*;

#[test]
fn verdicts_match_forward_closure() {
    let mut r = rng(11);
    for _ in 0..300 {
        let q = random_query(&mut r, 12);
        let units: Vec<_> = q.foon.units.iter().collect();
        let solvable = forward_closure(&units, &q.kitchen).contains(&q.goal);
        match retrieve_task_tree(&q.foon, &q.goal, &q.kitchen) {
            Ok(tree) => {
                assert!(solvable);
                tree.replay(&q.kitchen).unwrap();
            }
            Err(RetrievalError::Unsolvable(_) | RetrievalError::GoalUnknown(_)) => assert!(!solvable),
            Err(e) => panic!("unexpected {e}"),
        }
    }
}

#[test]
fn enumeration_matches_minimal_subsets() {
    let mut r = rng(12);
    for _ in 0..200 {
        let q = random_query(&mut r, 10);
        let (distinct, oracle) = minimal_tree_sets(&q.foon, &q.kitchen, &q.goal);
        let oracle: BTreeSet<BTreeSet<usize>> = oracle.into_iter().collect();
        match enumerate_task_trees(&q.foon, &q.goal, &q.kitchen, 4096) {
            Ok(trees) => {
                let got: BTreeSet<BTreeSet<usize>> = trees.iter().map(|t| tree_set(&distinct, &t.steps)).collect();
                assert_eq!(got.len(), trees.len(), "trees must be distinct by unit set");
                for t in &trees {
                    t.replay(&q.kitchen).unwrap();
                }
                assert_eq!(got, oracle);
            }
            Err(_) => assert!(oracle.is_empty()),
        }
    }
}

#[test]
fn enlarging_the_kitchen_keeps_solvability() {
    let mut r = rng(13);
    for _ in 0..200 {
        let q = random_query(&mut r, 12);
        if retrieve_task_tree(&q.foon, &q.goal, &q.kitchen).is_err() {
            continue;
        }
        let mut bigger: Kitchen = q.kitchen.clone();
        bigger.insert(q.pool.choose(&mut r).unwrap().clone());
        bigger.insert(q.pool.choose(&mut r).unwrap().clone());
        retrieve_task_tree(&q.foon, &q.goal, &bigger).unwrap().replay(&bigger).unwrap();
    }
}

#[test]
fn optimal_dominates_alternatives() {
    let mut r = rng(14);
    let mut checked = 0;
    while checked < 100 {
        let q = random_query(&mut r, 12);
        let model = SuccessModel::new(random_rates(&mut r, 4), None).unwrap();
        let Ok(trees) = enumerate_task_trees(&q.foon, &q.goal, &q.kitchen, 64) else { continue };
        let best = retrieve_optimal(&q.foon, &q.goal, &q.kitchen, &model, 64).unwrap();
        let s = score_tree(&best, &model).unwrap();
        assert!(trees.iter().all(|t| score_tree(t, &model).unwrap() <= s));
        checked += 1;
    }
}

#[test]
fn equal_length_argmax_survives_scaling() {
    let mut r = rng(15);
    for _ in 0..100 {
        let (foon, kitchen, goal, len) = equal_length_routes(&mut r);
        let model = SuccessModel::new(random_rates(&mut r, 6), None).unwrap();
        let trees = enumerate_task_trees(&foon, &goal, &kitchen, 64).unwrap();
        assert!(trees.iter().all(|t| t.len() == len));
        let best = retrieve_optimal(&foon, &goal, &kitchen, &model, 64).unwrap();
        for c in [0.5, 0.9] {
            assert_eq!(retrieve_optimal(&foon, &goal, &kitchen, &model.scaled(c), 64).unwrap(), best);
        }
    }
}
