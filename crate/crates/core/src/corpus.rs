//! Seeded random instances for tests and certification sweeps.
//!
//! Probabilities are dyadic and payoffs are small integers, so every value
//! computed on these instances is exact in binary floating point.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{build_tree_from_spec, ModelSpec, NodeId, NodeSpec, TreeModel};
use crate::process::NodeProcess;
use crate::reward::{vectors_with_max, MultiReward};
use crate::stopping::StoppingTime;

pub const DYADIC_PROBS: [f64; 3] = [0.25, 0.5, 0.75];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tree of the given depth in which every internal node has one or
/// two children. `unary` is the chance of a single child with probability 1.
pub fn random_tree(rng: &mut impl Rng, depth: usize, unary: f64) -> Arc<TreeModel> {
    let mut nodes = vec![NodeSpec {
        id: "r".into(),
        time: 0,
        parent: None,
        prob: None,
    }];
    let mut level = vec!["r".to_string()];
    for t in 1..=depth {
        let mut next = Vec::new();
        for parent in &level {
            if rng.gen_bool(unary) {
                next.push(push_child(&mut nodes, parent, "0", t, 1.0));
            } else {
                let p = *DYADIC_PROBS.choose(rng).expect("non-empty");
                next.push(push_child(&mut nodes, parent, "0", t, p));
                next.push(push_child(&mut nodes, parent, "1", t, 1.0 - p));
            }
        }
        level = next;
    }
    let spec = ModelSpec {
        horizon: depth,
        nodes,
        processes: Default::default(),
    };
    Arc::new(build_tree_from_spec(&spec).expect("generated tree is valid"))
}

fn push_child(nodes: &mut Vec<NodeSpec>, parent: &str, suffix: &str, time: usize, p: f64) -> String {
    let id = format!("{parent}{suffix}");
    nodes.push(NodeSpec {
        id: id.clone(),
        time,
        parent: Some(parent.to_string()),
        prob: Some(p.into()),
    });
    id
}

/// Full binary tree with dyadic branching probabilities.
pub fn random_binary_tree(rng: &mut impl Rng, depth: usize) -> Arc<TreeModel> {
    random_tree(rng, depth, 0.0)
}

/// Integer-valued process with values in `0..=max`.
pub fn random_process(rng: &mut impl Rng, model: &Arc<TreeModel>, max: u32) -> NodeProcess {
    let values = (0..model.len()).map(|_| rng.gen_range(0..=max) as f64).collect();
    NodeProcess::new(model.clone(), values).expect("valid values")
}

/// General d-fold reward with independent integer entries in `0..=max` for
/// every (node at the latest stop, times) row.
pub fn random_reward(rng: &mut impl Rng, model: &Arc<TreeModel>, d: usize, max: u32) -> Result<MultiReward> {
    let mut table = HashMap::new();
    for n in model.ids() {
        for times in vectors_with_max(d, model.time(n)) {
            table.insert((n, times), rng.gen_range(0..=max) as f64);
        }
    }
    MultiReward::from_table(model, d, table)
}

/// Symmetric d-fold reward: entries depend on the sorted times only.
pub fn random_symmetric_reward(
    rng: &mut impl Rng,
    model: &Arc<TreeModel>,
    d: usize,
    max: u32,
) -> Result<MultiReward> {
    let mut sorted_rows: HashMap<(NodeId, Vec<usize>), f64> = HashMap::new();
    let mut table = HashMap::new();
    for n in model.ids() {
        for times in vectors_with_max(d, model.time(n)) {
            let mut key = times.clone();
            key.sort_unstable();
            let v = *sorted_rows
                .entry((n, key))
                .or_insert_with(|| rng.gen_range(0..=max) as f64);
            table.insert((n, times), v);
        }
    }
    MultiReward::from_table(model, d, table)
}

/// Random stopping time from `start`: each visited node stops with
/// probability `p_stop`; leaves always stop.
pub fn random_stopping_time(rng: &mut impl Rng, model: &Arc<TreeModel>, start: NodeId, p_stop: f64) -> StoppingTime {
    StoppingTime::first_hitting(model.clone(), start, |_| rng.gen_bool(p_stop))
}
