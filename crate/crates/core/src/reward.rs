//! Rewards ψ(τ₁,…,τ_d) paid for a tuple of stop times.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{NodeId, TreeModel};
use crate::process::NodeProcess;

type RewardFn = dyn Fn(&[NodeId], &[usize]) -> f64 + Send + Sync;

#[derive(Debug, Clone, PartialEq)]
pub enum RewardStructure {
    General,
    /// ψ = Y(τ₁) + … + Y(τ_d).
    Additive(NodeProcess),
    SymmetricGeneral,
}

/// Evaluator for a d-fold reward.
///
/// The callback receives the root-indexed path truncated at the latest stop
/// time, so it can only depend on information available at that time.
#[derive(Clone)]
pub struct MultiReward {
    d: usize,
    symmetric: bool,
    structure: RewardStructure,
    eval: Arc<RewardFn>,
}

impl fmt::Debug for MultiReward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiReward")
            .field("d", &self.d)
            .field("symmetric", &self.symmetric)
            .field("structure", &self.structure)
            .finish_non_exhaustive()
    }
}

impl MultiReward {
    /// General reward from a callback `(path, times) -> value`.
    pub fn general<F>(d: usize, f: F) -> Result<Self>
    where
        F: Fn(&[NodeId], &[usize]) -> f64 + Send + Sync + 'static,
    {
        check_d(d)?;
        Ok(Self {
            d,
            symmetric: false,
            structure: RewardStructure::General,
            eval: Arc::new(f),
        })
    }

    /// Reward the caller asserts is invariant under permutations of the times.
    pub fn symmetric<F>(d: usize, f: F) -> Result<Self>
    where
        F: Fn(&[NodeId], &[usize]) -> f64 + Send + Sync + 'static,
    {
        check_d(d)?;
        Ok(Self {
            d,
            symmetric: true,
            structure: RewardStructure::SymmetricGeneral,
            eval: Arc::new(f),
        })
    }

    pub fn additive(y: NodeProcess, d: usize) -> Result<Self> {
        check_d(d)?;
        let values = y.clone();
        Ok(Self {
            d,
            symmetric: true,
            structure: RewardStructure::Additive(y),
            eval: Arc::new(move |path, times| times.iter().map(|&t| values.get(path[t])).sum()),
        })
    }

    pub fn multiplicative(y: NodeProcess, d: usize) -> Result<Self> {
        check_d(d)?;
        Ok(Self {
            d,
            symmetric: true,
            structure: RewardStructure::SymmetricGeneral,
            eval: Arc::new(move |path, times| times.iter().map(|&t| y.get(path[t])).product()),
        })
    }

    /// ψ ≡ 0, represented as the additive reward of the zero process.
    pub fn zero(model: Arc<TreeModel>, d: usize) -> Result<Self> {
        Self::additive(NodeProcess::constant(model, 0.0)?, d)
    }

    /// Reward from a complete table keyed by (node at the latest stop time, times).
    pub fn from_table(model: &TreeModel, d: usize, table: HashMap<(NodeId, Vec<usize>), f64>) -> Result<Self> {
        check_d(d)?;
        for ((node, times), &value) in &table {
            if times.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: times.len(),
                });
            }
            if times.iter().max() != Some(&model.time(*node)) {
                return Err(Error::InvalidAssignment(format!(
                    "table row for `{}` has times {times:?} whose maximum is not the node time",
                    model.label(*node)
                )));
            }
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidValue {
                    process: "reward table".into(),
                    node: model.label(*node).to_string(),
                    value,
                });
            }
        }
        for n in model.ids() {
            let t = model.time(n);
            for times in vectors_with_max(d, t) {
                if !table.contains_key(&(n, times.clone())) {
                    return Err(Error::MissingValue {
                        process: format!("reward table row times={times:?}"),
                        node: model.label(n).to_string(),
                    });
                }
            }
        }
        let symmetric = table.iter().all(|((n, times), v)| {
            let mut sorted = times.clone();
            sorted.sort_unstable();
            table.get(&(*n, sorted)) == Some(v)
        });
        let eval = move |path: &[NodeId], times: &[usize]| {
            let node = *path.last().expect("non-empty path");
            table.get(&(node, times.to_vec())).copied().unwrap_or(0.0)
        };
        Ok(Self {
            d,
            symmetric,
            structure: if symmetric {
                RewardStructure::SymmetricGeneral
            } else {
                RewardStructure::General
            },
            eval: Arc::new(eval),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn structure(&self) -> &RewardStructure {
        &self.structure
    }

    /// Evaluates ψ on a root-indexed path (`path[t]` is the node at time `t`).
    pub fn evaluate(&self, model: &TreeModel, path: &[NodeId], times: &[usize]) -> Result<f64> {
        if times.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: times.len(),
            });
        }
        let last = *times.iter().max().expect("d >= 1");
        if last >= path.len() {
            return Err(Error::InvalidAssignment(format!(
                "stop time {last} lies beyond the end of the path (length {})",
                path.len()
            )));
        }
        let value = (self.eval)(&path[..=last], times);
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidReward {
                node: model.label(path[last]).to_string(),
                value,
            });
        }
        Ok(value)
    }

    /// Evaluates ψ on the path leading to `node`.
    pub fn evaluate_at(&self, model: &TreeModel, node: NodeId, times: &[usize]) -> Result<f64> {
        self.evaluate(model, &model.path_from_root(node), times)
    }

    /// Checks invariance under random permutations on random paths.
    pub fn spot_check_symmetry(&self, model: &TreeModel, samples: usize, rng: &mut impl Rng) -> Result<bool> {
        let leaves: Vec<NodeId> = model.leaves_under(model.root()).into_iter().map(|(l, _)| l).collect();
        for _ in 0..samples {
            let leaf = *leaves.choose(rng).expect("tree has leaves");
            let path = model.path_from_root(leaf);
            let times: Vec<usize> = (0..self.d).map(|_| rng.gen_range(0..path.len())).collect();
            let mut shuffled = times.clone();
            shuffled.shuffle(rng);
            if self.evaluate(model, &path, &times)? != self.evaluate(model, &path, &shuffled)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn check_d(d: usize) -> Result<()> {
    if d < 1 {
        return Err(Error::InvalidParameter("reward dimension d must be >= 1".into()));
    }
    Ok(())
}

/// All vectors in `{0..=t}^d` whose maximum equals `t`.
pub(crate) fn vectors_with_max(d: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; d];
    loop {
        if cur.iter().max() == Some(&t) {
            out.push(cur.clone());
        }
        let mut k = 0;
        loop {
            if k == d {
                return out;
            }
            if cur[k] < t {
                cur[k] += 1;
                break;
            }
            cur[k] = 0;
            k += 1;
        }
    }
}
