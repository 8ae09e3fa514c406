//! Symmetric rewards and swing options.
//!
//! For a symmetric reward the components can be taken ordered, and the
//! nested problems collapse into a backward induction over the number of
//! rights already used. Swing options are the additive case with a minimum
//! gap δ between consecutive exercises, solved through the continuation
//! premia `Z_k(θ) = sup_{τ >= θ+δ} E[Y(τ) + Z_{k+1}(τ) | θ]`.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{NodeId, TreeModel};
use crate::multiple::{MultiStoppingTuple, SolverConfig};
use crate::process::{expect_children, NodeProcess};
use crate::report::{Residuals, SolveMode, SolveReport};
use crate::reward::{MultiReward, RewardStructure};
use crate::single::{snell_solve_with, EPS_EQ};
use crate::stopping::StoppingTime;

/// Ordered-state dynamic program for a symmetric reward.
struct OrderedDp<'a> {
    psi: &'a MultiReward,
    model: &'a Arc<TreeModel>,
    d: usize,
    additive: Option<NodeProcess>,
    /// General rewards: (prior stop times, node) -> value.
    memo: HashMap<(Vec<usize>, NodeId), f64>,
    /// Additive rewards: (rights used, node) -> residual value.
    residual: HashMap<(usize, NodeId), f64>,
    config: SolverConfig,
}

impl<'a> OrderedDp<'a> {
    fn new(psi: &'a MultiReward, model: &'a Arc<TreeModel>, config: SolverConfig) -> Self {
        let additive = match psi.structure() {
            RewardStructure::Additive(y) => Some(y.clone()),
            _ => None,
        };
        Self {
            psi,
            model,
            d: psi.d(),
            additive,
            memo: HashMap::new(),
            residual: HashMap::new(),
            config,
        }
    }

    fn entries(&self) -> usize {
        self.memo.len() + self.residual.len()
    }

    fn guard(&self) -> Result<()> {
        if self.entries() >= self.config.memo_cap {
            return Err(Error::CapExceeded {
                count: format!("> {}", self.config.memo_cap),
                cap: self.config.memo_cap as u128,
            });
        }
        Ok(())
    }

    /// Value of placing the remaining `d − k` ordered stops at or after `n`
    /// (additive case; excludes payoffs already collected).
    fn residual_value(&mut self, k: usize, n: NodeId) -> Result<f64> {
        if k == self.d {
            return Ok(0.0);
        }
        if let Some(&v) = self.residual.get(&(k, n)) {
            return Ok(v);
        }
        let y = self.additive.as_ref().expect("additive reward");
        let stop = y[n] + self.residual_value(k + 1, n)?;
        let v = if self.model.is_leaf(n) {
            stop
        } else {
            let mut cont = 0.0;
            for &(c, p) in self.model.children(n) {
                cont += p * self.residual_value(k, c)?;
            }
            stop.max(cont)
        };
        self.guard()?;
        self.residual.insert((k, n), v);
        Ok(v)
    }

    fn collected(&self, prior: &[usize], n: NodeId) -> f64 {
        let y = self.additive.as_ref().expect("additive reward");
        let path = self.model.path_from_root(n);
        prior.iter().map(|&t| y[path[t]]).sum()
    }

    /// Value at `n` given ordered prior stops (all at or before `n`'s time).
    fn value(&mut self, prior: &[usize], n: NodeId) -> Result<f64> {
        if self.additive.is_some() {
            return Ok(self.collected(prior, n) + self.residual_value(prior.len(), n)?);
        }
        if let Some(&v) = self.memo.get(&(prior.to_vec(), n)) {
            return Ok(v);
        }
        let stop = self.stop_value(prior, n)?;
        let v = if self.model.is_leaf(n) {
            stop
        } else {
            let mut cont = 0.0;
            for &(c, p) in self.model.children(n) {
                cont += p * self.value(prior, c)?;
            }
            stop.max(cont)
        };
        self.guard()?;
        self.memo.insert((prior.to_vec(), n), v);
        Ok(v)
    }

    /// Reward for using the next right at `n`.
    fn stop_value(&mut self, prior: &[usize], n: NodeId) -> Result<f64> {
        let mut next = prior.to_vec();
        next.push(self.model.time(n));
        if let Some(y) = &self.additive {
            let here = y[n];
            return Ok(self.collected(prior, n) + here + self.residual_value(next.len(), n)?);
        }
        if next.len() == self.d {
            let path = self.model.path_from_root(n);
            self.psi.evaluate(self.model, &path, &next)
        } else {
            self.value(&next, n)
        }
    }

    fn first_hitting(&mut self, prior: &[usize], from: NodeId) -> Result<Vec<NodeId>> {
        let mut cut = Vec::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if self.model.is_leaf(n) || self.stop_value(prior, n)? + self.config.eps >= self.value(prior, n)? {
                cut.push(n);
            } else {
                stack.extend(self.model.children(n).iter().map(|&(c, _)| c));
            }
        }
        Ok(cut)
    }

    fn extract(&mut self, prior: &[usize], from: NodeId, sets: &mut [Vec<NodeId>]) -> Result<()> {
        let k = prior.len();
        for m in self.first_hitting(prior, from)? {
            sets[k].push(m);
            if k + 1 < self.d {
                let mut next = prior.to_vec();
                next.push(self.model.time(m));
                self.extract(&next, m, sets)?;
            }
        }
        Ok(())
    }
}

/// Value and ordered optimal tuple of a symmetric reward.
#[derive(Debug, Clone)]
pub struct SymmetricSolution {
    pub value: f64,
    /// Value with no right used yet, at every node.
    pub value_process: NodeProcess,
    /// Reward for using the first right at each node.
    pub first_reward: NodeProcess,
    /// Ordered optimal tuple: component k is the k-th exercise.
    pub tuple: MultiStoppingTuple,
    pub memo_entries: usize,
}

pub fn symmetric_backward(psi: &MultiReward, model: &Arc<TreeModel>, start: NodeId) -> Result<SymmetricSolution> {
    symmetric_backward_with(psi, model, start, &SolverConfig::default())
}

pub fn symmetric_backward_with(
    psi: &MultiReward,
    model: &Arc<TreeModel>,
    start: NodeId,
    config: &SolverConfig,
) -> Result<SymmetricSolution> {
    if !psi.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    if !model.contains(start) {
        return Err(Error::UnknownNode(start.to_string()));
    }
    let mut dp = OrderedDp::new(psi, model, *config);
    let mut values = Vec::with_capacity(model.len());
    let mut first = Vec::with_capacity(model.len());
    for n in model.ids() {
        values.push(dp.value(&[], n)?);
        first.push(dp.stop_value(&[], n)?);
    }
    let mut sets = vec![Vec::new(); psi.d()];
    dp.extract(&[], start, &mut sets)?;
    let tuple = MultiStoppingTuple::new(
        sets.into_iter()
            .map(|s| StoppingTime::new(model.clone(), start, s))
            .collect::<Result<Vec<_>>>()?,
    )?;
    Ok(SymmetricSolution {
        value: values[start.index()],
        value_process: NodeProcess::new(model.clone(), values)?,
        first_reward: NodeProcess::new(model.clone(), first)?,
        tuple,
        memo_entries: dp.entries(),
    })
}

/// Report for the symmetric solver, cross-checked against a direct solve of
/// the first-right reward.
pub fn solve_symmetric(
    psi: &MultiReward,
    model: &Arc<TreeModel>,
    start: NodeId,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let sol = symmetric_backward_with(psi, model, start, config)?;
    let reduced = snell_solve_with(&sol.first_reward, config.eps);
    let reduction_identity = model
        .ids()
        .map(|n| (reduced.value()[n] - sol.value_process[n]).abs())
        .fold(0.0, f64::max);
    let tuple_value = sol.tuple.value(psi)?;
    let first_stop = sol.tuple.components()[0].clone();
    Ok(SolveReport {
        mode: SolveMode::Symmetric,
        model: model.clone(),
        model_hash: model.hash().to_string(),
        start,
        d: psi.d(),
        delta: None,
        value: sol.value,
        residuals: Residuals {
            dominance_slack: reduced.dominance_slack(start),
            supermartingale_slack: reduced.supermartingale_slack(start),
            bellman_residual: reduced.bellman_residual(start),
            reduction_identity,
            attainment: (tuple_value - sol.value).abs(),
            min_cut_consistent: sol.tuple.min_cut() == first_stop,
            oracle_delta: None,
        },
        value_process: sol.value_process,
        new_reward: sol.first_reward,
        reduced_stop: first_stop,
        tuple: sol.tuple,
        tuple_value,
        lambda_table: Vec::new(),
    })
}

/// Swing option with `d` rights separated by at least `delta` steps.
#[derive(Debug, Clone)]
pub struct SwingSolution {
    pub d: usize,
    pub delta: usize,
    pub start: NodeId,
    /// Latest time at which right k (1-based) may be exercised: `T − (d−k)δ`.
    pub horizons: Vec<usize>,
    /// Continuation premia `Z_1 … Z_{d−1}`; zero past the matching horizon.
    pub z: Vec<NodeProcess>,
    /// Value of the problem with rights `k … d` left, `U_1 … U_d`; zero past
    /// the matching horizon.
    pub rights: Vec<NodeProcess>,
    /// `U_1`, the swing value.
    pub value: NodeProcess,
    /// Ordered exercise times: component k is the k-th exercise.
    pub exercise: MultiStoppingTuple,
    y: NodeProcess,
}

impl SwingSolution {
    pub fn value_at_start(&self) -> f64 {
        self.value[self.start]
    }

    pub fn payoff(&self) -> &NodeProcess {
        &self.y
    }

    pub fn exercise_times_at_leaf(&self, leaf: NodeId) -> Vec<usize> {
        self.exercise.times_at_leaf(leaf)
    }

    /// Every path respects `t_{k+1} >= t_k + δ`.
    pub fn gaps_respected(&self) -> bool {
        let model = self.exercise.model();
        model.leaves_under(self.start).iter().all(|&(leaf, _)| {
            self.exercise_times_at_leaf(leaf)
                .windows(2)
                .all(|w| w[1] >= w[0] + self.delta)
        })
    }

    /// `E[Σ_k Y(τ_k) | start]` for the extracted exercise times.
    pub fn exercise_payoff(&self) -> f64 {
        let model = self.exercise.model();
        model
            .leaves_under(self.start)
            .into_iter()
            .map(|(leaf, p)| {
                let path = model.path_from_root(leaf);
                p * self
                    .exercise_times_at_leaf(leaf)
                    .iter()
                    .map(|&t| self.y[path[t]])
                    .sum::<f64>()
            })
            .sum()
    }
}

pub fn swing_solve(y: &NodeProcess, d: usize, delta: usize, start: NodeId) -> Result<SwingSolution> {
    swing_solve_with(y, d, delta, start, EPS_EQ)
}

pub fn swing_solve_with(y: &NodeProcess, d: usize, delta: usize, start: NodeId, eps: f64) -> Result<SwingSolution> {
    let model = y.model().clone();
    if d < 1 {
        return Err(Error::InvalidParameter("swing needs d >= 1 rights".into()));
    }
    if !model.contains(start) {
        return Err(Error::UnknownNode(start.to_string()));
    }
    let horizon = model.horizon();
    let start_time = model.time(start);
    let infeasible = Error::Infeasible {
        d,
        delta,
        start_time,
        horizon,
    };
    let span = (d - 1).checked_mul(delta).ok_or_else(|| infeasible.clone())?;
    if start_time.checked_add(span).is_none_or(|t| t > horizon) {
        return Err(infeasible);
    }
    let horizons: Vec<usize> = (1..=d).map(|k| horizon - (d - k) * delta).collect();

    let n = model.len();
    // rights[k] and z[k] use 0-based k for right k+1.
    let mut rights = vec![vec![0.0; n]; d];
    let mut z = vec![vec![0.0; n]; d];
    for k in (0..d).rev() {
        let h = horizons[k];
        if k + 1 < d {
            for id in model.ids().filter(|&id| model.time(id) <= h) {
                z[k][id.index()] = model
                    .descendants_at(id, model.time(id) + delta)
                    .into_iter()
                    .map(|(m, p)| p * rights[k + 1][m.index()])
                    .sum();
            }
        }
        for id in model.ids().rev().filter(|&id| model.time(id) <= h) {
            let reward = y[id] + z[k][id.index()];
            rights[k][id.index()] = if model.time(id) == h || model.is_leaf(id) {
                reward
            } else {
                reward.max(expect_children(&model, &rights[k], id))
            };
        }
    }

    let hits = |k: usize, id: NodeId| {
        model.time(id) == horizons[k] || rights[k][id.index()] <= y[id] + z[k][id.index()] + eps
    };
    let mut sets: Vec<Vec<NodeId>> = Vec::with_capacity(d);
    let mut frontier = vec![start];
    for k in 0..d {
        let mut set = Vec::new();
        for &from in &frontier {
            let cut = StoppingTime::first_hitting(model.clone(), from, |id| hits(k, id));
            set.extend_from_slice(cut.stops());
        }
        if k + 1 < d {
            frontier = set
                .iter()
                .flat_map(|&m| model.descendants_at(m, model.time(m) + delta))
                .map(|(q, _)| q)
                .collect();
        }
        sets.push(set);
    }
    let exercise = MultiStoppingTuple::new(
        sets.into_iter()
            .map(|s| StoppingTime::new(model.clone(), start, s))
            .collect::<Result<Vec<_>>>()?,
    )?;

    let to_process = |v: Vec<f64>| NodeProcess::new(model.clone(), v);
    let rights = rights.into_iter().map(to_process).collect::<Result<Vec<_>>>()?;
    z.truncate(d - 1);
    let z = z.into_iter().map(to_process).collect::<Result<Vec<_>>>()?;
    Ok(SwingSolution {
        d,
        delta,
        start,
        horizons,
        z,
        value: rights[0].clone(),
        rights,
        exercise,
        y: y.clone(),
    })
}

/// Report for the swing solver. Residuals are measured on the nodes where the
/// first right may still be exercised.
pub fn solve_swing(y: &NodeProcess, d: usize, delta: usize, start: NodeId, eps: f64) -> Result<SolveReport> {
    let sol = swing_solve_with(y, d, delta, start, eps)?;
    let model = y.model().clone();
    let h1 = sol.horizons[0];
    let reward = NodeProcess::from_fn(model.clone(), |id| {
        if model.time(id) <= h1 {
            y[id] + sol.z.first().map_or(0.0, |z| z[id])
        } else {
            0.0
        }
    })?;
    let v = &sol.value;
    let live: Vec<NodeId> = model
        .subtree(start)
        .into_iter()
        .filter(|&id| model.time(id) <= h1)
        .collect();
    let mut residuals = Residuals {
        dominance_slack: f64::INFINITY,
        supermartingale_slack: f64::INFINITY,
        bellman_residual: 0.0,
        reduction_identity: 0.0,
        attainment: 0.0,
        min_cut_consistent: true,
        oracle_delta: None,
    };
    for &id in &live {
        residuals.dominance_slack = residuals.dominance_slack.min(v[id] - reward[id]);
        let target = if model.time(id) == h1 || model.is_leaf(id) {
            reward[id]
        } else {
            let cont = expect_children(&model, v.values(), id);
            residuals.supermartingale_slack = residuals.supermartingale_slack.min(v[id] - cont);
            reward[id].max(cont)
        };
        residuals.bellman_residual = residuals.bellman_residual.max((v[id] - target).abs());
    }
    let psi = MultiReward::additive(y.clone(), d)?;
    let tuple_value = sol.exercise.value(&psi)?;
    residuals.attainment = (tuple_value - sol.value_at_start()).abs();
    let first = sol.exercise.components()[0].clone();
    residuals.min_cut_consistent = sol.exercise.min_cut() == first;
    Ok(SolveReport {
        mode: SolveMode::Swing,
        model_hash: model.hash().to_string(),
        start,
        d,
        delta: Some(delta),
        value: sol.value_at_start(),
        value_process: sol.value.clone(),
        new_reward: reward,
        reduced_stop: first,
        tuple: sol.exercise,
        tuple_value,
        residuals,
        lambda_table: Vec::new(),
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_binomial_lattice;
    use crate::oracle::{brute_force_value, Constraint};
    use crate::single::snell_solve;

    fn setup(steps: usize) -> (Arc<TreeModel>, NodeProcess) {
        let m = Arc::new(build_binomial_lattice(steps, 0.5).unwrap());
        let y = NodeProcess::from_fn(m.clone(), |n| ((n.index() * 11 + 3) % 7) as f64).unwrap();
        (m, y)
    }

    #[test]
    fn one_right_is_single_stopping() {
        let (m, y) = setup(3);
        let snell = snell_solve(&y);
        for delta in [0, 1, 5] {
            let sol = swing_solve(&y, 1, delta, m.root()).unwrap();
            assert_eq!(sol.value.values(), snell.value().values());
            assert!(sol.z.is_empty());
        }
    }

    #[test]
    fn no_refraction_multiplies_the_value() {
        let (m, y) = setup(3);
        let single = snell_solve(&y).value()[m.root()];
        for d in 1..=3 {
            let sol = swing_solve(&y, d, 0, m.root()).unwrap();
            assert_eq!(sol.value_at_start(), d as f64 * single);
            let first = &sol.exercise.components()[0];
            assert!(sol.exercise.components().iter().all(|c| c == first));
        }
    }

    #[test]
    fn gap_two_matches_constrained_enumeration() {
        let (m, y) = setup(4);
        let sol = swing_solve(&y, 2, 2, m.root()).unwrap();
        let psi = MultiReward::additive(y.clone(), 2).unwrap();
        let oracle = brute_force_value(&psi, &m, m.root(), Some(Constraint::DeltaGap(2))).unwrap();
        assert_eq!(sol.value_at_start(), oracle.value);
        assert!(sol.gaps_respected());
        assert_eq!(sol.exercise_payoff(), sol.value_at_start());
    }

    #[test]
    fn infeasible_instances_are_rejected() {
        let (m, y) = setup(3);
        assert!(matches!(
            swing_solve(&y, 3, 2, m.root()),
            Err(Error::Infeasible { d: 3, delta: 2, horizon: 3, .. })
        ));
        assert!(swing_solve(&y, 0, 0, m.root()).is_err());
        assert!(swing_solve(&y, 2, 2, m.find("u").unwrap()).is_ok());
        assert!(swing_solve(&y, 2, 3, m.find("u").unwrap()).is_err());
    }

    #[test]
    fn symmetric_requires_the_flag() {
        let (m, y) = setup(2);
        let asym = MultiReward::general(2, move |p, t| y[p[t[0]]]).unwrap();
        assert!(matches!(symmetric_backward(&asym, &m, m.root()), Err(Error::NotSymmetric)));
    }

    #[test]
    fn symmetric_zero_and_additive() {
        let (m, y) = setup(3);
        let zero = MultiReward::zero(m.clone(), 3).unwrap();
        let sol = symmetric_backward(&zero, &m, m.root()).unwrap();
        assert_eq!(sol.value, 0.0);
        assert!(sol.tuple.components().iter().all(|c| c.stops() == [m.root()]));

        let single = snell_solve(&y).value()[m.root()];
        let add = MultiReward::additive(y.clone(), 2).unwrap();
        assert_eq!(symmetric_backward(&add, &m, m.root()).unwrap().value, 2.0 * single);
    }
}
