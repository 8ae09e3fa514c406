//! Nonordered d-fold stopping by reduction to nested single stopping.
//!
//! Freezing component `i` at the current node leaves a (d−1)-fold problem
//! whose value is `u^(i)`. The new reward `φ = max_i u^(i)` turns the d-fold
//! problem into a single stopping problem with the same value. Applied
//! recursively, every residual problem is identified by the partial
//! assignment of frozen components to stop times on the current path
//! together with the current node, which is the memo key.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{NodeId, TreeModel};
use crate::process::NodeProcess;
use crate::report::{Residuals, SolveMode, SolveReport};
use crate::reward::MultiReward;
use crate::single::{minimal_optimal_stop, snell_solve_with, EPS_EQ};
use crate::stopping::StoppingTime;

/// Default cap on memoized residual problems.
pub const DEFAULT_MEMO_CAP: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub memo_cap: usize,
    pub eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            memo_cap: DEFAULT_MEMO_CAP,
            eps: EPS_EQ,
        }
    }
}

/// Components frozen at stop times on the current path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<Option<usize>>);

impl Assignment {
    pub fn empty(d: usize) -> Self {
        Self(vec![None; d])
    }

    pub fn d(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.0.get(i).copied().flatten()
    }

    /// Freezes component `i` at time `t`.
    pub fn with(&self, i: usize, t: usize) -> Result<Self> {
        match self.0.get(i) {
            None => Err(Error::InvalidAssignment(format!(
                "component {i} out of range for d={}",
                self.d()
            ))),
            Some(Some(prev)) => Err(Error::InvalidAssignment(format!(
                "component {i} is already frozen at time {prev}"
            ))),
            Some(None) => {
                let mut next = self.0.clone();
                next[i] = Some(t);
                Ok(Self(next))
            }
        }
    }

    pub fn free(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, t)| t.is_none()).map(|(i, _)| i)
    }

    pub fn is_complete(&self) -> bool {
        self.0.iter().all(Option::is_some)
    }

    pub fn max_time(&self) -> Option<usize> {
        self.0.iter().flatten().copied().max()
    }

    fn times(&self) -> Vec<usize> {
        self.0.iter().map(|t| t.expect("complete assignment")).collect()
    }
}

/// d stopping times from a common start node; components need not be ordered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiStoppingTuple {
    components: Vec<StoppingTime>,
}

impl MultiStoppingTuple {
    pub fn new(components: Vec<StoppingTime>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidParameter("a tuple needs at least one component".into()))?;
        for c in &components {
            if c.model().hash() != first.model().hash() {
                return Err(Error::ModelMismatch);
            }
            if c.start() != first.start() {
                return Err(Error::InvalidParameter("tuple components start at different nodes".into()));
            }
        }
        Ok(Self { components })
    }

    pub fn repeated(tau: &StoppingTime, d: usize) -> Self {
        Self {
            components: vec![tau.clone(); d],
        }
    }

    pub fn d(&self) -> usize {
        self.components.len()
    }

    pub fn start(&self) -> NodeId {
        self.components[0].start()
    }

    pub fn model(&self) -> &Arc<TreeModel> {
        self.components[0].model()
    }

    pub fn components(&self) -> &[StoppingTime] {
        &self.components
    }

    /// Stop times of each component on the path to `leaf`.
    pub fn times_at_leaf(&self, leaf: NodeId) -> Vec<usize> {
        self.components
            .iter()
            .map(|c| c.time_at_leaf(leaf).expect("valid cut crosses every path"))
            .collect()
    }

    /// `τ₁ ∧ … ∧ τ_d`.
    pub fn min_cut(&self) -> StoppingTime {
        let refs: Vec<&StoppingTime> = self.components.iter().collect();
        StoppingTime::earliest(&refs).expect("components share model and start")
    }

    /// `E[ψ(τ₁,…,τ_d) | start]` by summing over the leaves below `start`.
    pub fn value(&self, psi: &MultiReward) -> Result<f64> {
        if psi.d() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: psi.d(),
                got: self.d(),
            });
        }
        let model = self.model();
        let mut total = 0.0;
        for (leaf, p) in model.leaves_under(self.start()) {
            let path = model.path_from_root(leaf);
            total += p * psi.evaluate(model, &path, &self.times_at_leaf(leaf))?;
        }
        Ok(total)
    }

    pub fn stop_labels(&self) -> Vec<Vec<String>> {
        self.components.iter().map(StoppingTime::stop_labels).collect()
    }
}

/// Memoized values of every residual problem reached so far.
#[derive(Debug, Clone)]
pub struct NestedValue {
    psi: MultiReward,
    model: Arc<TreeModel>,
    memo: HashMap<(Assignment, NodeId), f64>,
    config: SolverConfig,
}

impl NestedValue {
    pub fn new(psi: MultiReward, model: Arc<TreeModel>, config: SolverConfig) -> Self {
        Self {
            psi,
            model,
            memo: HashMap::new(),
            config,
        }
    }

    pub fn reward(&self) -> &MultiReward {
        &self.psi
    }

    pub fn model(&self) -> &Arc<TreeModel> {
        &self.model
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    fn check(&self, fixed: &Assignment, node: NodeId) -> Result<()> {
        if fixed.d() != self.psi.d() {
            return Err(Error::DimensionMismatch {
                expected: self.psi.d(),
                got: fixed.d(),
            });
        }
        if !self.model.contains(node) {
            return Err(Error::UnknownNode(node.to_string()));
        }
        if let Some(t) = fixed.max_time() {
            if t > self.model.time(node) {
                return Err(Error::InvalidAssignment(format!(
                    "fixed time {t} exceeds the time {} of node `{}`",
                    self.model.time(node),
                    self.model.label(node)
                )));
            }
        }
        Ok(())
    }

    /// Value at `node` of the residual problem in which the components of
    /// `fixed` are frozen and the others are still free.
    pub fn value(&mut self, fixed: &Assignment, node: NodeId) -> Result<f64> {
        self.check(fixed, node)?;
        self.value_unchecked(fixed, node)
    }

    fn value_unchecked(&mut self, fixed: &Assignment, node: NodeId) -> Result<f64> {
        if let Some(&v) = self.memo.get(&(fixed.clone(), node)) {
            return Ok(v);
        }
        let v = if fixed.is_complete() {
            let path = self.model.path_from_root(node);
            self.psi.evaluate(&self.model, &path, &fixed.times())?
        } else {
            let stop = self.new_reward_unchecked(fixed, node)?;
            if self.model.is_leaf(node) {
                stop
            } else {
                let children: Vec<(NodeId, f64)> = self.model.children(node).to_vec();
                let mut cont = 0.0;
                for (c, p) in children {
                    cont += p * self.value_unchecked(fixed, c)?;
                }
                stop.max(cont)
            }
        };
        if self.memo.len() >= self.config.memo_cap {
            return Err(Error::CapExceeded {
                count: format!("> {}", self.config.memo_cap),
                cap: self.config.memo_cap as u128,
            });
        }
        self.memo.insert((fixed.clone(), node), v);
        Ok(v)
    }

    /// `u^(i)` at `node`: component `i` additionally frozen at the node's time.
    pub fn u_component(&mut self, fixed: &Assignment, i: usize, node: NodeId) -> Result<f64> {
        self.check(fixed, node)?;
        let frozen = fixed.with(i, self.model.time(node))?;
        self.value_unchecked(&frozen, node)
    }

    /// New reward `max_i u^(i)` over the free components.
    pub fn new_reward(&mut self, fixed: &Assignment, node: NodeId) -> Result<f64> {
        self.check(fixed, node)?;
        self.new_reward_unchecked(fixed, node)
    }

    fn new_reward_unchecked(&mut self, fixed: &Assignment, node: NodeId) -> Result<f64> {
        let t = self.model.time(node);
        let free: Vec<usize> = fixed.free().collect();
        if free.is_empty() {
            return Err(Error::NoFreeIndex);
        }
        let mut best = f64::NEG_INFINITY;
        for i in free {
            best = best.max(self.value_unchecked(&fixed.with(i, t)?, node)?);
        }
        Ok(best)
    }

    /// Smallest free index attaining the new reward at `node`.
    fn leading_index(&mut self, fixed: &Assignment, node: NodeId) -> Result<usize> {
        let t = self.model.time(node);
        let free: Vec<usize> = fixed.free().collect();
        let mut values = Vec::with_capacity(free.len());
        for &i in &free {
            values.push(self.value_unchecked(&fixed.with(i, t)?, node)?);
        }
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pos = values
            .iter()
            .position(|&v| v + self.config.eps >= best)
            .ok_or(Error::NoFreeIndex)?;
        Ok(free[pos])
    }

    /// First hitting of `{value = new reward}` on each path from `start`.
    fn first_hitting(&mut self, fixed: &Assignment, start: NodeId) -> Result<Vec<NodeId>> {
        let mut cut = Vec::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            let stop = self.new_reward_unchecked(fixed, n)?;
            if self.model.is_leaf(n) || stop + self.config.eps >= self.value_unchecked(fixed, n)? {
                cut.push(n);
            } else {
                stack.extend(self.model.children(n).iter().map(|&(c, _)| c));
            }
        }
        Ok(cut)
    }

    fn assign(&mut self, fixed: &Assignment, cut: &[NodeId], sets: &mut [Vec<NodeId>]) -> Result<()> {
        for &n in cut {
            let i = self.leading_index(fixed, n)?;
            sets[i].push(n);
            let next = fixed.with(i, self.model.time(n))?;
            if !next.is_complete() {
                let sub = self.first_hitting(&next, n)?;
                self.assign(&next, &sub, sets)?;
            }
        }
        Ok(())
    }
}

pub fn u_component(
    psi: &MultiReward,
    model: &Arc<TreeModel>,
    fixed: &Assignment,
    i: usize,
    node: NodeId,
) -> Result<f64> {
    NestedValue::new(psi.clone(), model.clone(), SolverConfig::default()).u_component(fixed, i, node)
}

pub fn new_reward(psi: &MultiReward, model: &Arc<TreeModel>, fixed: &Assignment, node: NodeId) -> Result<f64> {
    NestedValue::new(psi.clone(), model.clone(), SolverConfig::default()).new_reward(fixed, node)
}

/// Builds an optimal tuple from an optimal stopping time of the reduced problem.
///
/// On each stop node of `theta`, the smallest index attaining the new reward
/// stops there and the other components follow the recursively assembled
/// optimal tuple of the residual problem.
pub fn assemble_optimal_tuple(
    nested: &mut NestedValue,
    theta: &StoppingTime,
    start: NodeId,
) -> Result<MultiStoppingTuple> {
    if theta.start() != start {
        return Err(Error::InvalidParameter("reduced stopping time must start at `start`".into()));
    }
    let d = nested.psi.d();
    let mut sets = vec![Vec::new(); d];
    nested.assign(&Assignment::empty(d), theta.stops(), &mut sets)?;
    let model = nested.model.clone();
    let components = sets
        .into_iter()
        .map(|s| StoppingTime::new(model.clone(), start, s))
        .collect::<Result<Vec<_>>>()?;
    MultiStoppingTuple::new(components)
}

pub fn solve_multi(psi: &MultiReward, model: &Arc<TreeModel>, start: NodeId) -> Result<SolveReport> {
    solve_multi_with(psi, model, start, &SolverConfig::default())
}

pub fn solve_multi_with(
    psi: &MultiReward,
    model: &Arc<TreeModel>,
    start: NodeId,
    config: &SolverConfig,
) -> Result<SolveReport> {
    if !model.contains(start) {
        return Err(Error::UnknownNode(start.to_string()));
    }
    let d = psi.d();
    if d == 1 {
        let reward = NodeProcess::new(
            model.clone(),
            model
                .ids()
                .map(|n| psi.evaluate_at(model, n, &[model.time(n)]))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let mut report = SolveReport::single(&reward, start, &[], config.eps)?;
        report.mode = SolveMode::Multi;
        return Ok(report);
    }

    let mut nested = NestedValue::new(psi.clone(), model.clone(), *config);
    let empty = Assignment::empty(d);
    let mut u = Vec::with_capacity(model.len());
    let mut phi = Vec::with_capacity(model.len());
    for n in model.ids() {
        u.push(nested.value(&empty, n)?);
        phi.push(nested.new_reward(&empty, n)?);
    }
    let u = NodeProcess::new(model.clone(), u)?;
    let phi = NodeProcess::new(model.clone(), phi)?;

    // Independent route: solve the single problem for the new reward directly.
    let reduced = snell_solve_with(&phi, config.eps);
    let reduction_identity = model
        .ids()
        .map(|n| (reduced.value()[n] - u[n]).abs())
        .fold(0.0, f64::max);

    let theta = minimal_optimal_stop(&reduced, start)?;
    let tuple = assemble_optimal_tuple(&mut nested, &theta, start)?;
    let tuple_value = tuple.value(psi)?;
    let min_cut_consistent = tuple.min_cut() == theta;

    Ok(SolveReport {
        mode: SolveMode::Multi,
        model_hash: model.hash().to_string(),
        model: model.clone(),
        start,
        d,
        delta: None,
        value: u[start],
        residuals: Residuals {
            dominance_slack: reduced.dominance_slack(start),
            supermartingale_slack: reduced.supermartingale_slack(start),
            bellman_residual: reduced.bellman_residual(start),
            reduction_identity,
            attainment: (tuple_value - u[start]).abs(),
            min_cut_consistent,
            oracle_delta: None,
        },
        value_process: u,
        new_reward: phi,
        reduced_stop: theta,
        tuple,
        tuple_value,
        lambda_table: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_binomial_lattice;
    use crate::single::snell_solve;

    fn lattice(steps: usize) -> Arc<TreeModel> {
        Arc::new(build_binomial_lattice(steps, 0.5).unwrap())
    }

    #[test]
    fn assignment_rules() {
        let a = Assignment::empty(3).with(1, 2).unwrap();
        assert_eq!(a.free().collect::<Vec<_>>(), vec![0, 2]);
        assert!(a.with(1, 3).is_err());
        assert!(a.with(5, 0).is_err());
        assert_eq!(a.max_time(), Some(2));
    }

    #[test]
    fn single_residual_is_the_envelope() {
        let m = lattice(2);
        let y = NodeProcess::new(m.clone(), vec![1.0, 0.0, 3.0, 0.0, 0.0, 4.0, 4.0]).unwrap();
        let snell = snell_solve(&y);
        // d = 2 additive, freeze component 0 at n: Y(n) + envelope of Y from n.
        let psi = MultiReward::additive(y.clone(), 2).unwrap();
        let mut nested = NestedValue::new(psi, m.clone(), SolverConfig::default());
        for n in m.ids() {
            let u = nested.u_component(&Assignment::empty(2), 0, n).unwrap();
            assert_eq!(u, y[n] + snell.value()[n]);
        }
        // d = 1: the residual after freezing nothing is the envelope itself.
        let psi1 = MultiReward::additive(y.clone(), 1).unwrap();
        let mut nested1 = NestedValue::new(psi1, m.clone(), SolverConfig::default());
        for n in m.ids() {
            assert_eq!(nested1.value(&Assignment::empty(1), n).unwrap(), snell.value()[n]);
        }
    }

    #[test]
    fn zero_reward_everything_vanishes() {
        let m = lattice(2);
        let psi = MultiReward::zero(m.clone(), 3).unwrap();
        let mut nested = NestedValue::new(psi.clone(), m.clone(), SolverConfig::default());
        let t1 = Assignment::empty(3).with(2, 0).unwrap();
        for n in m.ids() {
            for i in 0..2 {
                assert_eq!(nested.u_component(&t1, i, n).unwrap(), 0.0);
            }
            assert_eq!(nested.new_reward(&Assignment::empty(3), n).unwrap(), 0.0);
        }
        let report = solve_multi(&psi, &m, m.root()).unwrap();
        assert_eq!(report.value, 0.0);
        for c in report.tuple.components() {
            assert_eq!(c.stops(), &[m.root()]);
        }
    }

    #[test]
    fn argument_errors() {
        let m = lattice(2);
        let psi = MultiReward::zero(m.clone(), 2).unwrap();
        let mut nested = NestedValue::new(psi, m.clone(), SolverConfig::default());
        let late = Assignment::empty(2).with(0, 2).unwrap();
        assert!(matches!(
            nested.u_component(&late, 1, m.find("u").unwrap()),
            Err(Error::InvalidAssignment(_))
        ));
        assert!(nested.u_component(&late, 0, m.find("uu").unwrap()).is_err());
        let full = late.with(1, 2).unwrap();
        assert_eq!(nested.new_reward(&full, m.find("uu").unwrap()), Err(Error::NoFreeIndex));
    }

    #[test]
    fn memo_cap_is_enforced() {
        let m = lattice(3);
        let psi = MultiReward::zero(m.clone(), 3).unwrap();
        let config = SolverConfig {
            memo_cap: 10,
            ..Default::default()
        };
        assert!(matches!(
            solve_multi_with(&psi, &m, m.root(), &config),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn additive_value_scales_with_d() {
        let m = lattice(3);
        let y = NodeProcess::from_fn(m.clone(), |n| ((n.index() * 7) % 5) as f64).unwrap();
        let single = snell_solve(&y).value()[m.root()];
        for d in 1..=3 {
            let psi = MultiReward::additive(y.clone(), d).unwrap();
            let report = solve_multi(&psi, &m, m.root()).unwrap();
            assert_eq!(report.value, d as f64 * single);
            let theta = minimal_optimal_stop(&snell_solve(&y), m.root()).unwrap();
            for c in report.tuple.components() {
                assert_eq!(c, &theta);
            }
        }
    }
}
