//! Optimal single stopping: value process, minimal optimal stopping time
//! and the λ-approximation scheme.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{NodeId, TreeModel};
use crate::process::{expect_children, NodeProcess};
use crate::stopping::{stopping_time_value, StoppingTime};

/// Tolerance for the sets `{v = φ}` and `{λv <= φ}`.
pub const EPS_EQ: f64 = 1e-9;

/// Value process of a single stopping problem, solved at every node at once.
#[derive(Debug, Clone, PartialEq)]
pub struct SnellSolution {
    reward: NodeProcess,
    value: NodeProcess,
    equality: Vec<bool>,
    eps: f64,
}

impl SnellSolution {
    pub fn model(&self) -> &Arc<TreeModel> {
        self.reward.model()
    }

    pub fn reward(&self) -> &NodeProcess {
        &self.reward
    }

    pub fn value(&self) -> &NodeProcess {
        &self.value
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// True on nodes where the value equals the reward.
    pub fn in_equality_set(&self, n: NodeId) -> bool {
        self.equality[n.index()]
    }

    pub fn equality_set(&self) -> Vec<NodeId> {
        self.model().ids().filter(|&n| self.equality[n.index()]).collect()
    }

    /// `min v − φ` over the subtree of `start` (nonnegative for a valid solution).
    pub fn dominance_slack(&self, start: NodeId) -> f64 {
        self.model()
            .subtree(start)
            .into_iter()
            .map(|n| self.value[n] - self.reward[n])
            .fold(f64::INFINITY, f64::min)
    }

    /// `min v(n) − E[v | n]` over non-leaf nodes below `start`.
    pub fn supermartingale_slack(&self, start: NodeId) -> f64 {
        let model = self.model();
        model
            .subtree(start)
            .into_iter()
            .filter(|&n| !model.is_leaf(n))
            .map(|n| self.value[n] - expect_children(model, self.value.values(), n))
            .fold(f64::INFINITY, f64::min)
    }

    /// `max |v − max(φ, E[v|·])|` below `start`; zero for the exact envelope.
    pub fn bellman_residual(&self, start: NodeId) -> f64 {
        let model = self.model();
        model
            .subtree(start)
            .into_iter()
            .map(|n| {
                let target = if model.is_leaf(n) {
                    self.reward[n]
                } else {
                    self.reward[n].max(expect_children(model, self.value.values(), n))
                };
                (self.value[n] - target).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn snell_solve(reward: &NodeProcess) -> SnellSolution {
    snell_solve_with(reward, EPS_EQ)
}

/// Backward induction `v = max(φ, E[v | ·])`, with `v = φ` at the leaves.
pub fn snell_solve_with(reward: &NodeProcess, eps: f64) -> SnellSolution {
    let model = reward.model();
    let mut value = vec![0.0; model.len()];
    // Ids are breadth first, so reverse order visits children before parents.
    for n in model.ids().rev() {
        value[n.index()] = if model.is_leaf(n) {
            reward[n]
        } else {
            reward[n].max(expect_children(model, &value, n))
        };
    }
    let equality = model
        .ids()
        .map(|n| value[n.index()] <= reward[n] + eps)
        .collect();
    SnellSolution {
        value: NodeProcess::new(model.clone(), value).expect("envelope of a valid reward is valid"),
        reward: reward.clone(),
        equality,
        eps,
    }
}

/// First entry into `{v = φ}` on each path from `start`.
pub fn minimal_optimal_stop(sol: &SnellSolution, start: NodeId) -> Result<StoppingTime> {
    let model = sol.model();
    if !model.contains(start) {
        return Err(Error::UnknownNode(start.to_string()));
    }
    Ok(StoppingTime::first_hitting(model.clone(), start, |n| sol.in_equality_set(n)))
}

/// First entry into `{λ v <= φ}` on each path from `start`.
pub fn lambda_stop(sol: &SnellSolution, lambda: f64, start: NodeId) -> Result<StoppingTime> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!("lambda must lie in (0, 1) (got {lambda})")));
    }
    let model = sol.model();
    if !model.contains(start) {
        return Err(Error::UnknownNode(start.to_string()));
    }
    Ok(StoppingTime::first_hitting(model.clone(), start, |n| {
        lambda * sol.value[n] <= sol.reward[n] + sol.eps
    }))
}

/// Largest ratio `φ/v` over nodes below `start` outside the equality set.
///
/// For every λ in `(threshold, 1)`, [`lambda_stop`] coincides with
/// [`minimal_optimal_stop`]. Returns 0 when every node is in the equality set.
pub fn lambda_threshold(sol: &SnellSolution, start: NodeId) -> f64 {
    sol.model()
        .subtree(start)
        .into_iter()
        .filter(|&n| !sol.in_equality_set(n))
        .map(|n| sol.reward[n] / sol.value[n])
        .fold(0.0, f64::max)
}

/// The three equivalent optimality conditions for a stopping time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriteriumReport {
    /// `v(start) = E[φ(τ) | start]`.
    pub attains: bool,
    /// `v = φ` on the stop nodes and `v` is a martingale strictly before τ.
    pub equality_and_martingale: bool,
    /// `E[v(start)] = E[φ(τ)]`, evaluated leaf by leaf.
    pub expectation_identity: bool,
}

impl CriteriumReport {
    pub fn consistent(&self) -> bool {
        self.attains == self.equality_and_martingale && self.attains == self.expectation_identity
    }
}

pub fn check_optimality(sol: &SnellSolution, start: NodeId, tau: &StoppingTime) -> Result<CriteriumReport> {
    let model = sol.model();
    if tau.start() != start {
        return Err(Error::InvalidParameter(format!(
            "stopping time starts at `{}`, not `{}`",
            model.label(tau.start()),
            model.label(start)
        )));
    }
    let eps = sol.eps;
    let v0 = sol.value[start];

    let attains = (stopping_time_value(tau, &sol.reward, start)? - v0).abs() <= eps;

    let mut equality_and_martingale = true;
    let mut stack = vec![start];
    while let Some(n) = stack.pop() {
        if tau.contains(n) {
            equality_and_martingale &= sol.in_equality_set(n);
        } else {
            let cont = expect_children(model, sol.value.values(), n);
            equality_and_martingale &= (cont - sol.value[n]).abs() <= eps;
            stack.extend(model.children(n).iter().map(|&(c, _)| c));
        }
    }

    let by_paths: f64 = model
        .leaves_under(start)
        .into_iter()
        .map(|(leaf, p)| {
            let stop = tau.stop_before(leaf).expect("valid cut crosses every path");
            p * sol.reward[stop]
        })
        .sum();
    let expectation_identity = (by_paths - v0).abs() <= eps;

    Ok(CriteriumReport {
        attains,
        equality_and_martingale,
        expectation_identity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_binomial_lattice, build_tree_from_spec, Decimal, ModelSpec, NodeSpec};
    use crate::stopping::{enumerate_stopping_times, DEFAULT_CAP};

    fn depth2_fixture() -> (Arc<TreeModel>, NodeProcess) {
        let m = Arc::new(build_binomial_lattice(2, 0.5).unwrap());
        // root:1, t=1: (0, 3), leaves: (0, 0, 4, 4)
        let phi = NodeProcess::new(m.clone(), vec![1.0, 0.0, 3.0, 0.0, 0.0, 4.0, 4.0]).unwrap();
        (m, phi)
    }

    fn chain(values: &[f64]) -> (Arc<TreeModel>, NodeProcess) {
        let mut spec = ModelSpec {
            horizon: values.len() - 1,
            ..Default::default()
        };
        for t in 0..values.len() {
            spec.nodes.push(NodeSpec {
                id: format!("t{t}"),
                time: t,
                parent: (t > 0).then(|| format!("t{}", t - 1)),
                prob: (t > 0).then_some(Decimal::Number(1.0)),
            });
        }
        let m = Arc::new(build_tree_from_spec(&spec).unwrap());
        let phi = NodeProcess::new(m.clone(), values.to_vec()).unwrap();
        (m, phi)
    }

    fn oracle_max(m: &Arc<TreeModel>, phi: &NodeProcess, start: NodeId) -> f64 {
        enumerate_stopping_times(m.clone(), start, DEFAULT_CAP)
            .unwrap()
            .map(|tau| stopping_time_value(&tau, phi, start).unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn zero_and_constant_rewards() {
        let m = Arc::new(build_binomial_lattice(3, 0.25).unwrap());
        for c in [0.0, 2.5] {
            let phi = NodeProcess::constant(m.clone(), c).unwrap();
            let sol = snell_solve(&phi);
            assert!(sol.value().values().iter().all(|&v| v == c));
            assert_eq!(sol.equality_set().len(), m.len());
            let tau = minimal_optimal_stop(&sol, m.root()).unwrap();
            assert_eq!(tau.stops(), &[m.root()]);
            for lambda in [0.1, 0.9] {
                assert_eq!(lambda_stop(&sol, lambda, m.root()).unwrap().stops(), &[m.root()]);
            }
        }
    }

    #[test]
    fn depth2_fixture_matches_enumeration() {
        let (m, phi) = depth2_fixture();
        let sol = snell_solve(&phi);
        let expected = oracle_max(&m, &phi, m.root());
        assert_eq!(sol.value()[m.root()], expected);
        assert_eq!(expected, 2.0);
        let tau = minimal_optimal_stop(&sol, m.root()).unwrap();
        assert_eq!(stopping_time_value(&tau, &phi, m.root()).unwrap(), expected);
        // Minimality against every optimal cut.
        for other in enumerate_stopping_times(m.clone(), m.root(), DEFAULT_CAP).unwrap() {
            if stopping_time_value(&other, &phi, m.root()).unwrap() == expected {
                assert!(tau.le_pathwise(&other));
            }
        }
    }

    #[test]
    fn increasing_reward_waits_to_the_end() {
        let m = Arc::new(build_binomial_lattice(3, 0.5).unwrap());
        let phi = NodeProcess::from_fn(m.clone(), |n| m.time(n) as f64).unwrap();
        let sol = snell_solve(&phi);
        assert_eq!(sol.value()[m.root()], 3.0);
        let tau = minimal_optimal_stop(&sol, m.root()).unwrap();
        assert!(tau.stops().iter().all(|&n| m.is_leaf(n)));

        let now = StoppingTime::stop_now(m.clone(), m.root());
        let report = check_optimality(&sol, m.root(), &now).unwrap();
        assert_eq!(
            report,
            CriteriumReport {
                attains: false,
                equality_and_martingale: false,
                expectation_identity: false
            }
        );
        let best = check_optimality(&sol, m.root(), &tau).unwrap();
        assert!(best.attains && best.equality_and_martingale && best.expectation_identity);
    }

    #[test]
    fn lambda_on_deterministic_chain() {
        let (m, phi) = chain(&[0.0, 1.0, 2.0]);
        let sol = snell_solve(&phi);
        assert_eq!(sol.value().values(), &[2.0, 2.0, 2.0]);
        // Exhaustive scan: first t with λ·v(t) <= φ(t).
        let scan = |lambda: f64| (0..3).find(|&t| lambda * 2.0 <= t as f64).unwrap();
        for (lambda, t) in [(0.4, 1), (0.9, 2)] {
            assert_eq!(scan(lambda), t);
            let tau = lambda_stop(&sol, lambda, m.root()).unwrap();
            assert_eq!(tau.stops().iter().map(|&n| m.time(n)).collect::<Vec<_>>(), vec![t]);
        }
        assert_eq!(
            lambda_stop(&sol, 0.9, m.root()).unwrap(),
            minimal_optimal_stop(&sol, m.root()).unwrap()
        );
        assert_eq!(lambda_threshold(&sol, m.root()), 0.5);
        assert!(lambda_stop(&sol, 1.0, m.root()).is_err());
        assert!(lambda_stop(&sol, 0.0, m.root()).is_err());
    }

    #[test]
    fn zero_reward_any_stopping_time_is_optimal() {
        let m = Arc::new(build_binomial_lattice(2, 0.5).unwrap());
        let sol = snell_solve(&NodeProcess::constant(m.clone(), 0.0).unwrap());
        for tau in enumerate_stopping_times(m.clone(), m.root(), DEFAULT_CAP).unwrap() {
            let r = check_optimality(&sol, m.root(), &tau).unwrap();
            assert!(r.attains && r.equality_and_martingale && r.expectation_identity);
        }
    }

    #[test]
    fn diagnostics_are_clean() {
        let (m, phi) = depth2_fixture();
        let sol = snell_solve(&phi);
        assert!(sol.dominance_slack(m.root()) >= 0.0);
        assert!(sol.supermartingale_slack(m.root()) >= 0.0);
        assert_eq!(sol.bellman_residual(m.root()), 0.0);
    }
}
