//! Brute-force ground truth by exhaustive enumeration of stopping tuples.
//!
//! On a finite tree the essential supremum over a finite family is a plain
//! maximum, so the optimal value of any of the stopping problems solved in
//! this crate can be recovered by trying every admissible tuple.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NodeId, TreeModel};
use crate::multiple::MultiStoppingTuple;
use crate::order::tuple_order_compare;
use crate::report::SolveReport;
use crate::reward::MultiReward;
use crate::single::EPS_EQ;
use crate::stopping::{check_cap, CutSpace, StoppingTime, DEFAULT_CAP};

/// Optional restriction of the tuples searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// `τ₁ <= τ₂ <= … <= τ_d` on every path.
    Ordered,
    /// `τ_{k+1} >= τ_k + δ` on every path.
    DeltaGap(usize),
}

impl Constraint {
    fn gap(self) -> usize {
        match self {
            Constraint::Ordered => 0,
            Constraint::DeltaGap(g) => g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub cap: u128,
    pub budget: Duration,
    pub eps: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            budget: Duration::from_secs(60),
            eps: EPS_EQ,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub model_hash: String,
    pub start: NodeId,
    pub d: usize,
    pub constraint: Option<Constraint>,
    pub value: f64,
    /// Every tuple within `eps` of the maximum, in enumeration order.
    pub optimal_tuples: Vec<MultiStoppingTuple>,
    pub enumerated_count: u128,
    pub elapsed: Duration,
}

struct Leaves {
    paths: Vec<Vec<NodeId>>,
    probs: Vec<f64>,
}

impl Leaves {
    fn new(model: &TreeModel, start: NodeId) -> Self {
        let (leaves, probs): (Vec<NodeId>, Vec<f64>) = model.leaves_under(start).into_iter().unzip();
        Self {
            paths: leaves.iter().map(|&l| model.path_from_root(l)).collect(),
            probs,
        }
    }
}

/// Best value found so far, with the indices of every tuple attaining it.
struct Best<K> {
    value: f64,
    keys: Vec<K>,
    eps: f64,
    values: Vec<f64>,
}

impl<K> Best<K> {
    fn new(eps: f64) -> Self {
        Self {
            value: f64::NEG_INFINITY,
            keys: Vec::new(),
            eps,
            values: Vec::new(),
        }
    }

    fn offer(&mut self, key: K, value: f64) {
        if value > self.value + self.eps {
            self.value = value;
            let floor = value - self.eps;
            let mut kept_keys = Vec::new();
            let mut kept_values = Vec::new();
            for (k, v) in self.keys.drain(..).zip(self.values.drain(..)) {
                if v >= floor {
                    kept_keys.push(k);
                    kept_values.push(v);
                }
            }
            self.keys = kept_keys;
            self.values = kept_values;
            self.keys.push(key);
            self.values.push(value);
        } else if value >= self.value - self.eps {
            if value > self.value {
                self.value = value;
            }
            self.keys.push(key);
            self.values.push(value);
        }
    }
}

pub fn brute_force_value(
    psi: &MultiReward,
    model: &Arc<TreeModel>,
    start: NodeId,
    constraint: Option<Constraint>,
) -> Result<OracleReport> {
    brute_force_value_with(psi, model, start, constraint, &OracleConfig::default())
}

/// Maximizes `E[ψ(τ) | start]` over every admissible tuple.
pub fn brute_force_value_with(
    psi: &MultiReward,
    model: &Arc<TreeModel>,
    start: NodeId,
    constraint: Option<Constraint>,
    config: &OracleConfig,
) -> Result<OracleReport> {
    if !model.contains(start) {
        return Err(Error::UnknownNode(start.to_string()));
    }
    let began = Instant::now();
    let d = psi.d();
    let leaves = Leaves::new(model, start);
    let (value, optimal_tuples, enumerated_count) = match constraint {
        None => product_search(psi, model, start, &leaves, config, began)?,
        Some(c) => ordered_search(psi, model, start, c.gap(), &leaves, config, began)?,
    };
    Ok(OracleReport {
        model_hash: model.hash().to_string(),
        start,
        d,
        constraint,
        value,
        optimal_tuples,
        enumerated_count,
        elapsed: began.elapsed(),
    })
}

fn check_budget(began: Instant, config: &OracleConfig) -> Result<()> {
    if began.elapsed() > config.budget {
        return Err(Error::TimeBudgetExceeded {
            budget_secs: config.budget.as_secs_f64(),
        });
    }
    Ok(())
}

type Found = (f64, Vec<MultiStoppingTuple>, u128);

fn product_search(
    psi: &MultiReward,
    model: &Arc<TreeModel>,
    start: NodeId,
    leaves: &Leaves,
    config: &OracleConfig,
    began: Instant,
) -> Result<Found> {
    let d = psi.d();
    let space = CutSpace::new(model.clone(), start, 0);
    let n = space.count();
    check_cap(n, config.cap)?;
    let total = (0..d).try_fold(1u128, |acc, _| acc.checked_mul(n)).unwrap_or(u128::MAX);
    check_cap(total, config.cap)?;

    let cuts: Vec<StoppingTime> = (0..n).map(|i| space.decode(i)).collect();
    // times[c][l]: stop time of cut c on leaf path l.
    let times: Vec<Vec<usize>> = cuts
        .iter()
        .map(|c| {
            leaves
                .paths
                .iter()
                .map(|p| model.time(c.stop_on_path(p).expect("valid cut")))
                .collect()
        })
        .collect();

    let n = cuts.len();
    let mut digits = vec![0usize; d];
    let mut best: Best<Vec<usize>> = Best::new(config.eps);
    let mut buf = vec![0usize; d];
    let mut count: u128 = 0;
    loop {
        let mut value = 0.0;
        for (l, path) in leaves.paths.iter().enumerate() {
            for k in 0..d {
                buf[k] = times[digits[k]][l];
            }
            value += leaves.probs[l] * psi.evaluate(model, path, &buf)?;
        }
        best.offer(digits.clone(), value);
        count += 1;
        if count.is_multiple_of(1024) {
            check_budget(began, config)?;
        }
        // Odometer, last component fastest.
        let mut k = d;
        loop {
            if k == 0 {
                let tuples = best
                    .keys
                    .iter()
                    .map(|ix| {
                        MultiStoppingTuple::new(ix.iter().map(|&i| cuts[i].clone()).collect())
                            .expect("cuts share model and start")
                    })
                    .collect();
                return Ok((best.value, tuples, count));
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < n {
                break;
            }
            digits[k] = 0;
        }
    }
}

/// Counts and decodes per-path ordered tuples `τ_{k+1} >= τ_k + gap`.
struct OrderedSpace<'a> {
    model: &'a TreeModel,
    d: usize,
    gap: usize,
    memo: HashMap<(NodeId, usize, usize), u128>,
}

impl<'a> OrderedSpace<'a> {
    fn count(&mut self, n: NodeId, k: usize, min_time: usize) -> u128 {
        if k == 0 {
            return 1;
        }
        if let Some(&c) = self.memo.get(&(n, k, min_time)) {
            return c;
        }
        let t = self.model.time(n);
        let here = if t >= min_time { self.count(n, k - 1, t + self.gap) } else { 0 };
        let below = if self.model.is_leaf(n) {
            0
        } else {
            let children: Vec<NodeId> = self.model.children(n).iter().map(|&(c, _)| c).collect();
            children
                .into_iter()
                .fold(1u128, |acc, c| acc.saturating_mul(self.count(c, k, min_time)))
        };
        let total = here.saturating_add(below);
        self.memo.insert((n, k, min_time), total);
        total
    }

    fn decode(&mut self, n: NodeId, k: usize, min_time: usize, mut index: u128, sets: &mut [Vec<NodeId>]) {
        if k == 0 {
            return;
        }
        let t = self.model.time(n);
        if t >= min_time {
            let here = self.count(n, k - 1, t + self.gap);
            if index < here {
                sets[self.d - k].push(n);
                self.decode(n, k - 1, t + self.gap, index, sets);
                return;
            }
            index -= here;
        }
        let children: Vec<NodeId> = self.model.children(n).iter().map(|&(c, _)| c).collect();
        for c in children {
            let radix = self.count(c, k, min_time);
            self.decode(c, k, min_time, index % radix, sets);
            index /= radix;
        }
    }
}

fn ordered_search(
    psi: &MultiReward,
    model: &Arc<TreeModel>,
    start: NodeId,
    gap: usize,
    leaves: &Leaves,
    config: &OracleConfig,
    began: Instant,
) -> Result<Found> {
    let d = psi.d();
    let mut space = OrderedSpace {
        model,
        d,
        gap,
        memo: HashMap::new(),
    };
    let total = space.count(start, d, model.time(start));
    if total == 0 {
        return Err(Error::EmptyFeasibleSet(model.label(start).to_string()));
    }
    check_cap(total, config.cap)?;

    let mut best: Best<u128> = Best::new(config.eps);
    let mut buf = vec![0usize; d];
    let decode = |space: &mut OrderedSpace<'_>, index: u128| {
        let mut sets = vec![Vec::new(); d];
        space.decode(start, d, model.time(start), index, &mut sets);
        sets.iter_mut().for_each(|s| s.sort_unstable());
        sets
    };
    for index in 0..total {
        let sets = decode(&mut space, index);
        let mut value = 0.0;
        for (l, path) in leaves.paths.iter().enumerate() {
            for k in 0..d {
                let stop = path[model.time(start)..]
                    .iter()
                    .find(|n| sets[k].binary_search(n).is_ok())
                    .expect("decoded set is a cut");
                buf[k] = model.time(*stop);
            }
            value += leaves.probs[l] * psi.evaluate(model, path, &buf)?;
        }
        best.offer(index, value);
        if (index + 1) % 1024 == 0 {
            check_budget(began, config)?;
        }
    }
    let tuples = best
        .keys
        .iter()
        .map(|&index| {
            let sets = decode(&mut space, index);
            MultiStoppingTuple::new(
                sets.into_iter()
                    .map(|s| StoppingTime::new(model.clone(), start, s).expect("decoded set is a cut"))
                    .collect(),
            )
            .expect("components share model and start")
        })
        .collect();
    Ok((best.value, tuples, total))
}

/// Result of comparing a candidate tuple against every optimal tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub minimal: bool,
    pub optimal_tuples: usize,
    /// First failing comparison: (leaf label, candidate times, optimal times, order).
    pub violation: Option<(String, Vec<usize>, Vec<usize>, String)>,
}

/// Checks that `candidate` is `≺_d`-below-or-equal every optimal tuple of
/// `oracle` on every path.
pub fn minimality_against(candidate: &MultiStoppingTuple, oracle: &OracleReport) -> Result<MinimalityReport> {
    let model = candidate.model();
    let leaves: Vec<NodeId> = model
        .leaves_under(candidate.start())
        .into_iter()
        .map(|(l, _)| l)
        .collect();
    let mine: Vec<Vec<usize>> = leaves.iter().map(|&l| candidate.times_at_leaf(l)).collect();
    for other in &oracle.optimal_tuples {
        for (i, &leaf) in leaves.iter().enumerate() {
            let theirs = other.times_at_leaf(leaf);
            let order = tuple_order_compare(&mine[i], &theirs)?;
            if !order.is_le() {
                return Ok(MinimalityReport {
                    minimal: false,
                    optimal_tuples: oracle.optimal_tuples.len(),
                    violation: Some((
                        model.label(leaf).to_string(),
                        mine[i].clone(),
                        theirs,
                        format!("{order:?}"),
                    )),
                });
            }
        }
    }
    Ok(MinimalityReport {
        minimal: true,
        optimal_tuples: oracle.optimal_tuples.len(),
        violation: None,
    })
}

/// Oracle-based check that `candidate` is the `≺_d`-minimal optimal tuple.
pub fn verify_minimal_optimal(
    psi: &MultiReward,
    model: &Arc<TreeModel>,
    start: NodeId,
    candidate: &MultiStoppingTuple,
    config: &OracleConfig,
) -> Result<MinimalityReport> {
    let oracle = brute_force_value_with(psi, model, start, None, config)?;
    minimality_against(candidate, &oracle)
}

pub const VERDICT_SCHEMA_VERSION: u32 = 1;

/// Machine-readable result of certifying a solver report against the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub schema_version: u32,
    pub model_hash: String,
    pub start: String,
    pub d: usize,
    pub solver_value: f64,
    pub oracle_value: f64,
    pub value_delta: f64,
    pub value_pass: bool,
    pub tuple_value: f64,
    pub attainment_delta: f64,
    pub attainment_pass: bool,
    pub minimality_pass: bool,
    pub minimality: MinimalityReport,
    pub enumerated_count: u128,
    pub pass: bool,
}

pub fn certify(report: &SolveReport, oracle: &OracleReport) -> Result<Verdict> {
    certify_with(report, oracle, EPS_EQ)
}

pub fn certify_with(report: &SolveReport, oracle: &OracleReport, eps: f64) -> Result<Verdict> {
    if report.model_hash != oracle.model_hash || report.start != oracle.start || report.d != oracle.d {
        return Err(Error::ModelMismatch);
    }
    let value_delta = (report.value - oracle.value).abs();
    let attainment_delta = (report.tuple_value - oracle.value).abs();
    let minimality = minimality_against(&report.tuple, oracle)?;
    let value_pass = value_delta <= eps;
    let attainment_pass = attainment_delta <= eps;
    let minimality_pass = minimality.minimal;
    Ok(Verdict {
        schema_version: VERDICT_SCHEMA_VERSION,
        model_hash: report.model_hash.clone(),
        start: report.model.label(report.start).to_string(),
        d: report.d,
        solver_value: report.value,
        oracle_value: oracle.value,
        value_delta,
        value_pass,
        tuple_value: report.tuple_value,
        attainment_delta,
        attainment_pass,
        minimality_pass,
        minimality,
        enumerated_count: oracle.enumerated_count,
        pass: value_pass && attainment_pass && minimality_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_binomial_lattice;
    use crate::multiple::solve_multi;
    use crate::process::NodeProcess;
    use crate::single::snell_solve;

    fn lattice(steps: usize) -> Arc<TreeModel> {
        Arc::new(build_binomial_lattice(steps, 0.5).unwrap())
    }

    #[test]
    fn zero_reward_all_pairs_optimal() {
        let m = lattice(1);
        let psi = MultiReward::zero(m.clone(), 2).unwrap();
        let r = brute_force_value(&psi, &m, m.root(), None).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.enumerated_count, 4);
        assert_eq!(r.optimal_tuples.len(), 4);
    }

    #[test]
    fn single_component_matches_envelope() {
        let m = lattice(3);
        let y = NodeProcess::from_fn(m.clone(), |n| ((n.index() * 5) % 7) as f64).unwrap();
        let psi = MultiReward::additive(y.clone(), 1).unwrap();
        let r = brute_force_value(&psi, &m, m.root(), None).unwrap();
        assert_eq!(r.value, snell_solve(&y).value()[m.root()]);
        assert_eq!(r.enumerated_count, 26);
    }

    #[test]
    fn infeasible_gap() {
        let m = lattice(2);
        let psi = MultiReward::zero(m.clone(), 2).unwrap();
        assert!(matches!(
            brute_force_value(&psi, &m, m.root(), Some(Constraint::DeltaGap(3))),
            Err(Error::EmptyFeasibleSet(_))
        ));
    }

    #[test]
    fn ordered_enumeration_counts() {
        // Ordered pairs on a 1-step tree: (0,0), (0,1), (1,1).
        let m = lattice(1);
        let psi = MultiReward::zero(m.clone(), 2).unwrap();
        let r = brute_force_value(&psi, &m, m.root(), Some(Constraint::Ordered)).unwrap();
        assert_eq!(r.enumerated_count, 3);
        let r = brute_force_value(&psi, &m, m.root(), Some(Constraint::DeltaGap(1))).unwrap();
        assert_eq!(r.enumerated_count, 1);
        for t in &r.optimal_tuples {
            for leaf in [m.find("u").unwrap(), m.find("d").unwrap()] {
                assert_eq!(t.times_at_leaf(leaf), vec![0, 1]);
            }
        }
    }

    #[test]
    fn cap_and_determinism() {
        let m = lattice(3);
        let psi = MultiReward::zero(m.clone(), 3).unwrap();
        let config = OracleConfig {
            cap: 1000,
            ..Default::default()
        };
        assert!(matches!(
            brute_force_value_with(&psi, &m, m.root(), None, &config),
            Err(Error::CapExceeded { .. })
        ));
        let y = NodeProcess::from_fn(m.clone(), |n| (n.index() % 3) as f64).unwrap();
        let psi = MultiReward::additive(y, 2).unwrap();
        let a = brute_force_value(&psi, &m, m.root(), None).unwrap();
        let b = brute_force_value(&psi, &m, m.root(), None).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.optimal_tuples, b.optimal_tuples);
    }

    #[test]
    fn certify_passes_and_detects_faults() {
        let m = lattice(2);
        let psi = MultiReward::zero(m.clone(), 2).unwrap();
        let report = solve_multi(&psi, &m, m.root()).unwrap();
        let oracle = brute_force_value(&psi, &m, m.root(), None).unwrap();
        let verdict = certify(&report, &oracle).unwrap();
        assert!(verdict.pass);
        assert_eq!(verdict.value_delta, 0.0);

        let mut perturbed = report.clone();
        perturbed.value += 1e-3;
        let v = certify(&perturbed, &oracle).unwrap();
        assert!(!v.pass && !v.value_pass && v.attainment_pass && v.minimality_pass);
        assert!((v.value_delta - 1e-3).abs() < 1e-12);

        let mut late = report.clone();
        let horizon = StoppingTime::at_horizon(m.clone(), m.root());
        late.tuple = MultiStoppingTuple::repeated(&horizon, 2);
        let v = certify(&late, &oracle).unwrap();
        assert!(v.value_pass && v.attainment_pass && !v.minimality_pass && !v.pass);

        let other = lattice(1);
        let psi1 = MultiReward::zero(other.clone(), 2).unwrap();
        let foreign = brute_force_value(&psi1, &other, other.root(), None).unwrap();
        assert_eq!(certify(&report, &foreign), Err(Error::ModelMismatch));
    }
}
