//! Stopping times as exact cuts of the event tree.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{NodeId, TreeModel};
use crate::process::NodeProcess;

/// Default cap on the number of enumerated stopping times or tuples.
pub const DEFAULT_CAP: u128 = 10_000_000;

/// A stopping time from `start`: a set of nodes that every path through
/// `start` crosses exactly once.
#[derive(Debug, Clone)]
pub struct StoppingTime {
    model: Arc<TreeModel>,
    start: NodeId,
    stops: Vec<NodeId>,
}

impl PartialEq for StoppingTime {
    fn eq(&self, other: &Self) -> bool {
        self.start == other.start && self.stops == other.stops && self.model.hash() == other.model.hash()
    }
}

impl Eq for StoppingTime {}

impl StoppingTime {
    /// Validates that `stops` is an exact cut of the subtree of `start`.
    pub fn new(model: Arc<TreeModel>, start: NodeId, stops: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let mut stops: Vec<NodeId> = stops.into_iter().collect();
        stops.sort_unstable();
        stops.dedup();
        let start_label = || model.label(start).to_string();
        for &s in &stops {
            if !model.contains(s) {
                return Err(Error::UnknownNode(s.to_string()));
            }
            if !model.is_ancestor_or_self(start, s) {
                return Err(Error::NotACut {
                    start: start_label(),
                    reason: format!("node `{}` lies outside the subtree", model.label(s)),
                });
            }
        }
        let t0 = model.time(start);
        for (leaf, _) in model.leaves_under(start) {
            let path = model.path_from_root(leaf);
            let hits = path[t0..]
                .iter()
                .filter(|n| stops.binary_search(n).is_ok())
                .count();
            if hits != 1 {
                return Err(Error::NotACut {
                    start: start_label(),
                    reason: format!(
                        "path to leaf `{}` crosses the stop set {hits} times",
                        model.label(leaf)
                    ),
                });
            }
        }
        Ok(Self { model, start, stops })
    }

    pub(crate) fn from_sorted_unchecked(model: Arc<TreeModel>, start: NodeId, stops: Vec<NodeId>) -> Self {
        debug_assert!(stops.windows(2).all(|w| w[0] < w[1]));
        Self { model, start, stops }
    }

    /// Stop immediately at `start`.
    pub fn stop_now(model: Arc<TreeModel>, start: NodeId) -> Self {
        Self {
            model,
            start,
            stops: vec![start],
        }
    }

    /// Stop at the horizon on every path.
    pub fn at_horizon(model: Arc<TreeModel>, start: NodeId) -> Self {
        let mut stops: Vec<NodeId> = model.leaves_under(start).into_iter().map(|(l, _)| l).collect();
        stops.sort_unstable();
        Self { model, start, stops }
    }

    /// First node on each path from `start` satisfying `hit`. Leaves always count
    /// as hits so the result is a valid cut.
    pub fn first_hitting(model: Arc<TreeModel>, start: NodeId, mut hit: impl FnMut(NodeId) -> bool) -> Self {
        let mut stops = Vec::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            if model.is_leaf(n) || hit(n) {
                stops.push(n);
            } else {
                stack.extend(model.children(n).iter().map(|&(c, _)| c));
            }
        }
        stops.sort_unstable();
        Self { model, start, stops }
    }

    /// Pointwise earliest of several cuts sharing a start node.
    pub fn earliest(cuts: &[&StoppingTime]) -> Result<Self> {
        let first = cuts
            .first()
            .ok_or_else(|| Error::InvalidParameter("earliest of an empty set".into()))?;
        for c in cuts {
            if !Arc::ptr_eq(&c.model, &first.model) && c.model.hash() != first.model.hash() {
                return Err(Error::ModelMismatch);
            }
            if c.start != first.start {
                return Err(Error::InvalidParameter("cuts start at different nodes".into()));
            }
        }
        Ok(Self::first_hitting(first.model.clone(), first.start, |n| {
            cuts.iter().any(|c| c.contains(n))
        }))
    }

    pub fn model(&self) -> &Arc<TreeModel> {
        &self.model
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn stops(&self) -> &[NodeId] {
        &self.stops
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.stops.binary_search(&n).is_ok()
    }

    /// Stop node on a root-indexed path through `start`.
    pub fn stop_on_path(&self, path: &[NodeId]) -> Option<NodeId> {
        let t0 = self.model.time(self.start);
        path.get(t0..)?.iter().copied().find(|&n| self.contains(n))
    }

    /// Stop node on the path leading to `node` (which must lie below `start`),
    /// if the cut is crossed at or before it.
    pub fn stop_before(&self, node: NodeId) -> Option<NodeId> {
        let t0 = self.model.time(self.start);
        let mut cur = node;
        let mut found = None;
        loop {
            if self.contains(cur) {
                found = Some(cur);
            }
            if self.model.time(cur) <= t0 {
                break;
            }
            cur = self.model.parent(cur)?;
        }
        found
    }

    /// Stop time on the path to `leaf`.
    pub fn time_at_leaf(&self, leaf: NodeId) -> Option<usize> {
        self.stop_before(leaf).map(|n| self.model.time(n))
    }

    /// True when `self` stops no later than `other` on every path.
    pub fn le_pathwise(&self, other: &StoppingTime) -> bool {
        self.model
            .leaves_under(self.start)
            .iter()
            .all(|&(l, _)| self.time_at_leaf(l) <= other.time_at_leaf(l))
    }

    pub fn stop_labels(&self) -> Vec<String> {
        self.stops.iter().map(|&n| self.model.label(n).to_string()).collect()
    }
}

/// `E[X(τ) | at]` by summing over the stop nodes below `at`.
pub fn stopping_time_value(tau: &StoppingTime, x: &NodeProcess, at: NodeId) -> Result<f64> {
    let model = tau.model();
    if !Arc::ptr_eq(model, x.model()) && model.hash() != x.model().hash() {
        return Err(Error::ModelMismatch);
    }
    if !model.contains(at) {
        return Err(Error::UnknownNode(at.to_string()));
    }
    if !model.is_ancestor_or_self(tau.start(), at) {
        return Err(Error::NotInSubtree {
            node: model.label(at).to_string(),
            start: model.label(tau.start()).to_string(),
        });
    }
    if let Some(early) = tau.stop_before(at) {
        return Ok(x.get(early));
    }
    let mut total = 0.0;
    let mut stack = vec![(at, 1.0)];
    while let Some((n, p)) = stack.pop() {
        if tau.contains(n) {
            total += p * x.get(n);
        } else {
            stack.extend(model.children(n).iter().map(|&(c, q)| (c, p * q)));
        }
    }
    Ok(total)
}

/// Counts of stopping times per node, optionally restricted to stop no
/// earlier than `min_time`.
///
/// `N(leaf) = 1` and `N(node) = 1 + Π N(child)`; nodes before `min_time`
/// lose the "stop here" option.
#[derive(Debug, Clone)]
pub struct CutSpace {
    model: Arc<TreeModel>,
    start: NodeId,
    min_time: usize,
    counts: Vec<u128>,
}

impl CutSpace {
    pub fn new(model: Arc<TreeModel>, start: NodeId, min_time: usize) -> Self {
        let mut counts = vec![0u128; model.len()];
        for n in model.subtree(start).into_iter().rev() {
            let here = u128::from(model.time(n) >= min_time);
            let below = if model.is_leaf(n) {
                0
            } else {
                model
                    .children(n)
                    .iter()
                    .fold(1u128, |acc, &(c, _)| acc.saturating_mul(counts[c.index()]))
            };
            counts[n.index()] = here.saturating_add(below);
        }
        Self {
            model,
            start,
            min_time,
            counts,
        }
    }

    /// Number of cuts below `start` (saturates at `u128::MAX`).
    pub fn count(&self) -> u128 {
        self.counts[self.start.index()]
    }

    pub fn count_at(&self, n: NodeId) -> u128 {
        self.counts[n.index()]
    }

    /// Decodes cut number `index` (canonical mixed-radix order) into stop nodes.
    pub fn decode_into(&self, n: NodeId, mut index: u128, out: &mut Vec<NodeId>) {
        debug_assert!(index < self.counts[n.index()]);
        if self.model.time(n) >= self.min_time {
            if index == 0 {
                out.push(n);
                return;
            }
            index -= 1;
        }
        for &(c, _) in self.model.children(n) {
            let radix = self.counts[c.index()];
            self.decode_into(c, index % radix, out);
            index /= radix;
        }
    }

    pub fn decode(&self, index: u128) -> StoppingTime {
        let mut stops = Vec::new();
        self.decode_into(self.start, index, &mut stops);
        stops.sort_unstable();
        StoppingTime::from_sorted_unchecked(self.model.clone(), self.start, stops)
    }
}

/// Lazy stream over every stopping time from `start`, in canonical order.
#[derive(Debug, Clone)]
pub struct StoppingTimes {
    space: CutSpace,
    next: u128,
}

impl StoppingTimes {
    pub fn count(&self) -> u128 {
        self.space.count()
    }
}

impl Iterator for StoppingTimes {
    type Item = StoppingTime;

    fn next(&mut self) -> Option<StoppingTime> {
        if self.next >= self.space.count() {
            return None;
        }
        let tau = self.space.decode(self.next);
        self.next += 1;
        Some(tau)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.space.count() - self.next;
        let left = usize::try_from(left).unwrap_or(usize::MAX);
        (left, Some(left))
    }
}

/// Every exact-cut stopping time from `start`, or `CapExceeded` when there are
/// more than `cap` of them.
pub fn enumerate_stopping_times(model: Arc<TreeModel>, start: NodeId, cap: u128) -> Result<StoppingTimes> {
    if !model.contains(start) {
        return Err(Error::UnknownNode(start.to_string()));
    }
    let space = CutSpace::new(model, start, 0);
    check_cap(space.count(), cap)?;
    Ok(StoppingTimes { space, next: 0 })
}

pub(crate) fn check_cap(count: u128, cap: u128) -> Result<()> {
    if count > cap {
        let count = if count == u128::MAX {
            format!(">= {}", u128::MAX)
        } else {
            count.to_string()
        };
        return Err(Error::CapExceeded { count, cap });
    }
    Ok(())
}
