//! Finite filtered probability spaces as rooted event trees.
//!
//! A [`TreeModel`] is a non-recombining tree whose level `t` nodes are the
//! atoms of the sigma-field at time `t`. Measurability with respect to the
//! time-`t` information is therefore the same thing as being indexed by the
//! nodes at time `t`, and every conditional expectation is a finite weighted
//! sum over children.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::process::NodeProcess;

/// Tolerance on the sum of children probabilities.
pub const EPS_PROB: f64 = 1e-12;

/// Index of a node inside its [`TreeModel`].
///
/// Ids are assigned breadth first, so parents always precede their children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub label: String,
    pub time: usize,
    pub parent: Option<NodeId>,
    /// Children with their transition probabilities.
    pub children: Vec<(NodeId, f64)>,
    /// Probability of reaching this node from the root.
    pub path_prob: f64,
}

/// A validated finite event tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    nodes: Vec<Node>,
    horizon: usize,
    by_label: HashMap<String, NodeId>,
    hash: String,
}

/// A number given either as a JSON number or as a decimal string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Decimal {
    Number(f64),
    Text(String),
}

impl Decimal {
    pub fn to_f64(&self) -> Result<f64> {
        match self {
            Decimal::Number(x) => Ok(*x),
            Decimal::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{s}` is not a decimal number"))),
        }
    }
}

impl From<f64> for Decimal {
    fn from(x: f64) -> Self {
        Decimal::Number(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub time: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    /// Probability of the edge from the parent; ignored for the root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<Decimal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSpec {
    pub id: String,
    pub value: Decimal,
}

/// On-disk model description: `{horizon, nodes, processes}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelSpec {
    pub horizon: usize,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub processes: BTreeMap<String, Vec<ValueSpec>>,
}

/// A model together with the named processes declared alongside it.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: Arc<TreeModel>,
    pub processes: BTreeMap<String, NodeProcess>,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Validates the tree and every declared process.
    pub fn load(&self) -> Result<LoadedModel> {
        let model = Arc::new(build_tree_from_spec(self)?);
        let mut processes = BTreeMap::new();
        for (name, values) in &self.processes {
            let mut slots: Vec<Option<f64>> = vec![None; model.len()];
            for entry in values {
                let id = model.find(&entry.id)?;
                let value = entry.value.to_f64()?;
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::InvalidValue {
                        process: name.clone(),
                        node: entry.id.clone(),
                        value,
                    });
                }
                slots[id.index()] = Some(value);
            }
            let mut dense = Vec::with_capacity(slots.len());
            for (i, slot) in slots.into_iter().enumerate() {
                match slot {
                    Some(v) => dense.push(v),
                    None => {
                        return Err(Error::MissingValue {
                            process: name.clone(),
                            node: model.label(NodeId(i)).to_string(),
                        })
                    }
                }
            }
            processes.insert(name.clone(), NodeProcess::new(model.clone(), dense)?);
        }
        Ok(LoadedModel { model, processes })
    }
}

/// Builds and validates a tree from its structured description.
pub fn build_tree_from_spec(spec: &ModelSpec) -> Result<TreeModel> {
    if spec.horizon < 1 {
        return Err(Error::HorizonTooSmall(spec.horizon));
    }
    let mut position: HashMap<&str, usize> = HashMap::new();
    for (i, n) in spec.nodes.iter().enumerate() {
        if position.insert(n.id.as_str(), i).is_some() {
            return Err(Error::DuplicateNode(n.id.clone()));
        }
    }

    let mut root: Option<usize> = None;
    let mut kids: Vec<Vec<(usize, f64)>> = vec![Vec::new(); spec.nodes.len()];
    for (i, n) in spec.nodes.iter().enumerate() {
        if n.time > spec.horizon {
            return Err(Error::BeyondHorizon {
                node: n.id.clone(),
                time: n.time,
                horizon: spec.horizon,
            });
        }
        match &n.parent {
            None => {
                if let Some(r) = root {
                    return Err(Error::MultipleRoots(
                        spec.nodes[r].id.clone(),
                        n.id.clone(),
                    ));
                }
                if n.time != 0 {
                    return Err(Error::TimeMismatch {
                        node: n.id.clone(),
                        time: n.time,
                        expected: 0,
                    });
                }
                root = Some(i);
            }
            Some(p) => {
                let pi = *position.get(p.as_str()).ok_or_else(|| Error::DanglingParent {
                    node: n.id.clone(),
                    parent: p.clone(),
                })?;
                let expected = spec.nodes[pi].time + 1;
                if n.time != expected {
                    return Err(Error::TimeMismatch {
                        node: n.id.clone(),
                        time: n.time,
                        expected,
                    });
                }
                let prob = match &n.prob {
                    Some(d) => d.to_f64()?,
                    None => {
                        return Err(Error::Parse(format!(
                            "node `{}` has a parent but no probability",
                            n.id
                        )))
                    }
                };
                if !(prob.is_finite() && (0.0..=1.0).contains(&prob)) {
                    return Err(Error::InvalidProbability {
                        node: n.id.clone(),
                        prob,
                    });
                }
                kids[pi].push((i, prob));
            }
        }
    }
    let root = root.ok_or(Error::MissingRoot)?;

    // Breadth-first relabelling so that parents precede children.
    let mut order = Vec::with_capacity(spec.nodes.len());
    let mut new_id = vec![usize::MAX; spec.nodes.len()];
    let mut queue = VecDeque::from([root]);
    while let Some(i) = queue.pop_front() {
        new_id[i] = order.len();
        order.push(i);
        queue.extend(kids[i].iter().map(|&(c, _)| c));
    }
    if let Some(i) = new_id.iter().position(|&x| x == usize::MAX) {
        return Err(Error::Unreachable(spec.nodes[i].id.clone()));
    }

    let mut nodes: Vec<Node> = Vec::with_capacity(order.len());
    for &old in &order {
        let n = &spec.nodes[old];
        let parent = n.parent.as_ref().map(|p| NodeId(new_id[position[p.as_str()]]));
        let children = kids[old]
            .iter()
            .map(|&(c, p)| (NodeId(new_id[c]), p))
            .collect();
        let path_prob = match parent {
            None => 1.0,
            Some(p) => {
                let edge = kids[order[p.index()]]
                    .iter()
                    .find(|&&(c, _)| c == old)
                    .map(|&(_, pr)| pr)
                    .unwrap_or(0.0);
                nodes[p.index()].path_prob * edge
            }
        };
        nodes.push(Node {
            label: n.id.clone(),
            time: n.time,
            parent,
            children,
            path_prob,
        });
    }

    for node in &nodes {
        if node.children.is_empty() {
            if node.time != spec.horizon {
                return Err(Error::LeafBeforeHorizon {
                    node: node.label.clone(),
                    time: node.time,
                    horizon: spec.horizon,
                });
            }
        } else {
            let sum: f64 = node.children.iter().map(|&(_, p)| p).sum();
            if (sum - 1.0).abs() > EPS_PROB {
                return Err(Error::ProbabilitySum {
                    node: node.label.clone(),
                    sum,
                });
            }
        }
        if node.path_prob <= 0.0 {
            return Err(Error::NonPositivePathProbability(node.label.clone()));
        }
    }

    let by_label = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.label.clone(), NodeId(i)))
        .collect();
    let mut model = TreeModel {
        nodes,
        horizon: spec.horizon,
        by_label,
        hash: String::new(),
    };
    model.hash = model.compute_hash();
    Ok(model)
}

/// Non-recombining binary tree of depth `steps` with up-probability `p`.
///
/// Node labels spell the path: `root`, `u`, `d`, `uu`, `ud`, ...
pub fn build_binomial_lattice(steps: usize, p: f64) -> Result<TreeModel> {
    if steps < 1 {
        return Err(Error::InvalidParameter(format!(
            "binomial lattice needs steps >= 1 (got {steps})"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "up-probability must lie in (0, 1) (got {p})"
        )));
    }
    let mut spec = ModelSpec {
        horizon: steps,
        ..Default::default()
    };
    spec.nodes.push(NodeSpec {
        id: "root".into(),
        time: 0,
        parent: None,
        prob: None,
    });
    let mut frontier = vec![String::new()];
    for t in 1..=steps {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for path in &frontier {
            let parent = if path.is_empty() { "root".to_string() } else { path.clone() };
            for (step, prob) in [('u', p), ('d', 1.0 - p)] {
                let id = format!("{path}{step}");
                spec.nodes.push(NodeSpec {
                    id: id.clone(),
                    time: t,
                    parent: Some(parent.clone()),
                    prob: Some(Decimal::Number(prob)),
                });
                next.push(id);
            }
        }
        frontier = next;
    }
    build_tree_from_spec(&spec)
}

impl TreeModel {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn time(&self, id: NodeId) -> usize {
        self.nodes[id.index()].time
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].label
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.index()].parent
    }

    pub fn children(&self, id: NodeId) -> &[(NodeId, f64)] {
        &self.nodes[id.index()].children
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id.index()].children.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn find(&self, label: &str) -> Result<NodeId> {
        self.by_label
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownNode(label.to_string()))
    }

    /// Hex digest over the tree structure and probabilities.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Root-to-node path, indexed by time: `path[t]` is the ancestor at time `t`.
    pub fn path_from_root(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id; self.time(id) + 1];
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            cur = p;
            path[self.time(cur)] = cur;
        }
        path
    }

    /// Ancestor of `id` at time `t` (or `id` itself when `t` is its time).
    pub fn ancestor_at(&self, id: NodeId, t: usize) -> Option<NodeId> {
        if t > self.time(id) {
            return None;
        }
        let mut cur = id;
        while self.time(cur) > t {
            cur = self.parent(cur)?;
        }
        Some(cur)
    }

    pub fn is_ancestor_or_self(&self, ancestor: NodeId, id: NodeId) -> bool {
        self.ancestor_at(id, self.time(ancestor)) == Some(ancestor)
    }

    pub fn path_prob(&self, id: NodeId) -> f64 {
        self.nodes[id.index()].path_prob
    }

    /// `P(node | at)`, the product of edge probabilities from `at` down to `node`.
    pub fn cond_prob(&self, at: NodeId, node: NodeId) -> Option<f64> {
        if !self.is_ancestor_or_self(at, node) {
            return None;
        }
        let mut prob = 1.0;
        let mut cur = node;
        while cur != at {
            let parent = self.parent(cur)?;
            let edge = self
                .children(parent)
                .iter()
                .find(|&&(c, _)| c == cur)
                .map(|&(_, p)| p)?;
            prob *= edge;
            cur = parent;
        }
        Some(prob)
    }

    /// Nodes of the subtree rooted at `at`, in depth-first preorder.
    pub fn subtree(&self, at: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![at];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children(n).iter().rev().map(|&(c, _)| c));
        }
        out
    }

    /// Leaves below `at` with their conditional probabilities, in preorder.
    pub fn leaves_under(&self, at: NodeId) -> Vec<(NodeId, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![(at, 1.0)];
        while let Some((n, p)) = stack.pop() {
            if self.is_leaf(n) {
                out.push((n, p));
            } else {
                stack.extend(self.children(n).iter().rev().map(|&(c, q)| (c, p * q)));
            }
        }
        out
    }

    /// Descendants of `at` (including `at`) at exactly time `t`.
    pub fn descendants_at(&self, at: NodeId, t: usize) -> Vec<(NodeId, f64)> {
        let mut out = Vec::new();
        if t < self.time(at) {
            return out;
        }
        let mut stack = vec![(at, 1.0)];
        while let Some((n, p)) = stack.pop() {
            if self.time(n) == t {
                out.push((n, p));
            } else {
                stack.extend(self.children(n).iter().rev().map(|&(c, q)| (c, p * q)));
            }
        }
        out
    }

    /// Reconstructs the on-disk description (without processes).
    pub fn to_spec(&self) -> ModelSpec {
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeSpec {
                id: n.label.clone(),
                time: n.time,
                parent: n.parent.map(|p| self.label(p).to_string()),
                prob: n.parent.map(|p| {
                    let edge = self
                        .children(p)
                        .iter()
                        .find(|&&(c, _)| self.label(c) == n.label)
                        .map(|&(_, pr)| pr)
                        .unwrap_or(0.0);
                    Decimal::Number(edge)
                }),
            })
            .collect();
        ModelSpec {
            horizon: self.horizon,
            nodes,
            processes: BTreeMap::new(),
        }
    }

    fn compute_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.horizon.to_le_bytes());
        for n in &self.nodes {
            hasher.update(n.label.as_bytes());
            hasher.update([0u8]);
            hasher.update(n.time.to_le_bytes());
            for &(c, p) in &n.children {
                hasher.update(c.index().to_le_bytes());
                hasher.update(p.to_bits().to_le_bytes());
            }
            hasher.update([0xffu8]);
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
