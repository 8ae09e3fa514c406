use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{NodeId, TreeModel};

/// One nonnegative finite value per node of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeProcess {
    model: Arc<TreeModel>,
    values: Vec<f64>,
}

impl NodeProcess {
    pub fn new(model: Arc<TreeModel>, values: Vec<f64>) -> Result<Self> {
        if values.len() != model.len() {
            return Err(Error::ProcessLength {
                expected: model.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidValue {
                process: "<unnamed>".into(),
                node: model.label(NodeId(i)).to_string(),
                value: values[i],
            });
        }
        Ok(Self { model, values })
    }

    pub fn from_fn(model: Arc<TreeModel>, f: impl Fn(NodeId) -> f64) -> Result<Self> {
        let values = model.ids().map(f).collect();
        Self::new(model, values)
    }

    pub fn constant(model: Arc<TreeModel>, c: f64) -> Result<Self> {
        Self::from_fn(model, |_| c)
    }

    pub fn model(&self) -> &Arc<TreeModel> {
        &self.model
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, id: NodeId) -> f64 {
        self.values[id.index()]
    }
}

impl std::ops::Index<NodeId> for NodeProcess {
    type Output = f64;

    fn index(&self, id: NodeId) -> &f64 {
        &self.values[id.index()]
    }
}

/// `E[X | node]` over the node's children.
pub fn conditional_expectation(x: &NodeProcess, node: NodeId) -> Result<f64> {
    let model = x.model();
    if !model.contains(node) {
        return Err(Error::UnknownNode(node.to_string()));
    }
    if model.is_leaf(node) {
        return Err(Error::LeafNode(model.label(node).to_string()));
    }
    Ok(model
        .children(node)
        .iter()
        .map(|&(c, p)| p * x.get(c))
        .sum())
}

/// Same weighted sum for a raw value slice indexed like the model.
pub(crate) fn expect_children(model: &TreeModel, values: &[f64], node: NodeId) -> f64 {
    model
        .children(node)
        .iter()
        .map(|&(c, p)| p * values[c.index()])
        .sum()
}
