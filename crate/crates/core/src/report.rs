use std::sync::Arc;

use crate::error::Result;
use crate::model::{NodeId, TreeModel};
use crate::multiple::MultiStoppingTuple;
use crate::process::NodeProcess;
use crate::single::{lambda_stop, minimal_optimal_stop, snell_solve_with};
use crate::stopping::stopping_time_value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Single,
    Multi,
    Symmetric,
    Swing,
}

impl SolveMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveMode::Single => "single",
            SolveMode::Multi => "multi",
            SolveMode::Symmetric => "symmetric",
            SolveMode::Swing => "swing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `min v − φ` (should be >= 0).
    pub dominance_slack: f64,
    /// `min v − E[v | ·]` over non-leaf nodes (should be >= 0).
    pub supermartingale_slack: f64,
    /// `max |v − max(φ, E[v | ·])|`.
    pub bellman_residual: f64,
    /// `max |u − envelope(φ)|` between the nested value and the directly
    /// solved reduced problem.
    pub reduction_identity: f64,
    /// `|E[ψ(tuple)] − value|`.
    pub attainment: f64,
    /// Whether the earliest component of the tuple is the reduced stopping time.
    pub min_cut_consistent: bool,
    pub oracle_delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaRow {
    pub lambda: f64,
    /// `E[φ(θ^λ) | start]`.
    pub stop_value: f64,
    /// `E[φ(θ^λ)] − λ v(start)`, nonnegative when the approximation bound holds.
    pub bound_slack: f64,
}

/// Output of any solver mode.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub mode: SolveMode,
    pub model: Arc<TreeModel>,
    pub model_hash: String,
    pub start: NodeId,
    pub d: usize,
    pub delta: Option<usize>,
    /// Optimal value at `start`.
    pub value: f64,
    /// Value process at every node.
    pub value_process: NodeProcess,
    /// Reward of the (reduced) single stopping problem.
    pub new_reward: NodeProcess,
    /// Minimal optimal stopping time of the reduced problem.
    pub reduced_stop: crate::stopping::StoppingTime,
    pub tuple: MultiStoppingTuple,
    pub tuple_value: f64,
    pub residuals: Residuals,
    pub lambda_table: Vec<LambdaRow>,
}

impl SolveReport {
    /// Single stopping report, with a λ-table for each requested λ.
    pub fn single(reward: &NodeProcess, start: NodeId, lambdas: &[f64], eps: f64) -> Result<Self> {
        let model = reward.model().clone();
        let sol = snell_solve_with(reward, eps);
        let theta = minimal_optimal_stop(&sol, start)?;
        let tuple_value = stopping_time_value(&theta, reward, start)?;
        let v0 = sol.value()[start];
        let lambda_table = lambdas
            .iter()
            .map(|&lambda| {
                let tau = lambda_stop(&sol, lambda, start)?;
                let stop_value = stopping_time_value(&tau, reward, start)?;
                Ok(LambdaRow {
                    lambda,
                    stop_value,
                    bound_slack: stop_value - lambda * v0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode: SolveMode::Single,
            model_hash: model.hash().to_string(),
            start,
            d: 1,
            delta: None,
            value: v0,
            residuals: Residuals {
                dominance_slack: sol.dominance_slack(start),
                supermartingale_slack: sol.supermartingale_slack(start),
                bellman_residual: sol.bellman_residual(start),
                reduction_identity: 0.0,
                attainment: (tuple_value - v0).abs(),
                min_cut_consistent: true,
                oracle_delta: None,
            },
            value_process: sol.value().clone(),
            new_reward: reward.clone(),
            tuple: MultiStoppingTuple::repeated(&theta, 1),
            reduced_stop: theta,
            tuple_value,
            lambda_table,
            model,
        })
    }
}
