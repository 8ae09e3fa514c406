//! Optimal single and multiple stopping on finite event trees.
//!
//! A d-fold stopping problem is reduced to a single stopping problem for a
//! new reward built from nested (d−1)-fold problems; the single problem is
//! solved by backward induction. A brute-force oracle enumerates every
//! stopping time on small trees to certify solver output.

pub mod corpus;
pub mod error;
pub mod model;
pub mod multiple;
pub mod oracle;
pub mod order;
pub mod process;
pub mod report;
pub mod reward;
pub mod single;
pub mod stopping;
pub mod swing;

pub use error::{Error, Result};
pub use model::{build_binomial_lattice, build_tree_from_spec, ModelSpec, NodeId, TreeModel};
pub use multiple::{solve_multi, solve_multi_with, Assignment, MultiStoppingTuple, NestedValue, SolverConfig};
pub use oracle::{brute_force_value, certify, Constraint, OracleConfig, OracleReport, Verdict};
pub use order::{precedes, tuple_order_compare, TupleOrder};
pub use process::{conditional_expectation, NodeProcess};
pub use report::{Residuals, SolveMode, SolveReport};
pub use reward::MultiReward;
pub use single::{check_optimality, lambda_stop, lambda_threshold, minimal_optimal_stop, snell_solve, SnellSolution};
pub use stopping::{enumerate_stopping_times, stopping_time_value, StoppingTime};
pub use swing::{solve_swing, solve_symmetric, swing_solve, symmetric_backward, SwingSolution};
