//! Bregman projections with an active set for convex programs whose linear
//! constraints are too many to list and are found instead by separation
//! oracles.
//!
//! The [`solver`] drives any [`bregman::BregmanFunction`] against any
//! [`oracle::SeparationOracle`]. Application drivers cover metric nearness,
//! correlation clustering, ITML and the L2 SVM.

pub mod bregman;
pub mod cli;
pub mod clustering;
pub mod error;
pub mod graph;
pub mod io;
pub mod metric_learning;
pub mod nearness;
pub mod oracle;
pub mod reference;
pub mod solver;

pub use bregman::{
    BregmanFunction, ConstraintId, DualMap, Hyperplane, QuadraticObjective, SparseVec,
    DUAL_ZERO_TOL, FEASIBILITY_TOL,
};
pub use error::{Error, Result};
pub use graph::{Graph, WeightedGraph};
pub use oracle::{MetricOracle, RandomOraclePool, SeparationOracle};
pub use solver::{ConvergenceCriterion, Schedule, Solution, SolverState, TraceRecord};
