//! Minimum-norm interpolation and margin classification with sparse,
//! infinitely wide, single-hidden-layer leaky-ReLU networks.
//!
//! The infinite-width problem is reduced to a finite group-norm program over
//! the sign patterns the data admits:
//!
//! 1. [`patterns`] enumerates the realizable sign patterns,
//! 2. [`programs`] builds the convex program for a formulation,
//! 3. [`solver`] solves it,
//! 4. [`network`] turns the solution back into a finite network.
//!
//! [`oracle`] holds independent discretized checks and [`gd`] trains finite
//! networks by gradient descent for comparison.

pub mod data;
pub mod error;
pub mod gd;
pub mod network;
pub mod oracle;
pub mod patterns;
pub mod programs;
pub mod solver;

pub use data::{activation_vector, leaky_relu, load_dataset, Activation, DataSet, LeakyRelu};
pub use error::{Error, Result};
pub use gd::{loss_gradient, loss_value, train, GDConfig, LossKind, StopReason, TrainOutcome};
pub use network::{reconstruct, sample_on_grid, FiniteNetwork, GridTable, Neuron};
pub use oracle::{atomic_lp, brute_force_hull_member, check_decomposition, AtomDictionary, AtomicDecomposition, OracleSolution};
pub use patterns::{cover_bound, enumerate_patterns, pattern_feasible, EnumerationConfig, PatternSet, SignPattern};
pub use programs::{
    build_joint_interp, build_margin_classify, build_program, build_weights_interp, h_of_s, ConicProgram,
    FormulationKind, HVector,
};
pub use solver::{solve, GroupSolution, SolverConfig, SolverReport, Status};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
