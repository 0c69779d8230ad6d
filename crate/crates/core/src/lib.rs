//! Multi-layer factorized graph matching.
//!
//! Two graphs whose vertices carry several attribute layers are matched by
//! maximizing a layer-weighted quadratic assignment objective. The pairwise
//! affinity is never materialized as a supra-adjacency matrix; it is split
//! into low-rank factors and evaluated as traces of small matrices. The
//! solver follows a convex-to-concave relaxation path with Frank–Wolfe inner
//! iterations and re-estimates per-layer confidence along the way.

// `!(x > 0.0)` also rejects NaN in parameter checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affinity;
pub mod baseline;
pub mod error;
pub mod factorization;
pub mod harness;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod problem;
pub mod solver;
pub mod verify;

pub use affinity::{KernelConfig, LayerAffinities, UnaryMode};
pub use error::{Error, Result};
pub use factorization::{build_factorized_problem, CouplingMatrices, FactorizedProblem};
pub use harness::experiment::{run_experiment, BenchResult, ExperimentConfig, ExperimentKind, Method};
pub use harness::io::{load_problem, save_problem};
pub use harness::synthetic::{generate_synthetic_pair, SyntheticPair, SyntheticParams};
pub use model::{Assignment, AssignmentMode, EdgeIncidence, IncidenceBundle, LayerConfidence, MultiLayerGraph};
pub use objective::{ObjectiveContext, SmoothObjective};
pub use problem::MatchingProblem;
pub use solver::{solve, solve_mlfgm, SolveReport, SolverConfig};
