//! Path-following solver and its building blocks.

pub mod confidence;
pub mod frank_wolfe;
pub mod hungarian;
pub mod path;

pub use confidence::{layer_confidence, project_confidence, raw_layer_confidence};
pub use frank_wolfe::{exact_line_search, frank_wolfe_max, FwOptions, FwResult, FwVariant};
pub use hungarian::{assignment_score, hungarian, hungarian_matching, permutation_matrix};
pub use path::{matching_objective, padded_permutation, solve, solve_mlfgm, SolveReport, SolverConfig, TracePoint};
