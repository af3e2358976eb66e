//! Approximate D-optimal designs for multifactor models on very large finite
//! grids.
//!
//! The design space is the product of per-factor level sets and is never
//! enumerated. Designs are computed by the galaxy exploration loop in
//! [`gex`]: a finite-set exchange solver ([`solver`]) is run on exploration
//! sets built from star-shaped neighbourhoods of the current support and
//! local maxima of the variance function.

pub mod design;
pub mod dsl;
pub mod error;
pub mod gex;
pub mod grid;
pub mod info;
pub mod linalg;
pub mod models;
pub mod normal;
pub mod solver;

pub use design::{round_to_exact, Design, DesignRecord, ExactDesign};
pub use error::{Error, Result};
pub use grid::{median_level, DesignPoint, FactorGrid, LevelSpec};
pub use info::{
    d_criterion, design_criterion, efficiency_lower_bound, information_matrix,
    relative_efficiency, variance_function, Criterion, DOptimality, InfoMatrix,
};
pub use models::{benchmark, BenchmarkProblem, GlmFamily, Model, BENCHMARK_COUNT};
