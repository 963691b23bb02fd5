//! Optimal Dirichlet-eigenvalue partitions viewed as maps into the N-branch
//! tree Σ_N, with frequency, singular-set, flatness and covering diagnostics.

pub mod dump;
pub mod covering;
pub mod error;
pub mod field;
pub mod flatness;
pub mod frequency;
pub mod grid;
pub mod oracle;
pub mod pipeline;
pub mod quadrature;
pub mod singular;
pub mod solver;

pub use error::{Error, Result};
pub use field::{project_to_sigma, SegregatedField};
pub use grid::{Domain, Grid, Point};
pub use oracle::{make_oracle, OracleSpec};
