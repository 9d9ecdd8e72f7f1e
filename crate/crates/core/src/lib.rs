//! Sparse minimizers of `phi(u) + lambda/2 ||A u - y||^2` for three
//! regularizers with extremal atoms: the Radon norm on measures (Diracs),
//! one-dimensional total variation (steps) and `||D^q u||_M` (truncated
//! powers).
//!
//! A fully-corrective conditional gradient method finds a solution, a
//! Carathéodory reduction brings its support down to the quotient dimension
//! `N - rank(B)`, and a dual certificate checks global optimality. Grid
//! oracles give independent reference values.

pub mod atoms;
pub mod certificate;
pub mod error;
pub mod generate;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod solver;

pub use atoms::{Atom, Sign, WeightedAtom};
pub use certificate::{certify, Certificate, CertificateReport, CertifyOptions};
pub use error::{Error, Result};
pub use kernel::{Domain, Kernel};
pub use model::{dim_quotient, validate, validate_problem, Fidelity, Kind, Problem, ProblemSpec, ValidationReport};
pub use oracle::{compare, grid_solve_exact, grid_solve_lasso, ComparisonReport, OracleResult};
pub use solver::{caratheodory_prune, solve, SolveOutput, SolverOptions, SolverReport, SparseSolution};
