//! Conic optimization: sparse data structures, an LDL' factorization and a
//! primal-dual interior-point solver for products of zero, nonnegative,
//! second-order and PSD cones.

pub mod check;
pub mod cones;
pub mod ldl;
pub mod presolve;
pub mod program;
pub mod solver;
pub mod sparse;

pub use check::{check_solution, CheckReport};
pub use program::{AffExpr, ConeSpec, ConicProgram, ProgramBuilder, ProgramError};
pub use solver::{solve, Settings, Solution, Status};
pub use sparse::CscMatrix;
