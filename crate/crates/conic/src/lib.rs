//! Second-order cone programming by a primal-dual interior-point method.
//!
//! The crate solves problems of the form
//!
//! ```text
//!   minimize    c' x
//!   subject to  A x = b
//!               G x + s = h,   s in K
//! ```
//!
//! where `K` is a product of nonnegative orthants and second-order cones.
//! The implementation is a Mehrotra predictor-corrector method with
//! Nesterov–Todd scaling; the KKT systems are solved by a skyline LDL'
//! factorization under a reverse Cuthill–McKee ordering, which makes the
//! per-iteration cost linear for the banded programs that discretized
//! trajectory problems produce.
//!
//! Everything is generic over the floating-point type through [`Scalar`];
//! use `f64` unless you have a reason not to.
//!
//! ```
//! use conic::{solve, Cone, CscMatrix, Problem, SolverConfig, Status};
//!
//! // minimize x0 subject to x0 + x1 = 1, x in the nonnegative orthant
//! let problem = Problem::<f64> {
//!     c: vec![1.0, 0.0],
//!     a: CscMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap(),
//!     b: vec![1.0],
//!     g: CscMatrix::from_triplets(2, 2, &[(0, 0, -1.0), (1, 1, -1.0)]).unwrap(),
//!     h: vec![0.0, 0.0],
//!     cones: vec![Cone::NonnegativeOrthant(2)],
//! };
//! let solution = solve(&problem, &SolverConfig::default()).unwrap();
//! assert_eq!(solution.status, Status::Optimal);
//! assert!(solution.primal[0].abs() < 1e-8);
//! ```

mod cones;
mod equilibrate;
pub mod linalg;
mod program;
mod scalar;
mod solver;
mod sparse;

pub use cones::ConeSet;
pub use program::{Cone, Problem};
pub use scalar::Scalar;
pub use solver::{kkt_residuals, solve, Residuals, Solution, SolverConfig, Status};
pub use sparse::CscMatrix;

/// Construction-time errors. Numerical trouble during a solve is reported
/// through [`Status`], not through this type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid problem dimensions: {0}")]
    InvalidDimension(String),
}
