//! Minimum-time and minimum-energy speed planning along a fixed path.
//!
//! Given a vehicle, a path discretized into constant-grade steps and a
//! time/energy trade-off weight, this crate builds the exact second-order
//! cone relaxation of the (non-convex) speed planning problem, solves it
//! with [`conic`], and certifies whether the relaxed optimum is a genuine
//! speed plan — either a priori from conditions on the instance or a
//! posteriori from the measured gap of a concrete solution.
//!
//! The decision variable is the *squared* speed `w_i` at each sampling
//! point; in that variable the dynamics are linear and every constraint is
//! conic. The one non-convexity, the travel-time term `1/√w`, is relaxed
//! to the epigraph `t_i ≥ 1/√w_i`, and the whole point of the crate is
//! tracking when that relaxation is tight.
//!
//! Module map:
//!
//! * [`model`] — vehicle parameters, path profiles, instance validation;
//! * [`dynamics`] — forward simulation, objective pricing, feasibility
//!   checks and a brute-force oracle for tiny instances;
//! * [`formulation`] — the cone program layout, its construction and the
//!   extraction of solutions back into physical variables;
//! * [`exactness`] — the certification machinery;
//! * [`scenarios`] — ready-made instances: presets, a relaxation-gap
//!   counterexample, a benchmark road and random test instances;
//! * [`experiments`] — Pareto sweeps, runtime scaling and batch runs;
//! * [`io`] — JSON/CSV serialization of instances, plans and reports.
//!
//! The numeric kernel is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, which is what the command-line
//! tool and the experiment drivers use.

pub mod dynamics;
pub mod exactness;
pub mod experiments;
pub mod formulation;
pub mod io;
pub mod model;
pub mod scenarios;

pub use conic::{Scalar, SolverConfig};

/// Vehicle description in `f64`.
pub type Vehicle = model::VehicleParams<f64>;
/// Discretized path in `f64`.
pub type Path = model::PathProfile<f64>;
/// Full problem instance in `f64`.
pub type Instance = model::ProblemInstance<f64>;
/// Recovered speed plan in `f64`.
pub type Plan = model::SpeedSolution<f64>;

/// Everything that can go wrong between reading an instance and writing a
/// plan.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A physical parameter or profile fails validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// The solver finished without a usable point (infeasible, unbounded
    /// or numerically wedged).
    #[error("no solution: {0}")]
    NoSolution(String),
    /// A squared speed hit zero (or below) where the objective or the
    /// posterior gap needs `1/√w`.
    #[error("nonpositive squared speed at sampling point {index}")]
    SingularSpeed { index: usize },
    /// An input file does not follow the documented format.
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error(transparent)]
    Conic(#[from] conic::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
