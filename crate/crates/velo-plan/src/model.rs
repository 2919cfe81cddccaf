//! Physical quantities, units, and instance validation.
//!
//! Everything downstream (formulation, dynamics, exactness checks) reads its
//! numbers from the types in this module. All quantities are SI: kilograms,
//! watts, metres, seconds; speeds are carried as *squared* speed `w = v²`
//! in m²/s², which is what makes the longitudinal dynamics linear.

use crate::{Error, Scalar};

/// Standard gravity in m/s², fixed for the whole crate.
pub const GRAVITY: f64 = 9.81;

/// Longitudinal parameters of one vehicle.
///
/// `normalized_drag` is the drag coefficient divided by the mass (1/m); it is
/// stored redundantly because both forms appear in the dynamics and in the
/// exactness conditions, and [`validate`](VehicleParams::validate) cross-checks
/// them against each other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams<F> {
    /// Mass `M` in kg.
    pub mass: F,
    /// Maximum engine power `P_max` in W.
    pub max_power: F,
    /// Fraction of braking energy recovered, dimensionless in `[0, 1]`;
    /// zero for a thermal engine.
    pub regen_fraction: F,
    /// Rolling-resistance coefficient `c`, dimensionless.
    pub rolling_coeff: F,
    /// Aerodynamic drag coefficient `Γ` in kg/m.
    pub drag_coeff: F,
    /// `γ = Γ / M` in 1/m.
    pub normalized_drag: F,
    /// Tire/road static friction coefficient `μ`, dimensionless.
    pub friction: F,
    /// Gravitational acceleration in m/s².
    pub gravity: F,
}

impl<F: Scalar> VehicleParams<F> {
    /// Builds a parameter set, deriving `normalized_drag = drag_coeff / mass`
    /// and fixing gravity at [`GRAVITY`].
    pub fn new(
        mass: F,
        max_power: F,
        regen_fraction: F,
        rolling_coeff: F,
        drag_coeff: F,
        friction: F,
    ) -> Self {
        VehicleParams {
            mass,
            max_power,
            regen_fraction,
            rolling_coeff,
            drag_coeff,
            normalized_drag: drag_coeff / mass,
            friction,
            gravity: F::cast(GRAVITY),
        }
    }

    /// Fiat 500 (thermal engine, mass with a full tank): M = 967 kg,
    /// P_max = 50 750 W, η = 0, c = 0.007, Γ = 0.406 kg/m, μ = 0.7.
    pub fn fiat500() -> Self {
        Self::new(
            F::cast(967.0),
            F::cast(50_750.0),
            F::zero(),
            F::cast(0.007),
            F::cast(0.406),
            F::cast(0.7),
        )
    }

    /// Fiat 500e (full electric): M = 1365 kg, P_max = 87 000 W, η = 0.7,
    /// c = 0.007, Γ = 0.399 kg/m, μ = 0.7.
    pub fn fiat500e() -> Self {
        Self::new(
            F::cast(1365.0),
            F::cast(87_000.0),
            F::cast(0.7),
            F::cast(0.007),
            F::cast(0.399),
            F::cast(0.7),
        )
    }

    /// Appends every violated invariant to `out`.
    pub fn validate(&self, out: &mut Vec<String>) {
        let zero = F::zero();
        if !(self.mass > zero) {
            out.push("vehicle: mass must be > 0".into());
        }
        if !(self.max_power > zero) {
            out.push("vehicle: max_power must be > 0".into());
        }
        if !(self.regen_fraction >= zero && self.regen_fraction <= F::one()) {
            out.push("vehicle: regen_fraction must lie in [0, 1]".into());
        }
        if !(self.rolling_coeff >= zero) {
            out.push("vehicle: rolling_coeff must be >= 0".into());
        }
        if !(self.drag_coeff >= zero) {
            out.push("vehicle: drag_coeff must be >= 0".into());
        }
        if !(self.friction > zero) {
            out.push("vehicle: friction must be > 0".into());
        }
        // γ and Γ/M describe the same physics; a mismatch means the caller
        // edited one field and forgot the other.
        if self.mass > zero {
            let derived = self.drag_coeff / self.mass;
            let tol = F::cast(1e-12) * self.normalized_drag.abs();
            if !((self.normalized_drag - derived).abs() <= tol) {
                out.push("vehicle: normalized_drag must equal drag_coeff / mass".into());
            }
        }
    }
}

/// Geometry of the path: a uniform grid of `n` points spaced `step` metres
/// apart along the arc, the sine of the slope angle on each of the `n − 1`
/// steps, and the maximum admissible squared speed at each point.
#[derive(Debug, Clone, PartialEq)]
pub struct PathProfile<F> {
    /// Arc-length step `h` in m.
    pub step: F,
    /// `sin α_i` per step, dimensionless in `[−1, 1]`; length `n − 1`.
    pub slope_sin: Vec<F>,
    /// Squared-speed cap per grid point in m²/s²; length `n`.
    pub w_max: Vec<F>,
}

impl<F: Scalar> PathProfile<F> {
    /// Number of grid points `n`.
    pub fn points(&self) -> usize {
        self.w_max.len()
    }

    /// Appends every violated invariant to `out`.
    pub fn validate(&self, out: &mut Vec<String>) {
        if !(self.step > F::zero()) {
            out.push("path: step must be > 0".into());
        }
        let n = self.points();
        if n < 2 {
            out.push("path: need at least 2 grid points".into());
        }
        if self.slope_sin.len() + 1 != n {
            out.push(format!(
                "path: slope_sin has {} entries, expected n − 1 = {}",
                self.slope_sin.len(),
                n.saturating_sub(1)
            ));
        }
        for (i, &s) in self.slope_sin.iter().enumerate() {
            if !(s >= -F::one() && s <= F::one()) {
                out.push(format!("path: slope_sin[{i}] = {s} outside [−1, 1]"));
            }
        }
        for (i, &w) in self.w_max.iter().enumerate() {
            if !(w > F::zero()) {
                out.push(format!("path: w_max[{i}] = {w} must be > 0"));
            }
        }
    }
}

/// One fully specified planning problem: vehicle, path, the time/energy
/// trade-off weight `λ` (s/J), and the imposed initial squared speed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance<F> {
    pub vehicle: VehicleParams<F>,
    pub path: PathProfile<F>,
    /// Weight on energy in the scalarized objective, s/J; zero means pure
    /// minimum time.
    pub lambda: F,
    /// Squared speed imposed at the first grid point, m²/s². Must be
    /// strictly positive: the travel-time term `1/√w` is singular at zero.
    pub w_init: F,
}

impl<F: Scalar> ProblemInstance<F> {
    /// Number of grid points `n`.
    pub fn points(&self) -> usize {
        self.path.points()
    }
}

/// Outcome of [`validate_instance`]: every violated invariant, spelled out.
/// An empty report means the instance is usable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            write!(f, "valid")
        } else {
            write!(f, "{}", self.violations.join("; "))
        }
    }
}

/// Checks every type invariant of the instance and reports all violations
/// at once rather than failing on the first.
pub fn validate_instance<F: Scalar>(instance: &ProblemInstance<F>) -> ValidationReport {
    let mut out = Vec::new();
    instance.vehicle.validate(&mut out);
    instance.path.validate(&mut out);
    if !(instance.lambda >= F::zero()) {
        out.push("instance: lambda must be >= 0".into());
    }
    if !(instance.w_init > F::zero()) {
        out.push("instance: w_init must be > 0".into());
    }
    if let Some(&cap) = instance.path.w_max.first() {
        if instance.w_init > cap {
            out.push(format!(
                "instance: w_init = {} exceeds w_max at the first point ({cap})",
                instance.w_init
            ));
        }
    }
    ValidationReport { violations: out }
}

/// The squared speed at which the force cap `gμ` and the power cap
/// `P_max/(M√w)` coincide: `w̄ = (P_max / (M g μ))²`.
///
/// Above `w̄` the power bound is the binding one. `mu_override` substitutes
/// the friction coefficient without touching the vehicle (the same car is
/// analysed on dry and wet asphalt in different experiments).
pub fn critical_speed<F: Scalar>(
    vehicle: &VehicleParams<F>,
    mu_override: Option<F>,
) -> Result<F, Error> {
    let mu = mu_override.unwrap_or(vehicle.friction);
    if !(mu > F::zero()) {
        return Err(Error::InvalidParameter(format!(
            "critical speed needs a positive friction coefficient, got {mu}"
        )));
    }
    let ratio = vehicle.max_power / (vehicle.mass * vehicle.gravity * mu);
    Ok(ratio * ratio)
}

/// Converts a speed in km/h to squared speed in m²/s².
pub fn squared_speed_from_kmh<F: Scalar>(kmh: F) -> Result<F, Error> {
    if kmh < F::zero() {
        return Err(Error::InvalidParameter(format!(
            "speed must be nonnegative, got {kmh} km/h"
        )));
    }
    let ms = kmh / F::cast(3.6);
    Ok(ms * ms)
}

/// Converts a squared speed in m²/s² to km/h.
pub fn kmh_from_squared_speed<F: Scalar>(w: F) -> Result<F, Error> {
    if w < F::zero() {
        return Err(Error::InvalidParameter(format!(
            "squared speed must be nonnegative, got {w}"
        )));
    }
    Ok(F::cast(3.6) * w.sqrt())
}

/// How a planning run ended, as seen by callers of this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SolveStatus {
    /// The relaxation was solved to the configured tolerances.
    Optimal,
    /// The relaxation itself is infeasible (a certificate was found).
    Infeasible,
    /// Iteration cap reached; the returned point is the best iterate.
    MaxIter,
    /// The solver broke down numerically.
    NumericalFailure,
}

impl From<conic::Status> for SolveStatus {
    fn from(status: conic::Status) -> Self {
        match status {
            conic::Status::Optimal => SolveStatus::Optimal,
            conic::Status::Infeasible => SolveStatus::Infeasible,
            conic::Status::MaxIter => SolveStatus::MaxIter,
            // The planning objective is bounded below on every valid
            // instance (t ≥ 0 and e ≥ f ≥ −gμ), so an unboundedness
            // certificate can only mean the numerics went wrong.
            conic::Status::Unbounded | conic::Status::NumericalFailure => {
                SolveStatus::NumericalFailure
            }
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::MaxIter => "max-iter",
            SolveStatus::NumericalFailure => "numerical-failure",
        };
        write!(f, "{name}")
    }
}

/// A speed plan in the original, non-convex variables: squared speeds at
/// the grid points, traction/braking force on each step, and the objective
/// split into its two physical parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedSolution<F> {
    /// Squared speed per grid point, m²/s²; length `n`.
    pub w: Vec<F>,
    /// Force per step in N; length `n − 1`. Positive is traction,
    /// negative is braking.
    pub force: Vec<F>,
    /// Time spent per metre on each step, s/m; length `n − 1`.
    pub t: Vec<F>,
    /// Consumed energy in J (negative means net recovery).
    pub energy: F,
    /// Travel time in s.
    pub time: F,
    /// `λ · energy + time`.
    pub weighted_objective: F,
    /// Worst deviation `max_i |t_i − 1/√w_i|` of the relaxation this plan
    /// was recovered from, s/m.
    pub exactness_gap: F,
    pub solver_status: SolveStatus,
}
