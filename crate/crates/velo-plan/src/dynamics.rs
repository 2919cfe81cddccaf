//! Forward simulation and objective evaluation, independent of the
//! optimizer.
//!
//! These routines integrate the same discretized dynamics the optimizer
//! imposes as constraints, so for an exact solution the two must agree to
//! rounding error. They serve as the cross-check oracle: optimizer output is
//! re-simulated and re-priced here before it is trusted.

use crate::model::{ProblemInstance, SpeedSolution, SolveStatus, PathProfile, VehicleParams};
use crate::{Error, Scalar};

/// Result of integrating the dynamics forward from `w_init` under a given
/// force profile. Negative squared speeds are physically meaningless but
/// deliberately *not* clipped — clamping would hide infeasibility — so the
/// first offending index is flagged instead.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSpeeds<F> {
    /// Squared speed at every grid point; length `n`.
    pub w: Vec<F>,
    /// First index at which `w` is negative, if any.
    pub first_negative: Option<usize>,
}

/// Integrates `w_{i+1} = w_i + (h/M)(−Γ w_i + F_i − M g sin α_i − M g c)`
/// one step per entry of `force` (in N).
pub fn forward_simulate<F: Scalar>(
    w_init: F,
    force: &[F],
    path: &PathProfile<F>,
    vehicle: &VehicleParams<F>,
) -> Result<SimulatedSpeeds<F>, Error> {
    if force.len() != path.slope_sin.len() {
        return Err(Error::InvalidParameter(format!(
            "force profile has {} steps but the path has {}",
            force.len(),
            path.slope_sin.len()
        )));
    }
    if !(w_init > F::zero()) {
        return Err(Error::InvalidParameter(format!(
            "w_init must be > 0, got {w_init}"
        )));
    }
    let h_over_m = path.step / vehicle.mass;
    let mg = vehicle.mass * vehicle.gravity;
    let mut w = Vec::with_capacity(force.len() + 1);
    w.push(w_init);
    let mut first_negative = None;
    for (i, &f) in force.iter().enumerate() {
        let prev = w[i];
        let accel = -vehicle.drag_coeff * prev + f
            - mg * path.slope_sin[i]
            - mg * vehicle.rolling_coeff;
        let next = prev + h_over_m * accel;
        if next < F::zero() && first_negative.is_none() {
            first_negative = Some(i + 1);
        }
        w.push(next);
    }
    Ok(SimulatedSpeeds { w, first_negative })
}

/// The objective of a speed plan, split into its physical parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveBreakdown<F> {
    /// `Σ_i h / √w_i` over the steps, in s.
    pub travel_time: F,
    /// `Σ_i h · max{η F_i, F_i}`, in J; negative means net recovery.
    pub energy: F,
    /// `λ · energy + travel_time`.
    pub weighted: F,
    /// `F_i √w_i` per step, in W; the quantity the power cap bounds.
    pub per_step_power: Vec<F>,
}

/// Prices a `(w, F)` pair: travel time, consumed energy, their `λ`-weighted
/// sum, and the per-step power draw.
pub fn evaluate_objective<F: Scalar>(
    w: &[F],
    force: &[F],
    instance: &ProblemInstance<F>,
) -> Result<ObjectiveBreakdown<F>, Error> {
    let n = instance.points();
    if w.len() != n || force.len() + 1 != n {
        return Err(Error::InvalidParameter(format!(
            "expected {n} speeds and {} forces, got {} and {}",
            n - 1,
            w.len(),
            force.len()
        )));
    }
    let h = instance.path.step;
    let eta = instance.vehicle.regen_fraction;
    let mut travel_time = F::zero();
    let mut energy = F::zero();
    let mut per_step_power = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        if !(w[i] > F::zero()) {
            return Err(Error::SingularSpeed { index: i });
        }
        travel_time += h / w[i].sqrt();
        energy += h * (eta * force[i]).max(force[i]);
        per_step_power.push(force[i] * w[i].sqrt());
    }
    Ok(ObjectiveBreakdown {
        travel_time,
        energy,
        weighted: instance.lambda * energy + travel_time,
        per_step_power,
    })
}

/// Worst violation per constraint family of the non-convex problem,
/// with the convention that a positive value means "violated by this much"
/// (equality families report the absolute residual).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport<F> {
    /// `max_i max{w_i − w_max_i, −w_i}` in m²/s².
    pub speed_bounds: F,
    /// `max_i |F_i| − M g μ` in N.
    pub traction: F,
    /// `max_i F_i √w_i − P_max` in W (evaluated where `w_i ≥ 0`).
    pub power: F,
    /// `max_i |`dynamics residual`|` in N.
    pub dynamics: F,
    /// `|w_1 − w_init|` in m²/s².
    pub initial_speed: F,
    /// True when every family is within its supplied tolerance.
    pub feasible: bool,
}

/// Per-family absolute tolerances for [`feasibility_check`], in the same
/// units as the corresponding [`FeasibilityReport`] fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityTolerances<F> {
    pub speed_bounds: F,
    pub traction: F,
    pub power: F,
    pub dynamics: F,
    pub initial_speed: F,
}

impl<F: Scalar> FeasibilityTolerances<F> {
    /// The same absolute tolerance for every family.
    pub fn uniform(tol: F) -> Self {
        FeasibilityTolerances {
            speed_bounds: tol,
            traction: tol,
            power: tol,
            dynamics: tol,
            initial_speed: tol,
        }
    }
}

/// Evaluates every constraint of the non-convex problem at a `(w, F)` pair.
pub fn feasibility_check<F: Scalar>(
    w: &[F],
    force: &[F],
    instance: &ProblemInstance<F>,
    tolerances: &FeasibilityTolerances<F>,
) -> Result<FeasibilityReport<F>, Error> {
    let n = instance.points();
    if w.len() != n || force.len() + 1 != n {
        return Err(Error::InvalidParameter(format!(
            "expected {n} speeds and {} forces, got {} and {}",
            n - 1,
            w.len(),
            force.len()
        )));
    }
    let vehicle = &instance.vehicle;
    let h = instance.path.step;
    let mg = vehicle.mass * vehicle.gravity;
    let force_cap = mg * vehicle.friction;

    let mut speed_bounds = F::neg_infinity();
    for i in 0..n {
        speed_bounds = speed_bounds
            .max(w[i] - instance.path.w_max[i])
            .max(-w[i]);
    }
    let mut traction = F::neg_infinity();
    let mut power = F::neg_infinity();
    let mut dynamics = F::zero();
    for i in 0..n - 1 {
        traction = traction.max(force[i].abs() - force_cap);
        // √w is undefined for negative w; those indices already show up in
        // the speed-bounds family, so the power family skips them.
        if w[i] >= F::zero() {
            power = power.max(force[i] * w[i].sqrt() - vehicle.max_power);
        }
        let residual = vehicle.mass / h * (w[i + 1] - w[i]) + vehicle.drag_coeff * w[i]
            - force[i]
            + mg * instance.path.slope_sin[i]
            + mg * vehicle.rolling_coeff;
        dynamics = dynamics.max(residual.abs());
    }
    let initial_speed = (w[0] - instance.w_init).abs();

    let feasible = speed_bounds <= tolerances.speed_bounds
        && traction <= tolerances.traction
        && power <= tolerances.power
        && dynamics <= tolerances.dynamics
        && initial_speed <= tolerances.initial_speed;
    Ok(FeasibilityReport {
        speed_bounds,
        traction,
        power,
        dynamics,
        initial_speed,
        feasible,
    })
}

/// Exhaustive grid search over force profiles for tiny instances; the
/// independent optimum oracle. Forces are drawn per step from
/// `force_grid_size` evenly spaced values in `[−Mgμ, Mgμ]`; the best
/// feasible profile wins, with ties broken toward the lexicographically
/// smallest force vector (the enumeration order guarantees that).
///
/// Returns `None` when no grid point is feasible.
pub fn brute_force_small<F: Scalar>(
    instance: &ProblemInstance<F>,
    force_grid_size: usize,
) -> Result<Option<SpeedSolution<F>>, Error> {
    let n = instance.points();
    if n > 5 {
        return Err(Error::InvalidParameter(format!(
            "grid search is exponential in the step count; {n} points exceed the cap of 5"
        )));
    }
    if force_grid_size < 2 || force_grid_size > 101 {
        return Err(Error::InvalidParameter(format!(
            "force_grid_size must lie in [2, 101], got {force_grid_size}"
        )));
    }
    let report = crate::model::validate_instance(instance);
    if !report.is_valid() {
        return Err(Error::InvalidParameter(report.to_string()));
    }

    let vehicle = &instance.vehicle;
    let cap = vehicle.mass * vehicle.gravity * vehicle.friction;
    let grid: Vec<F> = (0..force_grid_size)
        .map(|k| {
            let frac = F::cast(k) / F::cast(force_grid_size - 1);
            -cap + F::two() * cap * frac
        })
        .collect();

    let steps = n - 1;
    let h_over_m = instance.path.step / vehicle.mass;
    let mg = vehicle.mass * vehicle.gravity;

    // Depth-first over the force grid, pruning any prefix whose simulated
    // speed already breaks a bound: every extension inherits the violation
    // because w_{i+1} depends only on the prefix.
    let mut force = vec![F::zero(); steps];
    let mut w = vec![F::zero(); n];
    w[0] = instance.w_init;
    let mut best: Option<(F, Vec<F>, Vec<F>)> = None;

    fn descend<F: Scalar>(
        depth: usize,
        steps: usize,
        grid: &[F],
        instance: &ProblemInstance<F>,
        h_over_m: F,
        mg: F,
        force: &mut [F],
        w: &mut [F],
        best: &mut Option<(F, Vec<F>, Vec<F>)>,
    ) {
        if depth == steps {
            let breakdown =
                evaluate_objective(w, force, instance).expect("positive speeds were enforced");
            let better = match best {
                Some((value, _, _)) => breakdown.weighted < *value,
                None => true,
            };
            if better {
                *best = Some((breakdown.weighted, w.to_vec(), force.to_vec()));
            }
            return;
        }
        let here = w[depth];
        // The travel-time term needs w > 0 on every step start, and the
        // power cap applies at the step's starting speed.
        if !(here > F::zero()) {
            return;
        }
        let power_cap = instance.vehicle.max_power / here.sqrt();
        let drift = -instance.vehicle.drag_coeff * here
            - mg * instance.path.slope_sin[depth]
            - mg * instance.vehicle.rolling_coeff;
        for &f in grid {
            if f > power_cap {
                break; // grid is ascending; everything after is too strong
            }
            let next = here + h_over_m * (drift + f);
            let fine_next = if depth + 1 == steps {
                next >= F::zero() // final point never enters 1/√w
            } else {
                next > F::zero()
            };
            if !fine_next || next > instance.path.w_max[depth + 1] {
                continue;
            }
            force[depth] = f;
            w[depth + 1] = next;
            descend(
                depth + 1,
                steps,
                grid,
                instance,
                h_over_m,
                mg,
                force,
                w,
                best,
            );
        }
    }

    if instance.w_init <= instance.path.w_max[0] {
        descend(
            0, steps, &grid, instance, h_over_m, mg, &mut force, &mut w, &mut best,
        );
    }

    Ok(best.map(|(_, w, force)| {
        let breakdown = evaluate_objective(&w, &force, instance).expect("stored point is valid");
        let t = w[..steps].iter().map(|&wi| wi.sqrt().recip()).collect();
        SpeedSolution {
            w,
            force,
            t,
            energy: breakdown.energy,
            time: breakdown.travel_time,
            weighted_objective: breakdown.weighted,
            exactness_gap: F::zero(),
            solver_status: SolveStatus::Optimal,
        }
    }))
}
