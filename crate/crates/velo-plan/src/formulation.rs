//! Translation of a [`ProblemInstance`] into a standard-form conic program
//! and back.
//!
//! The non-convex travel-time term `1/√w` is handled by an auxiliary
//! per-step time variable `t_i` that is only *lower-bounded*: `t_i ≥ 1/√w_i`
//! splits into the hyperbolic constraints `1 ≤ z_i y_i`, `y_i² ≤ t_i`,
//! `z_i² ≤ t_i w_i`, each of which embeds into a three-dimensional
//! second-order cone. The energy term `max{η F_i, F_i}` gets an epigraph
//! variable `e_i` with two linear inequalities. Everything else is linear
//! in the squared speed `w` and the per-mass force `f = F/M`.
//!
//! Variables are stacked `[w, f, t, e, y, z]` with `w` of length `n` and
//! the rest of length `n − 1`, so the program has `n + 5(n − 1)` columns.

use std::ops::Range;
use std::time::Instant;

use conic::{Cone, ConeSet, CscMatrix, Problem};

use crate::model::{validate_instance, ProblemInstance, SolveStatus};
use crate::{Error, Scalar};

/// Where each physical block lives in the stacked variable vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarMap {
    /// Squared speed per grid point, m²/s²; `n` columns.
    pub w: Range<usize>,
    /// Per-mass force `F/M` per step, N/kg; `n − 1` columns.
    pub f: Range<usize>,
    /// Time per metre on each step, s/m; `n − 1` columns.
    pub t: Range<usize>,
    /// Epigraph of `max{η f, f}` per step; `n − 1` columns.
    pub e: Range<usize>,
    /// Auxiliary cone variables for the `t ≥ 1/√w` decomposition.
    pub y: Range<usize>,
    pub z: Range<usize>,
}

impl VarMap {
    fn new(n: usize) -> Self {
        let steps = n - 1;
        let mut cursor = 0;
        let mut take = |len: usize| {
            let range = cursor..cursor + len;
            cursor += len;
            range
        };
        VarMap {
            w: take(n),
            f: take(steps),
            t: take(steps),
            e: take(steps),
            y: take(steps),
            z: take(steps),
        }
    }

    /// Total number of columns.
    pub fn len(&self) -> usize {
        self.z.end
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row ranges of the inequality block, one range per constraint family,
/// in the order the rows are emitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowLayout {
    /// `−w_i ≤ 0` per point.
    pub speed_floor: Range<usize>,
    /// `w_i ≤ w_max_i` per point.
    pub speed_cap: Range<usize>,
    /// `f_i ≤ gμ` per step.
    pub traction_upper: Range<usize>,
    /// `−f_i ≤ gμ` per step.
    pub traction_lower: Range<usize>,
    /// `(M/P_max) f_i − t_i ≤ 0` per step: the power cap in epigraph form.
    pub power_epigraph: Range<usize>,
    /// `η f_i − e_i ≤ 0` per step.
    pub regen_epigraph: Range<usize>,
    /// `f_i − e_i ≤ 0` per step.
    pub drive_epigraph: Range<usize>,
    /// `−y_i ≤ 0`, `−z_i ≤ 0`: implied by the cones, stated explicitly to
    /// keep the scaling point well inside the orthant.
    pub y_floor: Range<usize>,
    pub z_floor: Range<usize>,
    /// The 9 second-order-cone rows per step (three 3-dim cones).
    pub soc: Range<usize>,
}

/// A built conic program plus the maps back to physical quantities and a
/// copy of the instance it encodes, so solutions can be interpreted without
/// carrying extra state around.
#[derive(Debug, Clone)]
pub struct ConicProgram<F> {
    pub problem: Problem<F>,
    pub vars: VarMap,
    pub rows: RowLayout,
    pub instance: ProblemInstance<F>,
}

/// One operand of a hyperbolic constraint: a program column or a constant.
#[derive(Debug, Clone, Copy)]
pub enum Operand<F> {
    Column(usize),
    Constant(F),
}

/// Emits the three second-order-cone rows enforcing `a² ≤ b·c` via
/// `‖[2a; b − c]‖ ≤ b + c`, appending to the triplet list and the
/// right-hand side. `b` and `c` must be nonnegative for the equivalence
/// to hold; the caller owns those bounds.
pub fn hyperbolic_to_soc<F: Scalar>(
    a: Operand<F>,
    b: Operand<F>,
    c: Operand<F>,
    triplets: &mut Vec<(usize, usize, F)>,
    rhs: &mut Vec<F>,
) {
    // Slack rows are s = h − Gx, so a variable contributing +v to the slack
    // is a −v entry in G and a constant contributes to h directly.
    let mut emit = |terms: &[(Operand<F>, F)]| {
        let row = rhs.len();
        let mut h = F::zero();
        for &(operand, weight) in terms {
            match operand {
                Operand::Column(j) => triplets.push((row, j, -weight)),
                Operand::Constant(v) => h += weight * v,
            }
        }
        rhs.push(h);
    };
    let one = F::one();
    emit(&[(b, one), (c, one)]); // s₀ = b + c
    emit(&[(a, F::two())]); // s₁ = 2a
    emit(&[(b, one), (c, -one)]); // s₂ = b − c
}

/// Scale factor between the program's energy columns and physical
/// per-mass energy: the program stores ê_i = λ M e_i whenever the energy
/// term is priced at all, so that every priced column carries the same
/// objective weight (see [`build_relaxation`]).
pub fn energy_unit_scale<F: Scalar>(instance: &ProblemInstance<F>) -> F {
    if instance.lambda > F::zero() {
        instance.lambda * instance.vehicle.mass
    } else {
        F::one()
    }
}

/// Builds the convex relaxation of `instance` in standard conic form.
pub fn build_relaxation<F: Scalar>(instance: &ProblemInstance<F>) -> Result<ConicProgram<F>, Error> {
    let report = validate_instance(instance);
    if !report.is_valid() {
        return Err(Error::InvalidParameter(format!(
            "instance fails validation: {report}"
        )));
    }

    let n = instance.points();
    let steps = n - 1;
    let vehicle = &instance.vehicle;
    let path = &instance.path;
    let step = path.step;
    let g = vehicle.gravity;
    let gamma = vehicle.normalized_drag;
    let force_cap = g * vehicle.friction;
    let vars = VarMap::new(n);

    // Objective: Σ_i h (λ M e_i + t_i). Only t and e columns are priced.
    //
    // The energy columns are stored in pre-priced units ê_i = λ M e_i, so
    // their objective weight matches the time columns' for every λ > 0.
    // Priced in natural units, a small trade-off weight leaves the energy
    // rows' duals up to seven orders of magnitude below everything else,
    // and that near-degenerate block is what drags the interior-point
    // endgame into a numerically singular scaled system. In ê units the
    // weight spread moves into the rows' f-coefficients, where it is a
    // benign small entry instead of a vanishing dual.
    let e_scale = energy_unit_scale(instance);
    let mut cost = vec![F::zero(); vars.len()];
    let energy_weight = step * instance.lambda * vehicle.mass / e_scale;
    for i in 0..steps {
        cost[vars.t.start + i] = step;
        cost[vars.e.start + i] = energy_weight;
    }

    // Equalities: the imposed start plus one dynamics row per step,
    //   f_i = (1/h)(w_{i+1} − w_i) + γ w_i + g (sin α_i + c).
    let mut eq = Vec::with_capacity(1 + 3 * steps);
    let mut b = Vec::with_capacity(n);
    eq.push((0, vars.w.start, F::one()));
    b.push(instance.w_init);
    let inv_h = step.recip();
    for i in 0..steps {
        let row = 1 + i;
        eq.push((row, vars.f.start + i, F::one()));
        eq.push((row, vars.w.start + i + 1, -inv_h));
        eq.push((row, vars.w.start + i, inv_h - gamma));
        b.push(g * (path.slope_sin[i] + vehicle.rolling_coeff));
    }

    // Inequalities, orthant families first. Row ranges are recorded as the
    // rows are emitted so the layout can never drift from the data.
    let mut g_rows = Vec::with_capacity(2 * n + 22 * steps);
    let mut h = Vec::with_capacity(2 * n + 16 * steps);
    let family = |start: usize, len: usize| start..start + len;

    let speed_floor = family(h.len(), n);
    for i in 0..n {
        g_rows.push((h.len(), vars.w.start + i, -F::one()));
        h.push(F::zero());
    }
    let speed_cap = family(h.len(), n);
    for i in 0..n {
        g_rows.push((h.len(), vars.w.start + i, F::one()));
        h.push(path.w_max[i]);
    }
    let traction_upper = family(h.len(), steps);
    for i in 0..steps {
        g_rows.push((h.len(), vars.f.start + i, F::one()));
        h.push(force_cap);
    }
    let traction_lower = family(h.len(), steps);
    for i in 0..steps {
        g_rows.push((h.len(), vars.f.start + i, -F::one()));
        h.push(force_cap);
    }
    let power_epigraph = family(h.len(), steps);
    let mass_over_power = vehicle.mass / vehicle.max_power;
    for i in 0..steps {
        g_rows.push((h.len(), vars.f.start + i, mass_over_power));
        g_rows.push((h.len(), vars.t.start + i, -F::one()));
        h.push(F::zero());
    }
    // Epigraph rows in ê units: λ M η f_i ≤ ê_i and λ M f_i ≤ ê_i.
    let regen_epigraph = family(h.len(), steps);
    for i in 0..steps {
        // η = 0 (thermal engine) leaves ê_i ≥ 0; skip the zero entry.
        if vehicle.regen_fraction != F::zero() {
            g_rows.push((h.len(), vars.f.start + i, e_scale * vehicle.regen_fraction));
        }
        g_rows.push((h.len(), vars.e.start + i, -F::one()));
        h.push(F::zero());
    }
    let drive_epigraph = family(h.len(), steps);
    for i in 0..steps {
        g_rows.push((h.len(), vars.f.start + i, e_scale));
        g_rows.push((h.len(), vars.e.start + i, -F::one()));
        h.push(F::zero());
    }
    let y_floor = family(h.len(), steps);
    for i in 0..steps {
        g_rows.push((h.len(), vars.y.start + i, -F::one()));
        h.push(F::zero());
    }
    let z_floor = family(h.len(), steps);
    for i in 0..steps {
        g_rows.push((h.len(), vars.z.start + i, -F::one()));
        h.push(F::zero());
    }
    let orthant_rows = h.len();

    let soc = family(h.len(), 9 * steps);
    let mut cones = Vec::with_capacity(1 + 3 * steps);
    cones.push(Cone::NonnegativeOrthant(orthant_rows));
    for i in 0..steps {
        let (w_i, t_i) = (vars.w.start + i, vars.t.start + i);
        let (y_i, z_i) = (vars.y.start + i, vars.z.start + i);
        // 1 ≤ z_i y_i, y_i² ≤ t_i, z_i² ≤ t_i w_i.
        hyperbolic_to_soc(
            Operand::Constant(F::one()),
            Operand::Column(z_i),
            Operand::Column(y_i),
            &mut g_rows,
            &mut h,
        );
        hyperbolic_to_soc(
            Operand::Column(y_i),
            Operand::Column(t_i),
            Operand::Constant(F::one()),
            &mut g_rows,
            &mut h,
        );
        hyperbolic_to_soc(
            Operand::Column(z_i),
            Operand::Column(t_i),
            Operand::Column(w_i),
            &mut g_rows,
            &mut h,
        );
        for _ in 0..3 {
            cones.push(Cone::SecondOrderCone(3));
        }
    }

    let problem = Problem {
        c: cost,
        a: CscMatrix::from_triplets(n, vars.len(), &eq)?,
        b,
        g: CscMatrix::from_triplets(h.len(), vars.len(), &g_rows)?,
        h,
        cones,
    };
    Ok(ConicProgram {
        problem,
        vars,
        rows: RowLayout {
            speed_floor,
            speed_cap,
            traction_upper,
            traction_lower,
            power_epigraph,
            regen_epigraph,
            drive_epigraph,
            y_floor,
            z_floor,
            soc,
        },
        instance: instance.clone(),
    })
}

/// Worst residual per physical constraint family at an extracted point,
/// positive meaning "violated by this much"; equality families report the
/// absolute residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationResiduals<F> {
    /// Dynamics equality, N/kg.
    pub dynamics: F,
    /// `|w_1 − w_init|`, m²/s².
    pub initial_speed: F,
    /// Speed-window violation `max{−w_i, w_i − w_max_i}`, m²/s².
    pub speed_bounds: F,
    /// `|f_i| − gμ`, N/kg.
    pub traction: F,
    /// `(M/P_max) f_i − t_i`, s/m.
    pub power_epigraph: F,
    /// `max{η f_i − e_i, f_i − e_i}`, N/kg.
    pub energy_epigraph: F,
    /// One-sided violation `1/√w_i − t_i` of the relaxed time bound, s/m
    /// (slack in the other direction is the exactness gap, not a violation).
    pub relaxed_time: F,
    /// Relative complementarity gap reported by the conic solve.
    pub duality_gap: F,
}

/// A relaxation solution mapped back to physical quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedSolution<F> {
    /// Squared speed per point, m²/s².
    pub w: Vec<F>,
    /// Per-mass force per step, N/kg (multiply by the mass for newtons).
    pub f: Vec<F>,
    /// Time per metre per step, s/m.
    pub t: Vec<F>,
    /// Energy epigraph value per step, N/kg.
    pub e: Vec<F>,
    /// Cone auxiliaries, kept for diagnostics.
    pub y: Vec<F>,
    pub z: Vec<F>,
    /// Equality and cone duals as returned by the solver.
    pub dual_eq: Vec<F>,
    pub dual_cone: Vec<F>,
    /// Objective value `Σ h (λ M e_i + t_i)` at the point.
    pub objective: F,
    pub residuals: RelaxationResiduals<F>,
}

/// Slices a raw conic solution back into physical blocks and re-evaluates
/// every constraint family of the relaxation in original units.
pub fn extract_solution<F: Scalar>(
    program: &ConicProgram<F>,
    raw: &conic::Solution<F>,
) -> Result<ExtractedSolution<F>, Error> {
    match raw.status {
        // All three stop with the best iterate found; infeasible and
        // unbounded runs instead return certificate rays, which do not
        // map back to physical variables.
        conic::Status::Optimal | conic::Status::MaxIter | conic::Status::NumericalFailure => {}
        other => {
            return Err(Error::NoSolution(format!(
                "solver finished with status {other:?}; there is no point to extract"
            )));
        }
    }
    if raw.primal.len() != program.vars.len() {
        return Err(Error::InvalidParameter(format!(
            "primal vector has {} entries, program has {} columns",
            raw.primal.len(),
            program.vars.len()
        )));
    }
    let slice = |r: &Range<usize>| raw.primal[r.clone()].to_vec();
    let vars = &program.vars;
    let (w, f, t) = (slice(&vars.w), slice(&vars.f), slice(&vars.t));
    let (y, z) = (slice(&vars.y), slice(&vars.z));
    // The program prices energy in ê = λ M e units; report physical e.
    let e_scale = energy_unit_scale(&program.instance);
    let e: Vec<F> = raw.primal[vars.e.clone()]
        .iter()
        .map(|&v| v / e_scale)
        .collect();

    let instance = &program.instance;
    let vehicle = &instance.vehicle;
    let path = &instance.path;
    let g = vehicle.gravity;
    let inv_h = path.step.recip();
    let steps = path.slope_sin.len();

    let zero = F::zero();
    let mut dynamics = zero;
    let mut traction = F::neg_infinity();
    let mut power_epigraph = F::neg_infinity();
    let mut energy_epigraph = F::neg_infinity();
    let mut relaxed_time = F::neg_infinity();
    let mut speed_bounds = F::neg_infinity();
    for i in 0..steps {
        let balance = inv_h * (w[i + 1] - w[i]) + vehicle.normalized_drag * w[i]
            + g * (path.slope_sin[i] + vehicle.rolling_coeff);
        dynamics = dynamics.max((f[i] - balance).abs());
        traction = traction.max(f[i].abs() - g * vehicle.friction);
        power_epigraph = power_epigraph.max(vehicle.mass / vehicle.max_power * f[i] - t[i]);
        energy_epigraph = energy_epigraph
            .max(vehicle.regen_fraction * f[i] - e[i])
            .max(f[i] - e[i]);
        // Nonpositive w has no 1/√w; such points already surface through
        // the speed-bounds family, so they are skipped here.
        if w[i] > zero {
            relaxed_time = relaxed_time.max(w[i].sqrt().recip() - t[i]);
        }
    }
    for i in 0..w.len() {
        speed_bounds = speed_bounds.max(-w[i]).max(w[i] - path.w_max[i]);
    }

    Ok(ExtractedSolution {
        objective: raw.objective,
        residuals: RelaxationResiduals {
            dynamics,
            initial_speed: (w[0] - instance.w_init).abs(),
            speed_bounds,
            traction,
            power_epigraph,
            energy_epigraph,
            relaxed_time,
            duality_gap: raw.final_residuals.gap,
        },
        w,
        f,
        t,
        e,
        y,
        z,
        dual_eq: raw.dual_eq.clone(),
        dual_cone: raw.dual_cone.clone(),
    })
}

/// Outcome of one relaxation solve: the terminal status plus, when the
/// solver produced a usable point, its physical extraction.
#[derive(Debug, Clone)]
pub struct SolveRun<F> {
    pub status: SolveStatus,
    pub iterations: usize,
    /// Wall-clock seconds spent in build + solve.
    pub solve_seconds: f64,
    /// Solver-reported residuals at the final iterate.
    pub conic_residuals: conic::Residuals<F>,
    /// Present whenever the solver left behind a usable iterate: always
    /// for `Optimal` and `MaxIter`, and on a numerical failure when the
    /// best iterate still maps to physical (positive-speed) variables.
    pub extracted: Option<ExtractedSolution<F>>,
}

/// Builds the relaxation, solves it, and extracts the physical solution.
pub fn solve_instance<F: Scalar>(
    instance: &ProblemInstance<F>,
    config: &conic::SolverConfig<F>,
) -> Result<SolveRun<F>, Error> {
    let started = Instant::now();
    let program = build_relaxation(instance)?;
    let raw = conic::solve(&program.problem, config)?;
    let extracted = match raw.status {
        conic::Status::Optimal | conic::Status::MaxIter => {
            Some(extract_solution(&program, &raw)?)
        }
        // A numerically wedged run still carries its best iterate, which
        // is often solved for practical purposes; expose it when its
        // speeds are physical so the caller can judge it by the measured
        // exactness gap rather than by the stop reason.
        conic::Status::NumericalFailure => extract_solution(&program, &raw).ok(),
        _ => None,
    };
    Ok(SolveRun {
        status: raw.status.into(),
        iterations: raw.iterations,
        solve_seconds: started.elapsed().as_secs_f64(),
        conic_residuals: raw.final_residuals,
        extracted,
    })
}

/// Cone membership check for a slack vector of `program`, used by tests
/// and diagnostics: most negative eigenvalue of `h − Gx` over all cones
/// (nonnegative means feasible).
pub fn slack_min_eigenvalue<F: Scalar>(program: &ConicProgram<F>, x: &[F]) -> F {
    let mut slack = program.problem.h.clone();
    program.problem.g.axpy(-F::one(), x, &mut slack);
    ConeSet::new(&program.problem.cones).min_eigenvalue(&slack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evaluate_objective, forward_simulate};
    use crate::model::{PathProfile, VehicleParams};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn flat_instance(n: usize, lambda: f64) -> ProblemInstance<f64> {
        ProblemInstance {
            vehicle: VehicleParams::fiat500e(),
            path: PathProfile {
                step: 3.0,
                slope_sin: vec![0.0; n - 1],
                w_max: vec![625.0; n],
            },
            lambda,
            w_init: 100.0,
        }
    }

    #[test]
    fn column_and_row_counts_match_the_layout() {
        let program = build_relaxation(&flat_instance(200, 1e-4)).unwrap();
        assert_eq!(program.vars.len(), 1195); // 200 + 5·199
        assert_eq!(program.problem.num_vars(), 1195);
        assert_eq!(program.problem.num_eq(), 200);
        let orthant = 2 * 200 + 7 * 199;
        assert_eq!(program.rows.soc.start, orthant);
        assert_eq!(program.problem.num_cone_rows(), orthant + 9 * 199);
        let cone_dims: usize = program.problem.cones.iter().map(|c| c.dim()).sum();
        assert_eq!(cone_dims, program.problem.num_cone_rows());
        program.problem.validate().unwrap();

        // The variable ranges tile [0, N) without gaps or overlap.
        let v = &program.vars;
        let ranges = [&v.w, &v.f, &v.t, &v.e, &v.y, &v.z];
        let mut cursor = 0;
        for r in ranges {
            assert_eq!(r.start, cursor);
            cursor = r.end;
        }
        assert_eq!(cursor, v.len());
    }

    #[test]
    fn minimal_instance_has_one_auxiliary_of_each_kind() {
        let program = build_relaxation(&flat_instance(2, 0.0)).unwrap();
        let v = &program.vars;
        assert_eq!(v.w.len(), 2);
        for r in [&v.f, &v.t, &v.e, &v.y, &v.z] {
            assert_eq!(r.len(), 1);
        }
        assert_eq!(program.problem.cones.len(), 4); // orthant + 3 cones
    }

    #[test]
    fn lambda_zero_leaves_energy_columns_unpriced() {
        let program = build_relaxation(&flat_instance(20, 0.0)).unwrap();
        for j in program.vars.e.clone() {
            assert_eq!(program.problem.c[j], 0.0);
        }
        // With λ > 0 the ê columns are pre-priced: they carry the step
        // length h, exactly like the time columns, while the physical
        // weight h·λ·M shows up through the ê = λ M e unit change.
        let instance = flat_instance(20, 1e-3);
        let program = build_relaxation(&instance).unwrap();
        for j in program.vars.e.clone() {
            assert!((program.problem.c[j] - 3.0).abs() < 1e-12);
        }
        assert!((energy_unit_scale(&instance) - 1e-3 * 1365.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_instances_are_rejected_up_front() {
        let mut bad = flat_instance(5, 0.0);
        bad.w_init = -1.0;
        assert!(matches!(
            build_relaxation(&bad),
            Err(Error::InvalidParameter(_))
        ));
    }

    /// Evaluates the three slack rows the helper emits at given values.
    fn hyperbolic_slack(a: f64, b: f64, c: f64) -> [f64; 3] {
        [b + c, 2.0 * a, b - c]
    }

    #[test]
    fn hyperbolic_rows_encode_the_norm_inequality() {
        // a = 0, b = c = 1: ‖[0; 0]‖ ≤ 2, strictly feasible.
        let s = hyperbolic_slack(0.0, 1.0, 1.0);
        assert!(s[0] > (s[1] * s[1] + s[2] * s[2]).sqrt());
        // a = 1, b = c = 1: boundary, a² = bc.
        let s = hyperbolic_slack(1.0, 1.0, 1.0);
        assert_eq!(s[0], (s[1] * s[1] + s[2] * s[2]).sqrt());
        // a = 2, b = c = 1: 4 > 1, infeasible.
        let s = hyperbolic_slack(2.0, 1.0, 1.0);
        assert!(s[0] < (s[1] * s[1] + s[2] * s[2]).sqrt());

        // And the emitted triplets express exactly those slacks: build the
        // three rows for columns [a, b, c] and evaluate h − Gx.
        let mut triplets = Vec::new();
        let mut rhs = Vec::new();
        hyperbolic_to_soc::<f64>(
            Operand::Column(0),
            Operand::Column(1),
            Operand::Column(2),
            &mut triplets,
            &mut rhs,
        );
        let g = CscMatrix::from_triplets(3, 3, &triplets).unwrap();
        let x = [1.5, 2.0, 3.0];
        let mut slack = rhs.clone();
        g.axpy(-1.0, &x, &mut slack);
        assert_eq!(slack, vec![5.0, 3.0, -1.0]);
    }

    #[test]
    fn nonconvex_feasible_points_stay_feasible_with_equal_objective() {
        // Relaxation property: any dynamics-consistent (w, F) with modest
        // forces maps to a feasible point of the program with the same
        // objective, via t = 1/√w, e = max{ηf, f}, y = √t, z = 1/y.
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..12 {
            let n = rng.gen_range(3..12);
            let lambda = if trial % 3 == 0 { 0.0 } else { 1e-4 };
            let mut instance = flat_instance(n, lambda);
            instance.w_init = rng.gen_range(50.0..400.0);
            for s in instance.path.slope_sin.iter_mut() {
                *s = rng.gen_range(-0.02..0.02);
            }
            // Gentle forces keep w positive and far from every cap.
            let force: Vec<f64> = (0..n - 1)
                .map(|_| rng.gen_range(-400.0..400.0))
                .collect();
            let sim =
                forward_simulate(instance.w_init, &force, &instance.path, &instance.vehicle)
                    .unwrap();
            assert_eq!(sim.first_negative, None, "trial {trial} went negative");

            let program = build_relaxation(&instance).unwrap();
            let vars = &program.vars;
            let e_scale = energy_unit_scale(&instance);
            let mut x = vec![0.0; vars.len()];
            x[vars.w.clone()].copy_from_slice(&sim.w);
            for i in 0..n - 1 {
                let f = force[i] / instance.vehicle.mass;
                let t = 1.0 / sim.w[i].sqrt();
                x[vars.f.start + i] = f;
                x[vars.t.start + i] = t;
                x[vars.e.start + i] = e_scale * (instance.vehicle.regen_fraction * f).max(f);
                x[vars.y.start + i] = t.sqrt();
                x[vars.z.start + i] = 1.0 / t.sqrt();
            }

            // Equalities hold to rounding error.
            let mut eq = program.problem.b.clone();
            program.problem.a.axpy(-1.0, &x, &mut eq);
            for (k, r) in eq.iter().enumerate() {
                assert!(r.abs() < 1e-9, "trial {trial} eq row {k}: {r}");
            }
            // The slack lies in the cone (boundary up to rounding).
            let min_eig = slack_min_eigenvalue(&program, &x);
            assert!(min_eig > -1e-9, "trial {trial}: min eigenvalue {min_eig}");

            // Objective agreement with the independent evaluation.
            let built: f64 = program
                .problem
                .c
                .iter()
                .zip(&x)
                .map(|(c, x)| c * x)
                .sum();
            let oracle = evaluate_objective(&sim.w, &force, &instance).unwrap();
            assert!(
                (built - oracle.weighted).abs() <= 1e-10 * oracle.weighted.abs().max(1.0),
                "trial {trial}: {built} vs {}",
                oracle.weighted
            );
        }
    }

    /// The two-point flat instance whose optimum is known in closed form:
    /// w₁ is pinned at 625, so the only play is t₁ ≥ 1/√625 and the
    /// optimal value is h·t₁ = 3/25 = 0.12 s.
    fn analytic_instance() -> ProblemInstance<f64> {
        ProblemInstance {
            vehicle: VehicleParams::fiat500(),
            path: PathProfile {
                step: 3.0,
                slope_sin: vec![0.0],
                w_max: vec![625.0, 625.0],
            },
            lambda: 0.0,
            w_init: 625.0,
        }
    }

    #[test]
    fn analytic_kkt_point_has_vanishing_residuals() {
        let instance = analytic_instance();
        let program = build_relaxation(&instance).unwrap();
        let vehicle = &instance.vehicle;

        // Primal: coast (f = 0), so w₂ follows from the dynamics row, the
        // time chain is tight (t = 1/√w₁, y = √t, z = 1/y), e sits strictly
        // inside its epigraph.
        let gamma = vehicle.normalized_drag;
        let w2 = 625.0 - 3.0 * gamma * 625.0 - 3.0 * 9.81 * 0.007;
        let (t, y, z) = (0.04, 0.2, 5.0);
        let x = vec![625.0, w2, 0.0, t, 1.0, y, z];

        // Duals: every orthant row is slack (the pinned w₁ = w_max₁ row can
        // carry zero because the equality dual absorbs it), and each cone
        // sits on its boundary with a complementary dual u = τ·(s₀, −s̄).
        // Stationarity of the y and z columns fixes the ratios
        // τ_b = 12.5 τ_a and τ_c = 0.02 τ_a; the t column then gives
        // 2τ_b + 1250τ_c = h, i.e. τ_a = 0.06.
        let (tau_a, tau_b, tau_c) = (0.06, 0.75, 0.0012);
        let nu = vec![2.0 * tau_c * t, 0.0]; // = 9.6e-5 on the start row
        let mut u = vec![0.0; 11];
        u.extend_from_slice(&[
            tau_a * (z + y),
            tau_a * -2.0,
            tau_a * -(z - y),
            tau_b * (t + 1.0),
            tau_b * -2.0 * y,
            tau_b * -(t - 1.0),
            tau_c * (t + 625.0),
            tau_c * -2.0 * z,
            tau_c * -(t - 625.0),
        ]);

        let residuals = conic::kkt_residuals(&program.problem, &x, &nu, &u);
        assert!(residuals.primal <= 1e-12, "primal {}", residuals.primal);
        assert!(residuals.dual <= 1e-12, "dual {}", residuals.dual);
        assert!(residuals.gap <= 1e-12, "gap {}", residuals.gap);

        let objective: f64 = program.problem.c.iter().zip(&x).map(|(c, x)| c * x).sum();
        assert!((objective - 0.12).abs() < 1e-15);
    }

    #[test]
    fn solver_reaches_the_analytic_optimum() {
        let run = solve_instance(&analytic_instance(), &conic::SolverConfig::default()).unwrap();
        assert_eq!(run.status, SolveStatus::Optimal);
        let extracted = run.extracted.unwrap();
        assert!(
            (extracted.objective - 0.12).abs() <= 1e-8,
            "objective {}",
            extracted.objective
        );
        assert!((extracted.w[0] - 625.0).abs() < 1e-6);
        assert!(extracted.residuals.dynamics < 1e-7);
        assert!(extracted.residuals.relaxed_time < 1e-6);
    }

    #[test]
    fn extraction_refuses_points_from_failed_solves() {
        // An infeasible window: the start speed is pinned above a cap that
        // even full braking cannot reach one step later.
        let mut instance = flat_instance(3, 0.0);
        instance.w_init = 625.0;
        instance.path.w_max = vec![625.0, 1.0, 1.0];
        let program = build_relaxation(&instance).unwrap();
        let raw = conic::solve(&program.problem, &conic::SolverConfig::default()).unwrap();
        assert_eq!(raw.status, conic::Status::Infeasible);
        assert!(matches!(
            extract_solution(&program, &raw),
            Err(Error::NoSolution(_))
        ));
        let run = solve_instance(&instance, &conic::SolverConfig::default()).unwrap();
        assert_eq!(run.status, SolveStatus::Infeasible);
        assert!(run.extracted.is_none());
    }

    #[test]
    fn solved_midsize_instance_extracts_with_small_residuals() {
        let mut instance = flat_instance(30, 1e-4);
        for (i, s) in instance.path.slope_sin.iter_mut().enumerate() {
            *s = if i < 10 { 0.02 } else { -0.01 };
        }
        let run = solve_instance(&instance, &conic::SolverConfig::default()).unwrap();
        assert_eq!(run.status, SolveStatus::Optimal);
        let extracted = run.extracted.unwrap();
        let r = &extracted.residuals;
        // The solver tolerance is relative to the data scale (w_init = 100
        // dominates the right-hand side here), hence the 1e-6 ceilings.
        assert!(r.dynamics <= 1e-6, "dynamics {}", r.dynamics);
        assert!(r.initial_speed <= 1e-6);
        assert!(r.speed_bounds <= 1e-6);
        assert!(r.traction <= 1e-9);
        assert!(r.power_epigraph <= 1e-9);
        assert!(r.energy_epigraph <= 1e-9);
        assert!(r.relaxed_time <= 1e-6);
        // The recomputed gap floors at the rounding noise of its inner
        // product on problems this size, well above the solver's internal
        // convergence measure.
        assert!(r.duality_gap <= 1e-5, "gap {}", r.duality_gap);

        // The reported objective is the independent recomputation
        // h·(λ·M·Σe + Σt) to high relative accuracy.
        let h = instance.path.step;
        let recomputed: f64 = h
            * (instance.lambda * instance.vehicle.mass * extracted.e.iter().sum::<f64>()
                + extracted.t.iter().sum::<f64>());
        assert!(
            (recomputed - extracted.objective).abs() <= 1e-10 * extracted.objective.abs(),
            "{recomputed} vs {}",
            extracted.objective
        );
    }
}
