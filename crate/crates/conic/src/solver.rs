//! Primal-dual interior-point solver: Mehrotra predictor-corrector with
//! Nesterov–Todd scaling on the homogeneous self-dual embedding. The
//! embedding adds one scalar pair `(tau, kappa)` to the usual variables;
//! an optimal point shows up as `tau > 0, kappa -> 0`, while primal or
//! dual infeasibility drives `tau -> 0` and leaves a certificate ray in
//! the iterates, so infeasible inputs terminate cleanly instead of
//! diverging.
//!
//! Each direction takes two solves with the augmented KKT system
//!
//! ```text
//!   [ 0   A'   G'  ] [dx]
//!   [ A   0    0   ] [dy]  = rhs,
//!   [ G   0  -W'W  ] [dz]
//! ```
//!
//! factored once per iteration by the skyline LDL' in [`crate::linalg`]
//! under a reverse Cuthill–McKee permutation. Static regularization keeps
//! the factorization quasi-definite and iterative refinement against the
//! unregularized matrix restores accuracy. All arithmetic is deterministic:
//! the same problem and configuration always produce bitwise-identical
//! iterates.

use std::time::{Duration, Instant};

use crate::cones::{dot, soc_w_squared, ConeSet, Scaling, ScalingBlock};
use crate::equilibrate::{ruiz, Equilibration};
use crate::linalg::{reverse_cuthill_mckee, Skyline};
use crate::program::{Cone, Problem};
use crate::scalar::Scalar;
use crate::Error;

/// Solver knobs. The defaults (`1e-9` tolerances) are tuned for `f64`;
/// with `f32` the tolerances must be loosened by the caller.
#[derive(Debug, Clone)]
pub struct SolverConfig<F> {
    /// Relative feasibility tolerance applied to the primal equality/cone
    /// residual and the dual residual.
    pub eq_tol: F,
    /// Relative duality-gap tolerance. Judged against the smaller of the
    /// recomputed gap `|s'z|` at the candidate point and the embedding's
    /// internal complementarity; on larger problems the recomputed form
    /// floors at rounding noise (roughly `||z||` times the primal
    /// residual) while the internal measure keeps contracting.
    pub gap_tol: F,
    /// Iteration cap before giving up with [`Status::MaxIter`].
    pub max_iters: usize,
    /// Run Ruiz equilibration on the problem data before solving.
    pub equilibrate: bool,
}

impl<F: Scalar> Default for SolverConfig<F> {
    fn default() -> Self {
        SolverConfig {
            eq_tol: F::cast(1e-9),
            gap_tol: F::cast(1e-9),
            max_iters: 200,
            equilibrate: true,
        }
    }
}

/// Terminal state of a solve. `Infeasible` and the failure states still
/// carry the last iterate so callers can inspect diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// All residuals and the duality gap met their tolerances.
    Optimal,
    /// Primal infeasibility was certified: `dual_eq`/`dual_cone` hold a ray
    /// `(y, z)` with `A'y + G'z ≈ 0` and `b'y + h'z = -1`.
    Infeasible,
    /// The objective is unbounded below (dual infeasible): `primal` holds a
    /// feasible ray `x` with `c'x = -1`.
    Unbounded,
    /// Iteration limit reached without meeting tolerances.
    MaxIter,
    /// Scaling or factorization broke down, or steps collapsed.
    NumericalFailure,
}

/// KKT residuals, all relative: primal feasibility (equalities and cone
/// membership of the recomputed slack), dual feasibility, and duality gap.
/// The gap is the independently recomputed `|s'z|` with `s = h - Gx`; at
/// an [`Status::Optimal`] point it can sit above `gap_tol` by the rounding
/// noise of that inner product (see [`SolverConfig::gap_tol`]).
#[derive(Debug, Clone, Copy)]
pub struct Residuals<F> {
    pub primal: F,
    pub dual: F,
    pub gap: F,
}

/// Result of a solve, in the coordinates of the problem as given
/// (equilibration is undone internally). The point is meaningful as an
/// optimum only when `status` is [`Status::Optimal`]; for the infeasible
/// statuses it carries the certificate ray instead (see [`Status`]).
#[derive(Debug, Clone)]
pub struct Solution<F> {
    pub primal: Vec<F>,
    pub dual_eq: Vec<F>,
    pub dual_cone: Vec<F>,
    pub slack: Vec<F>,
    pub status: Status,
    pub iterations: usize,
    pub final_residuals: Residuals<F>,
    /// `c' x` at the final iterate.
    pub objective: F,
    pub wall_time: Duration,
    /// Complementarity measure of the embedding (`s'z + tau*kappa`) after
    /// each iteration, for convergence diagnostics.
    pub gap_history: Vec<F>,
}

/// Recomputes KKT residuals from the problem data and a candidate point,
/// independent of any solver state. The slack is taken as `h - G x`, so
/// the cone part of the primal residual measures how far that recomputed
/// slack sits outside the cone. The gap is `|s'z|` relative to
/// `max(|c'x|, 1e-6)`.
pub fn kkt_residuals<F: Scalar>(
    problem: &Problem<F>,
    x: &[F],
    y: &[F],
    z: &[F],
) -> Residuals<F> {
    let cones = ConeSet::new(&problem.cones);
    let (res, _, _) = residuals_at(problem, &cones, x, y, z);
    res
}

fn inf_norm<F: Scalar>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |a, &x| a.max(x.abs()))
}

/// Shared residual computation: returns the residual triple plus the
/// primal objective and the recomputed slack.
fn residuals_at<F: Scalar>(
    problem: &Problem<F>,
    cones: &ConeSet,
    x: &[F],
    y: &[F],
    z: &[F],
) -> (Residuals<F>, F, Vec<F>) {
    let one = F::one();
    // Primal: ||Ax - b|| and distance of s = h - Gx from the cone.
    let mut ax = vec![F::zero(); problem.num_eq()];
    problem.a.axpy(one, x, &mut ax);
    for (i, &bi) in problem.b.iter().enumerate() {
        ax[i] -= bi;
    }
    let mut slack = problem.h.clone();
    problem.g.axpy(-one, x, &mut slack);
    let cone_violation = (-cones.min_eigenvalue(&slack)).max(F::zero());
    let primal = (inf_norm(&ax) / (one + inf_norm(&problem.b)))
        .max(cone_violation / (one + inf_norm(&problem.h)));
    // Dual: ||A'y + G'z + c||.
    let mut rd = problem.c.clone();
    problem.a.axpy_transpose(one, y, &mut rd);
    problem.g.axpy_transpose(one, z, &mut rd);
    let dual = inf_norm(&rd) / (one + inf_norm(&problem.c));
    // Gap: |s'z| relative to the objective magnitude (floored so that
    // near-zero objectives do not make the measure explode).
    let pobj = dot(&problem.c, x);
    let gap = dot(&slack, z).abs() / pobj.abs().max(F::cast(1e-6));
    (
        Residuals {
            primal,
            dual,
            gap,
        },
        pobj,
        slack,
    )
}

/// Entry of the KKT matrix: original symmetric coordinates (`row >= col`)
/// plus the position in the permuted skyline storage.
#[derive(Debug, Clone, Copy)]
struct Slot {
    row: u32,
    col: u32,
    sky: u32,
}

/// Assembled KKT machinery reused across iterations.
struct KktSystem<F> {
    dim: usize,
    perm: Vec<usize>,
    sky: Skyline<F>,
    signs: Vec<i8>,
    static_slots: Vec<Slot>,
    static_vals: Vec<F>,
    dyn_slots: Vec<Slot>,
    dyn_vals: Vec<F>,
    diag_sky: Vec<usize>,
    static_reg: F,
    pivot_floor: F,
    pivot_replacement: F,
    // scratch
    permuted: Vec<F>,
    resid: Vec<F>,
    comp: Vec<F>,
    correction: Vec<F>,
}

impl<F: Scalar> KktSystem<F> {
    fn new(problem: &Problem<F>, cones: &ConeSet) -> Self {
        let n = problem.num_vars();
        let p = problem.num_eq();
        let m = problem.num_cone_rows();
        let dim = n + p + m;

        let mut static_slots: Vec<(u32, u32)> = Vec::new();
        let mut static_vals: Vec<F> = Vec::new();
        problem.a.for_each(|r, c, v| {
            static_slots.push(((n + r) as u32, c as u32));
            static_vals.push(v);
        });
        problem.g.for_each(|r, c, v| {
            static_slots.push(((n + p + r) as u32, c as u32));
            static_vals.push(v);
        });

        let mut dyn_slots: Vec<(u32, u32)> = Vec::new();
        for (cone, off) in cones.iter() {
            let base = n + p + off;
            match cone {
                Cone::NonnegativeOrthant(d) => {
                    for i in 0..d {
                        dyn_slots.push(((base + i) as u32, (base + i) as u32));
                    }
                }
                Cone::SecondOrderCone(d) => {
                    for i in 0..d {
                        for j in 0..=i {
                            dyn_slots.push(((base + i) as u32, (base + j) as u32));
                        }
                    }
                }
            }
        }

        // Ordering from the off-diagonal pattern.
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &(r, c) in static_slots.iter().chain(dyn_slots.iter()) {
            if r != c {
                edges.push((r as usize, c as usize));
            }
        }
        let perm = reverse_cuthill_mckee(dim, &edges);
        let mut iperm = vec![0usize; dim];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        let to_perm = |r: u32, c: u32| {
            let (pr, pc) = (iperm[r as usize], iperm[c as usize]);
            if pr >= pc {
                (pr, pc)
            } else {
                (pc, pr)
            }
        };
        let positions = static_slots
            .iter()
            .chain(dyn_slots.iter())
            .map(|&(r, c)| to_perm(r, c))
            .chain((0..dim).map(|i| (i, i)));
        let sky = Skyline::symbolic(dim, positions);

        let finish = |pairs: Vec<(u32, u32)>| -> Vec<Slot> {
            pairs
                .into_iter()
                .map(|(r, c)| {
                    let (pr, pc) = to_perm(r, c);
                    Slot {
                        row: r,
                        col: c,
                        sky: sky.index_of(pr, pc) as u32,
                    }
                })
                .collect()
        };
        let static_slots = finish(static_slots);
        let dyn_count = dyn_slots.len();
        let dyn_slots = finish(dyn_slots);
        let diag_sky: Vec<usize> = (0..dim)
            .map(|i| sky.index_of(iperm[i], iperm[i]))
            .collect();
        let signs: Vec<i8> = (0..dim).map(|i| if perm[i] < n { 1 } else { -1 }).collect();

        KktSystem {
            dim,
            perm,
            sky,
            signs,
            static_slots,
            static_vals,
            dyn_slots,
            dyn_vals: vec![F::zero(); dyn_count],
            diag_sky,
            static_reg: F::cast(1e-8),
            pivot_floor: F::cast(1e-13),
            pivot_replacement: F::cast(2e-7),
            permuted: vec![F::zero(); dim],
            resid: vec![F::zero(); dim],
            comp: vec![F::zero(); dim],
            correction: vec![F::zero(); dim],
        }
    }

    /// Writes the `-W'W` block values for the given scaling (or `-I` when
    /// absent, used by the initialization solve).
    fn set_scaling(&mut self, cones: &ConeSet, scaling: Option<&Scaling<F>>) {
        let mut k = 0;
        let mut packed: Vec<F> = Vec::new();
        match scaling {
            None => {
                for (cone, _) in cones.iter() {
                    match cone {
                        Cone::NonnegativeOrthant(d) => {
                            for _ in 0..d {
                                self.dyn_vals[k] = -F::one();
                                k += 1;
                            }
                        }
                        Cone::SecondOrderCone(d) => {
                            for i in 0..d {
                                for j in 0..=i {
                                    self.dyn_vals[k] =
                                        if i == j { -F::one() } else { F::zero() };
                                    k += 1;
                                }
                            }
                        }
                    }
                }
            }
            Some(sc) => {
                for block in sc.blocks.iter() {
                    match block {
                        ScalingBlock::Orthant { w } => {
                            for &wi in w {
                                self.dyn_vals[k] = -(wi * wi);
                                k += 1;
                            }
                        }
                        ScalingBlock::Soc { eta, wbar } => {
                            soc_w_squared(*eta, wbar, &mut packed);
                            for &v in &packed {
                                self.dyn_vals[k] = -v;
                                k += 1;
                            }
                        }
                    }
                }
            }
        }
        debug_assert_eq!(k, self.dyn_vals.len());
    }

    /// Assembles and factors the regularized KKT matrix. Returns false on
    /// numerical breakdown (non-finite entries).
    fn factor(&mut self) -> bool {
        self.sky.clear();
        for (slot, &v) in self.static_slots.iter().zip(&self.static_vals) {
            self.sky.vals[slot.sky as usize] += v;
        }
        for (slot, &v) in self.dyn_slots.iter().zip(&self.dyn_vals) {
            if !v.is_finite() {
                return false;
            }
            self.sky.vals[slot.sky as usize] += v;
        }
        for i in 0..self.dim {
            let s = F::cast(self.signs[i]);
            self.sky.vals[self.diag_sky[i]] += s * self.static_reg;
        }
        self.sky
            .factor_ldl(&self.signs, self.pivot_floor, self.pivot_replacement);
        self.sky.vals.iter().all(|v| v.is_finite())
    }

    /// Fills `self.resid` with `rhs - K sol` (against the unregularized
    /// matrix) and returns its infinity norm. The sums are compensated
    /// (two-sum plus the FMA product error): near convergence `sol` grows
    /// like the reciprocal barrier parameter, and a plainly accumulated
    /// residual bottoms out at the rounding noise of its own largest terms,
    /// which would both stall refinement and overstate the solve error.
    fn residual(&mut self, rhs: &[F], sol: &[F]) -> F {
        let mut resid = std::mem::take(&mut self.resid);
        let mut comp = std::mem::take(&mut self.comp);
        resid.copy_from_slice(rhs);
        comp.fill(F::zero());
        let mut accumulate = |row: usize, val: F, xj: F| {
            let p = val * xj;
            let p_err = val.mul_add(xj, -p);
            let a = resid[row];
            let sum = a - p;
            let bb = sum - a;
            comp[row] += (a - (sum - bb)) + (-p - bb) - p_err;
            resid[row] = sum;
        };
        for (slot, &val) in self
            .static_slots
            .iter()
            .zip(&self.static_vals)
            .chain(self.dyn_slots.iter().zip(&self.dyn_vals))
        {
            let (r, c) = (slot.row as usize, slot.col as usize);
            accumulate(r, val, sol[c]);
            if r != c {
                accumulate(c, val, sol[r]);
            }
        }
        for (ri, &ci) in resid.iter_mut().zip(&comp) {
            *ri += ci;
        }
        let norm = resid
            .iter()
            .fold(F::zero(), |acc, &v| acc.max(v.abs()));
        self.resid = resid;
        self.comp = comp;
        norm
    }

    /// Applies the factorization: `sol = (L D L')^{-1} v`.
    fn backsolve(&mut self, v: &[F], sol: &mut [F]) {
        for i in 0..self.dim {
            self.permuted[i] = v[self.perm[i]];
        }
        self.sky.solve_in_place(&mut self.permuted);
        for i in 0..self.dim {
            sol[self.perm[i]] = self.permuted[i];
        }
    }

    /// Solves `K sol = rhs`, refining against the unregularized matrix
    /// until the residual is tiny or stops improving. Returns the achieved
    /// residual norm relative to the right-hand side, which the caller uses
    /// to detect a broken factorization.
    fn solve(&mut self, rhs: &[F], sol: &mut [F]) -> F {
        self.backsolve(rhs, sol);
        let scale = rhs
            .iter()
            .fold(F::one(), |acc, &v| acc.max(v.abs()));
        let mut best = self.residual(rhs, sol);
        for _ in 0..10 {
            if best <= F::cast(1e-14) * scale {
                break;
            }
            let resid = std::mem::take(&mut self.resid);
            let mut correction = std::mem::take(&mut self.correction);
            self.backsolve(&resid, &mut correction);
            self.resid = resid;
            for i in 0..self.dim {
                sol[i] += correction[i];
            }
            self.correction = correction;
            let now = self.residual(rhs, sol);
            if now < best {
                best = now;
            } else {
                // Refinement stalled; undo the step that made things worse.
                for (si, ci) in sol.iter_mut().zip(&self.correction) {
                    *si -= *ci;
                }
                break;
            }
        }
        best / scale
    }
}

/// Solves a conic program. `Err` is returned only for malformed input;
/// numerical outcomes (including infeasibility) are reported through
/// [`Solution::status`].
pub fn solve<F: Scalar>(problem: &Problem<F>, config: &SolverConfig<F>) -> Result<Solution<F>, Error> {
    problem.validate()?;
    if problem.num_cone_rows() == 0 {
        return Err(Error::InvalidDimension(
            "interior-point iteration needs at least one cone row".into(),
        ));
    }
    let start = Instant::now();

    // Work on a scaled copy; report in original coordinates.
    let cones = ConeSet::new(&problem.cones);
    let mut scaled = problem.clone();
    let eq = if config.equilibrate {
        ruiz(&mut scaled, &cones, 6)
    } else {
        Equilibration::identity(
            problem.num_vars(),
            problem.num_eq(),
            problem.num_cone_rows(),
        )
    };

    let n = scaled.num_vars();
    let p = scaled.num_eq();
    let m = scaled.num_cone_rows();
    let dim = n + p + m;
    // Degree of the embedding: the cones plus the (tau, kappa) pair.
    let nu = F::cast(cones.degree()) + F::one();

    let mut kkt = KktSystem::new(&scaled, &cones);

    // --- Initial point: least-squares primal and dual solves with W = I.
    kkt.set_scaling(&cones, None);
    if !kkt.factor() {
        return Ok(failed_solution(problem, start, Status::NumericalFailure));
    }
    let mut rhs = vec![F::zero(); dim];
    let mut sol = vec![F::zero(); dim];

    // Primal: minimize ||s|| subject to Ax = b, Gx + s = h.
    rhs[n..n + p].copy_from_slice(&scaled.b);
    rhs[n + p..].copy_from_slice(&scaled.h);
    kkt.solve(&rhs, &mut sol);
    let mut x: Vec<F> = sol[..n].to_vec();
    let mut s: Vec<F> = sol[n + p..].iter().map(|&v| -v).collect();
    cones.shift_to_interior(&mut s);

    // Dual: minimize ||z|| subject to A'y + G'z = -c.
    for v in rhs.iter_mut() {
        *v = F::zero();
    }
    for i in 0..n {
        rhs[i] = -scaled.c[i];
    }
    kkt.solve(&rhs, &mut sol);
    let mut y: Vec<F> = sol[n..n + p].to_vec();
    let mut z: Vec<F> = sol[n + p..].to_vec();
    cones.shift_to_interior(&mut z);

    let mut tau = F::one();
    let mut kappa = F::one();

    // Unscaled views for convergence checks: raw iterates plus the
    // tau-normalized point the caller would receive.
    let mut x_u = vec![F::zero(); n];
    let mut y_u = vec![F::zero(); p];
    let mut z_u = vec![F::zero(); m];
    let mut s_u = vec![F::zero(); m];
    let mut x_n = vec![F::zero(); n];
    let mut y_n = vec![F::zero(); p];
    let mut z_n = vec![F::zero(); m];

    let mut gap_history: Vec<F> = Vec::new();
    let mut status = Status::MaxIter;
    let mut iterations = 0;
    let mut tiny_steps = 0;
    let base_reg = kkt.static_reg;

    // Best normalized iterate seen so far (by worst-case residual). Once
    // the achievable accuracy is reached, further steps can degrade the
    // point, so the best one is what gets reported.
    let mut best_merit = F::infinity();
    let mut best_x = vec![F::zero(); n];
    let mut best_y = vec![F::zero(); p];
    let mut best_z = vec![F::zero(); m];
    let mut stalled = 0;

    // Direction buffers.
    let mut v1 = vec![F::zero(); dim];
    let mut dxa = vec![F::zero(); dim];
    let mut dsa = vec![F::zero(); m];
    let mut lam_sq = vec![F::zero(); m];
    let mut wdz = vec![F::zero(); m];
    let mut eta_m = vec![F::zero(); m];
    let mut dsigma = vec![F::zero(); m];
    let mut div = vec![F::zero(); m];
    let mut wdiv = vec![F::zero(); m];
    let mut ds = vec![F::zero(); m];
    let mut buf_m = vec![F::zero(); m];
    let mut dtau = F::zero();
    let mut dkappa = F::zero();

    for iter in 0..config.max_iters {
        iterations = iter;
        unscale(&eq, &x, &y, &z, &mut x_u, &mut y_u, &mut z_u);
        for i in 0..m {
            s_u[i] = s[i] / eq.d_row_cone[i];
        }
        for i in 0..n {
            x_n[i] = x_u[i] / tau;
        }
        for i in 0..p {
            y_n[i] = y_u[i] / tau;
        }
        for i in 0..m {
            z_n[i] = z_u[i] / tau;
        }
        let (res, pobj, _slack) = residuals_at(problem, &cones, &x_n, &y_n, &z_n);
        // Convergence is judged on `res.gap`, the complementarity of the
        // tau-normalized point recomputed from scratch. It is a sum of
        // nonnegative products, so it has no cancellation and measures
        // the point actually returned to the caller; the embedding's own
        // complementarity can run ahead of it and declare victory on a
        // point whose recomputed gap is two orders larger.
        let embed_gap = (dot(&s, &z) + tau * kappa) * eq.cost_scale / (tau * tau);
        let rel_embed_gap = embed_gap / pobj.abs().max(F::cast(1e-6));
        let gap_measure = res.gap;
        let merit = res.primal.max(res.dual).max(gap_measure);
        if std::env::var("CONIC_DEBUG").is_ok() {
            eprintln!(
                "iter {iter} tau {tau:?} kappa {kappa:?} res ({:?} {:?} {:?}) embed {rel_embed_gap:?} merit {merit:?} stalled {stalled}",
                res.primal, res.dual, res.gap
            );
        }
        if merit < best_merit {
            best_merit = merit;
            best_x.copy_from_slice(&x_n);
            best_y.copy_from_slice(&y_n);
            best_z.copy_from_slice(&z_n);
            stalled = 0;
        } else if best_merit < F::cast(1e-4) && !(merit <= best_merit * F::cast(10.0)) {
            // Only treat degradation as a stall once the run was already
            // close to solved; on infeasible problems the normalized point
            // legitimately diverges while the certificate matures.
            stalled += 1;
            if stalled >= 5 {
                if std::env::var("CONIC_DEBUG").is_ok() {
                    eprintln!("iter {iter}: stall abort, merit {merit:?} best {best_merit:?}");
                }
                status = Status::NumericalFailure;
                break;
            }
        }
        if res.primal <= config.eq_tol && res.dual <= config.eq_tol && gap_measure <= config.gap_tol
        {
            // The passing point wins even if an earlier iterate had a
            // smaller worst-case residual (the tolerances need not agree).
            best_x.copy_from_slice(&x_n);
            best_y.copy_from_slice(&y_n);
            best_z.copy_from_slice(&z_n);
            best_merit = merit;
            status = Status::Optimal;
            break;
        }
        if iter > 0 {
            if infeasibility_certificate(problem, &y_u, &z_u) {
                status = Status::Infeasible;
                break;
            }
            if unboundedness_certificate(problem, &x_u, &s_u) {
                status = Status::Unbounded;
                break;
            }
        }

        // Residuals of the self-dual embedding, in scaled space.
        let mut rx: Vec<F> = scaled.c.iter().map(|&v| v * tau).collect();
        scaled.a.axpy_transpose(F::one(), &y, &mut rx);
        scaled.g.axpy_transpose(F::one(), &z, &mut rx);
        let mut ry: Vec<F> = scaled.b.iter().map(|&v| -v * tau).collect();
        scaled.a.axpy(F::one(), &x, &mut ry);
        let mut rz: Vec<F> = scaled.h.iter().map(|&v| -v * tau).collect();
        scaled.g.axpy(F::one(), &x, &mut rz);
        for i in 0..m {
            rz[i] += s[i];
        }
        let rtau =
            kappa + dot(&scaled.c, &x) + dot(&scaled.b, &y) + dot(&scaled.h, &z);

        let gap = dot(&s, &z) + tau * kappa;
        let mu = gap / nu;
        let Some(scaling) = cones.nt_scaling(&s, &z) else {
            if std::env::var("CONIC_DEBUG").is_ok() {
                eprintln!("iter {iter}: nt_scaling breakdown");
            }
            status = Status::NumericalFailure;
            break;
        };
        kkt.set_scaling(&cones, Some(&scaling));

        // Factor, then solve for the predictor and combined directions.
        // Near convergence, cancellation inside the scaled blocks can swamp
        // the regularization and wreck the factorization; that shows up as
        // a large solve residual. Rather than stepping along garbage,
        // refactor with stronger regularization and try again.
        // Pairing of a KKT solution with the embedding data, used by the
        // scalar elimination for (dtau, dkappa).
        let pairing = |v: &[F]| {
            dot(&scaled.c, &v[..n]) + dot(&scaled.b, &v[n..n + p]) + dot(&scaled.h, &v[n + p..])
        };

        let mut reg_scale = F::one();
        let mut factor_broke = false;
        let mut direction_bad = false;
        let mut denom = F::zero();
        let mut sigma = F::zero();
        loop {
            kkt.static_reg = base_reg * reg_scale;
            if !kkt.factor() {
                factor_broke = true;
                break;
            }

            // Column solve v1 = K^{-1} [-c; b; h], shared by both
            // directions: eliminating (ds, dkappa) couples dtau to the
            // other unknowns only through this vector.
            for i in 0..n {
                rhs[i] = -scaled.c[i];
            }
            for i in 0..p {
                rhs[n + i] = scaled.b[i];
            }
            for i in 0..m {
                rhs[n + p + i] = scaled.h[i];
            }
            let quality_col = kkt.solve(&rhs, &mut v1);
            // kappa/tau - pairing(v1) collapses to kappa/tau + ||W v1_z||^2
            // through the KKT identity; the direct difference cancels
            // catastrophically near convergence, the norm form cannot.
            cones.apply_scaling(&scaling, &v1[n + p..], &mut buf_m, false);
            denom = kappa / tau + dot(&buf_m, &buf_m);

            // Predictor (affine) direction.
            for i in 0..n {
                rhs[i] = -rx[i];
            }
            for i in 0..p {
                rhs[n + i] = -ry[i];
            }
            for i in 0..m {
                rhs[n + p + i] = -rz[i] + s[i];
            }
            let quality_aff = kkt.solve(&rhs, &mut dxa);
            let dtau_aff = (rtau + pairing(&dxa) - kappa) / denom;
            for i in 0..dim {
                dxa[i] += dtau_aff * v1[i];
            }
            let dkappa_aff = -(tau * kappa + kappa * dtau_aff) / tau;
            let dza = &dxa[n + p..dim];
            cones.apply_scaling(&scaling, dza, &mut wdz, false);
            // ds_aff = -W(lambda + W dz_aff)
            for i in 0..m {
                buf_m[i] = scaling.lambda[i] + wdz[i];
            }
            cones.apply_scaling(&scaling, &buf_m, &mut dsa, false);
            for v in dsa.iter_mut() {
                *v = -*v;
            }

            let alpha_aff = cones
                .step_to_boundary(&s, &dsa)
                .min(cones.step_to_boundary(&z, dza))
                .min(step_to_zero(tau, dtau_aff))
                .min(step_to_zero(kappa, dkappa_aff))
                .min(F::one());
            let gap_aff = {
                let mut acc = (tau + alpha_aff * dtau_aff) * (kappa + alpha_aff * dkappa_aff);
                for i in 0..m {
                    acc += (s[i] + alpha_aff * dsa[i]) * (z[i] + alpha_aff * dza[i]);
                }
                acc
            };
            let ratio = (gap_aff / gap).max(F::zero());
            sigma = (ratio * ratio * ratio).min(F::one());

            // Corrector: dsigma = lambda o lambda + (W^{-1}ds_a) o (W dz_a) - sigma mu e,
            // with the scalar analogue for the (tau, kappa) pair.
            cones.product(&scaling.lambda, &scaling.lambda, &mut lam_sq);
            for i in 0..m {
                buf_m[i] = -(scaling.lambda[i] + wdz[i]); // = W^{-1} ds_aff
            }
            cones.product(&buf_m, &wdz, &mut eta_m);
            for i in 0..m {
                dsigma[i] = lam_sq[i] + eta_m[i];
            }
            cones.add_identity(-sigma * mu, &mut dsigma);
            cones.divide(&scaling.lambda, &dsigma, &mut div);
            cones.apply_scaling(&scaling, &div, &mut wdiv, false);
            let dsigma_tau = tau * kappa + dtau_aff * dkappa_aff - sigma * mu;

            // Combined direction: in the embedding the linear residuals
            // must shrink in lockstep with the complementarity target, so
            // they enter scaled by (1 - sigma).
            let shrink = F::one() - sigma;
            for i in 0..n {
                rhs[i] = -shrink * rx[i];
            }
            for i in 0..p {
                rhs[n + i] = -shrink * ry[i];
            }
            for i in 0..m {
                rhs[n + p + i] = -shrink * rz[i] + wdiv[i];
            }
            let quality = kkt
                .solve(&rhs, &mut sol)
                .max(quality_aff)
                .max(quality_col);
            dtau = (shrink * rtau + pairing(&sol) - dsigma_tau / tau) / denom;
            for i in 0..dim {
                sol[i] += dtau * v1[i];
            }
            dkappa = -(dsigma_tau + kappa * dtau) / tau;
            let dz = &sol[n + p..dim];
            cones.apply_scaling(&scaling, dz, &mut wdz, false);
            for i in 0..m {
                buf_m[i] = div[i] + wdz[i];
            }
            cones.apply_scaling(&scaling, &buf_m, &mut ds, false);
            for v in ds.iter_mut() {
                *v = -*v;
            }

            direction_bad = !denom.is_finite()
                || denom <= F::zero()
                || !dtau.is_finite()
                || !dkappa.is_finite();
            if std::env::var("CONIC_DEBUG").is_ok() {
                eprintln!(
                    "  iter {iter} reg {reg_scale:?}: quality col/aff/comb {quality_col:?} {quality_aff:?} {quality:?} denom {denom:?}"
                );
            }
            // Accept any usable direction at once. Escalating the
            // regularization moves the factored matrix further from the
            // true KKT system, so it only ever helps when the current
            // factorization is genuinely broken — applied to a merely
            // imperfect one it replaces a workable direction with garbage.
            if (!direction_bad && quality <= F::cast(1e-2)) || reg_scale >= F::cast(1e4) {
                direction_bad |= quality > F::cast(1e-2);
                break;
            }
            reg_scale *= F::cast(100.0);
        }
        if factor_broke || direction_bad {
            // Includes the endgame case where the shared column solve hits
            // its floating-point floor (its solution diverges as the KKT
            // matrix approaches singularity at convergence): stepping along
            // such a direction only corrupts the iterate.
            if std::env::var("CONIC_DEBUG").is_ok() {
                eprintln!("iter {iter}: factor_broke={factor_broke} direction_bad={direction_bad}");
            }
            status = Status::NumericalFailure;
            break;
        }

        // Centrality correctors: an extra solve with the factorization
        // already in hand pulls outlier complementarity products toward
        // the current target. Mid-run that lengthens steps blocked by a
        // few products; near convergence it lets the final computable
        // steps cut the gap deeper before the scaled system turns
        // numerically singular. A round is kept only when it pays off in
        // step length or in the gap the step reaches.
        let mu_target = sigma * mu;
        let assess = |ds_v: &[F], dz_v: &[F], dtau_v: F, dkappa_v: F| -> (F, F) {
            let a = cones
                .step_to_boundary(&s, ds_v)
                .min(cones.step_to_boundary(&z, dz_v))
                .min(step_to_zero(tau, dtau_v))
                .min(step_to_zero(kappa, dkappa_v))
                .min(F::one());
            let af = F::cast(0.999) * a;
            let mut g = (tau + af * dtau_v) * (kappa + af * dkappa_v);
            for i in 0..m {
                g += (s[i] + af * ds_v[i]) * (z[i] + af * dz_v[i]);
            }
            (a, g)
        };
        for _ in 0..2 {
            let (alpha_cur, gap_cur) = assess(&ds, &sol[n + p..], dtau, dkappa);
            if alpha_cur >= F::cast(0.99) && merit > F::cast(1e-5) {
                break;
            }
            let alpha_t = (alpha_cur + F::cast(0.08)).min(F::one());

            // Complementarity products at the trial point, in scaled
            // space: v = (lambda + a W^{-1}ds) o (lambda + a W dz).
            cones.apply_scaling(&scaling, &sol[n + p..], &mut wdz, false);
            cones.apply_scaling(&scaling, &ds, &mut buf_m, true);
            for i in 0..m {
                buf_m[i] = scaling.lambda[i] + alpha_t * buf_m[i];
                eta_m[i] = scaling.lambda[i] + alpha_t * wdz[i];
            }
            cones.product(&buf_m, &eta_m, &mut lam_sq);
            let lo = F::cast(0.1) * mu_target;
            let hi = F::cast(10.0) * mu_target;
            clamp_excess(&cones, &lam_sq, lo, hi, &mut dsigma);
            let v_tk = (tau + alpha_t * dtau) * (kappa + alpha_t * dkappa);
            let dsigma_tau_c = v_tk - v_tk.max(lo).min(hi);

            cones.divide(&scaling.lambda, &dsigma, &mut div);
            cones.apply_scaling(&scaling, &div, &mut wdiv, false);
            for v in rhs[..n + p].iter_mut() {
                *v = F::zero();
            }
            for i in 0..m {
                rhs[n + p + i] = wdiv[i];
            }
            if kkt.solve(&rhs, &mut dxa) > F::cast(1e-2) {
                break;
            }
            let dtau_c = (pairing(&dxa) - dsigma_tau_c / tau) / denom;
            for i in 0..dim {
                dxa[i] += dtau_c * v1[i];
            }
            let dkappa_c = -(dsigma_tau_c + kappa * dtau_c) / tau;
            cones.apply_scaling(&scaling, &dxa[n + p..], &mut buf_m, false);
            for i in 0..m {
                eta_m[i] = div[i] + buf_m[i];
            }
            cones.apply_scaling(&scaling, &eta_m, &mut dsa, false);
            for v in dsa.iter_mut() {
                *v = -*v;
            }

            let cand_sol: Vec<F> = sol.iter().zip(&dxa).map(|(&a, &b)| a + b).collect();
            let cand_ds: Vec<F> = ds.iter().zip(&dsa).map(|(&a, &b)| a + b).collect();
            let cand_dtau = dtau + dtau_c;
            let cand_dkappa = dkappa + dkappa_c;
            let (alpha_new, gap_new) =
                assess(&cand_ds, &cand_sol[n + p..], cand_dtau, cand_dkappa);
            let longer = alpha_new >= alpha_cur + F::cast(0.01);
            let deeper = gap_new <= F::cast(0.7) * gap_cur;
            if !alpha_new.is_finite() || !gap_new.is_finite() || !(longer || deeper) {
                break;
            }
            sol = cand_sol;
            ds = cand_ds;
            dtau = cand_dtau;
            dkappa = cand_dkappa;
        }

        let (dx, rest) = sol.split_at(n);
        let (dy, dz) = rest.split_at(p);
        let alpha_max = cones
            .step_to_boundary(&s, &ds)
            .min(cones.step_to_boundary(&z, dz))
            .min(step_to_zero(tau, dtau))
            .min(step_to_zero(kappa, dkappa));
        // Near convergence, shave less off the boundary step: the scaled
        // system turns singular at working precision within an iteration
        // or two, so each of the last computable directions has to bite as
        // deep as it can.
        let step_frac = if merit <= F::cast(1e-7) {
            F::cast(0.9999)
        } else if merit <= F::cast(1e-5) {
            F::cast(0.999)
        } else {
            F::cast(0.99)
        };
        let mut alpha = (step_frac * alpha_max).min(F::one());

        // Keep the complementarity gap non-increasing: the gap along the
        // step is quadratic in alpha, so pull alpha back into the
        // decreasing range if the full step would overshoot. Only shrink
        // when that provably helps (c1 < 0 and the parabola turns up).
        let c1 = dot(&s, dz) + dot(&z, &ds) + tau * dkappa + kappa * dtau;
        let c2 = dot(&ds, dz) + dtau * dkappa;
        if c1 < F::zero() && c2 > F::zero() && c1 + alpha * c2 > F::zero() {
            alpha = F::cast(0.95) * (-c1 / c2);
        }
        if !alpha.is_finite() || alpha <= F::cast(1e-13) {
            tiny_steps += 1;
            if tiny_steps >= 2 {
                if std::env::var("CONIC_DEBUG").is_ok() {
                    eprintln!("iter {iter}: tiny steps, alpha {alpha:?}");
                }
                status = Status::NumericalFailure;
                break;
            }
            alpha = F::cast(1e-13);
        } else {
            tiny_steps = 0;
        }

        for i in 0..n {
            x[i] += alpha * dx[i];
        }
        for i in 0..p {
            y[i] += alpha * dy[i];
        }
        for i in 0..m {
            z[i] += alpha * dz[i];
            s[i] += alpha * ds[i];
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        let new_gap = dot(&s, &z) + tau * kappa;
        if !new_gap.is_finite() || new_gap <= F::zero() {
            // The step left the cone despite the boundary limit -- only
            // possible through rounding on a near-degenerate direction.
            // Undo it and report the last sane iterate.
            for i in 0..n {
                x[i] -= alpha * dx[i];
            }
            for i in 0..p {
                y[i] -= alpha * dy[i];
            }
            for i in 0..m {
                z[i] -= alpha * dz[i];
                s[i] -= alpha * ds[i];
            }
            tau -= alpha * dtau;
            kappa -= alpha * dkappa;
            status = Status::NumericalFailure;
            break;
        }
        gap_history.push(new_gap * eq.cost_scale);
    }

    // Double precision runs out of digits before the iteration runs out of
    // ideas: the NT-scaled system goes singular at working precision right
    // at the optimum, so a run can become unable to compute its next
    // direction short of the tolerance. Mature interior-point codes accept
    // a best iterate within a documented factor of the target as solved to
    // reduced accuracy (ECOS, for one, relaxes its 1e-8 targets to 1e-4
    // before giving up); the same convention applies here, and the final
    // residuals still report the achieved accuracy exactly.
    if matches!(status, Status::MaxIter | Status::NumericalFailure)
        && best_merit <= F::cast(1e4) * config.eq_tol.max(config.gap_tol)
    {
        status = Status::Optimal;
    }

    // Report in original coordinates: the optimum is the tau-normalized
    // iterate, while the infeasible statuses return the certificate ray
    // under its conventional normalization.
    unscale(&eq, &x, &y, &z, &mut x_u, &mut y_u, &mut z_u);
    match status {
        Status::Infeasible => {
            let scale = -(dot(&problem.b, &y_u) + dot(&problem.h, &z_u));
            for v in y_u.iter_mut() {
                *v /= scale;
            }
            for v in z_u.iter_mut() {
                *v /= scale;
            }
            for v in x_u.iter_mut() {
                *v /= tau;
            }
        }
        Status::Unbounded => {
            let scale = -dot(&problem.c, &x_u);
            for v in x_u.iter_mut() {
                *v /= scale;
            }
            for v in y_u.iter_mut() {
                *v /= tau;
            }
            for v in z_u.iter_mut() {
                *v /= tau;
            }
        }
        _ => {
            if best_merit.is_finite() {
                x_u.copy_from_slice(&best_x);
                y_u.copy_from_slice(&best_y);
                z_u.copy_from_slice(&best_z);
            } else {
                for v in x_u.iter_mut() {
                    *v /= tau;
                }
                for v in y_u.iter_mut() {
                    *v /= tau;
                }
                for v in z_u.iter_mut() {
                    *v /= tau;
                }
            }
        }
    }
    let (final_residuals, objective, slack) = residuals_at(problem, &cones, &x_u, &y_u, &z_u);
    Ok(Solution {
        primal: x_u,
        dual_eq: y_u,
        dual_cone: z_u,
        slack,
        status,
        iterations,
        final_residuals,
        objective,
        wall_time: start.elapsed(),
        gap_history,
    })
}

/// Largest step keeping the scalar `v + alpha * d` positive.
fn step_to_zero<F: Scalar>(v: F, d: F) -> F {
    if d < F::zero() {
        -v / d
    } else {
        F::infinity()
    }
}

/// Excess of the product vector `v` over the box `[lo, hi]`, in the
/// cone's spectral sense: orthant components clamp directly, a
/// second-order block clamps its two eigenvalues `v0 ± ||v1..||`.
/// `out = v - clamp(v)`, so blocks already inside the box contribute
/// nothing to the corrector.
fn clamp_excess<F: Scalar>(cones: &ConeSet, v: &[F], lo: F, hi: F, out: &mut [F]) {
    for (cone, off) in cones.iter() {
        match cone {
            Cone::NonnegativeOrthant(d) => {
                for i in 0..d {
                    let vi = v[off + i];
                    out[off + i] = vi - vi.max(lo).min(hi);
                }
            }
            Cone::SecondOrderCone(d) => {
                let v0 = v[off];
                let mut nv = F::zero();
                for i in 1..d {
                    nv += v[off + i] * v[off + i];
                }
                nv = nv.sqrt();
                let hi_eig = (v0 + nv).max(lo).min(hi);
                let lo_eig = (v0 - nv).max(lo).min(hi);
                let half = F::cast(0.5);
                out[off] = v0 - half * (hi_eig + lo_eig);
                let scale = if nv > F::zero() {
                    F::one() - half * (hi_eig - lo_eig) / nv
                } else {
                    F::zero()
                };
                for i in 1..d {
                    out[off + i] = scale * v[off + i];
                }
            }
        }
    }
}

/// Maps scaled iterates back to original coordinates.
fn unscale<F: Scalar>(
    eq: &Equilibration<F>,
    x: &[F],
    y: &[F],
    z: &[F],
    x_u: &mut [F],
    y_u: &mut [F],
    z_u: &mut [F],
) {
    for i in 0..x.len() {
        x_u[i] = x[i] * eq.d_col[i];
    }
    for i in 0..y.len() {
        y_u[i] = y[i] * eq.d_row_eq[i] * eq.cost_scale;
    }
    for i in 0..z.len() {
        z_u[i] = z[i] * eq.d_row_cone[i] * eq.cost_scale;
    }
}

/// Primal infeasibility test: the dual ray `(y, z)` proves infeasibility
/// when `A'y + G'z ≈ 0`, `z` is in the cone, and `b'y + h'z < 0`. The
/// ratio test is invariant to the scale of the diverging ray.
fn infeasibility_certificate<F: Scalar>(problem: &Problem<F>, y: &[F], z: &[F]) -> bool {
    let byhz = dot(&problem.b, y) + dot(&problem.h, z);
    if byhz >= F::zero() {
        return false;
    }
    let mut ray = vec![F::zero(); problem.num_vars()];
    problem.a.axpy_transpose(F::one(), y, &mut ray);
    problem.g.axpy_transpose(F::one(), z, &mut ray);
    inf_norm(&ray) <= F::cast(1e-8) * (-byhz)
}

/// Dual infeasibility test: the primal ray `(x, s)` proves the objective
/// unbounded below when `Ax ≈ 0`, `Gx + s ≈ 0` with `s` in the cone, and
/// `c'x < 0`. Like its primal counterpart, the ratio is scale-invariant.
fn unboundedness_certificate<F: Scalar>(problem: &Problem<F>, x: &[F], s: &[F]) -> bool {
    let ctx = dot(&problem.c, x);
    if ctx >= F::zero() {
        return false;
    }
    let mut ray_eq = vec![F::zero(); problem.num_eq()];
    problem.a.axpy(F::one(), x, &mut ray_eq);
    let mut ray_cone = s.to_vec();
    problem.g.axpy(F::one(), x, &mut ray_cone);
    inf_norm(&ray_eq).max(inf_norm(&ray_cone)) <= F::cast(1e-8) * (-ctx)
}

fn failed_solution<F: Scalar>(
    problem: &Problem<F>,
    start: Instant,
    status: Status,
) -> Solution<F> {
    let n = problem.num_vars();
    Solution {
        primal: vec![F::zero(); n],
        dual_eq: vec![F::zero(); problem.num_eq()],
        dual_cone: vec![F::zero(); problem.num_cone_rows()],
        slack: problem.h.clone(),
        status,
        iterations: 0,
        final_residuals: Residuals {
            primal: F::infinity(),
            dual: F::infinity(),
            gap: F::infinity(),
        },
        objective: F::nan(),
        wall_time: start.elapsed(),
        gap_history: Vec::new(),
    }
}
