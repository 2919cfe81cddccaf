//! Ruiz equilibration of the problem data. Iteratively scales rows and
//! columns of the stacked constraint matrix `[A; G]` toward unit infinity
//! norm, which flattens the wide range of magnitudes the velocity-planning
//! programs produce (squared speeds near 2000 next to reciprocal-speed
//! epigraph rows near 0.02).
//!
//! Rows belonging to one second-order cone must share a single factor,
//! otherwise the scaled slack would live in a different cone; the block
//! takes the largest row norm among its rows.

use crate::cones::ConeSet;
use crate::program::{Cone, Problem};
use crate::scalar::Scalar;

/// Diagonal scaling of a problem, with everything needed to map a scaled
/// solution back to the original coordinates.
#[derive(Debug, Clone)]
pub struct Equilibration<F> {
    /// Column scale: `x = d_col .* x_scaled`.
    pub d_col: Vec<F>,
    /// Equality row scale: `y = cost_scale * d_row_eq .* y_scaled`.
    pub d_row_eq: Vec<F>,
    /// Cone row scale: `z = cost_scale * d_row_cone .* z_scaled`,
    /// `s = s_scaled ./ d_row_cone`.
    pub d_row_cone: Vec<F>,
    /// Extra uniform factor pulled out of the objective.
    pub cost_scale: F,
}

impl<F: Scalar> Equilibration<F> {
    pub fn identity(n: usize, p: usize, m: usize) -> Self {
        Equilibration {
            d_col: vec![F::one(); n],
            d_row_eq: vec![F::one(); p],
            d_row_cone: vec![F::one(); m],
            cost_scale: F::one(),
        }
    }
}

/// Scales `problem` in place and returns the applied equilibration.
/// `rounds` of Ruiz iteration are enough at 3-10; the caller passes the
/// cone layout so second-order blocks stay uniform.
pub fn ruiz<F: Scalar>(problem: &mut Problem<F>, cones: &ConeSet, rounds: usize) -> Equilibration<F> {
    let n = problem.num_vars();
    let p = problem.num_eq();
    let m = problem.num_cone_rows();
    let mut eq = Equilibration::identity(n, p, m);

    let clamp = |v: F| -> F {
        // Ignore empty rows/columns and keep factors bounded.
        if v <= F::cast(1e-12) {
            F::one()
        } else {
            v.max(F::cast(1e-8)).min(F::cast(1e8))
        }
    };

    for _ in 0..rounds {
        let mut col = vec![F::zero(); n];
        problem.a.col_inf_norms(&mut col);
        problem.g.col_inf_norms(&mut col);
        let mut row_eq = vec![F::zero(); p];
        problem.a.row_inf_norms(&mut row_eq);
        let mut row_cone = vec![F::zero(); m];
        problem.g.row_inf_norms(&mut row_cone);

        // One factor per second-order cone: take the block max.
        for (cone, off) in cones.iter() {
            if let Cone::SecondOrderCone(d) = cone {
                let mut mx = F::zero();
                for i in 0..d {
                    mx = mx.max(row_cone[off + i]);
                }
                for i in 0..d {
                    row_cone[off + i] = mx;
                }
            }
        }

        let col_s: Vec<F> = col.iter().map(|&v| clamp(v).sqrt().recip()).collect();
        let row_eq_s: Vec<F> = row_eq.iter().map(|&v| clamp(v).sqrt().recip()).collect();
        let row_cone_s: Vec<F> = row_cone.iter().map(|&v| clamp(v).sqrt().recip()).collect();

        problem.a.scale(&row_eq_s, &col_s);
        problem.g.scale(&row_cone_s, &col_s);
        for j in 0..n {
            eq.d_col[j] *= col_s[j];
        }
        for i in 0..p {
            eq.d_row_eq[i] *= row_eq_s[i];
        }
        for i in 0..m {
            eq.d_row_cone[i] *= row_cone_s[i];
        }
    }

    for j in 0..n {
        problem.c[j] *= eq.d_col[j];
    }
    for i in 0..p {
        problem.b[i] *= eq.d_row_eq[i];
    }
    for i in 0..m {
        problem.h[i] *= eq.d_row_cone[i];
    }

    // Normalize the cost so the duality-gap scale is data independent.
    let cmax = problem
        .c
        .iter()
        .fold(F::zero(), |acc, &v| acc.max(v.abs()));
    if cmax > F::cast(1e-12) {
        eq.cost_scale = cmax;
        for v in problem.c.iter_mut() {
            *v /= cmax;
        }
    }
    eq
}
