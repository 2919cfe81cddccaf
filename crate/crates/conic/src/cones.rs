//! Cone-wise algebra for the interior-point iteration: Nesterov–Todd
//! scalings, Jordan-algebra products, interior shifts and boundary step
//! lengths, over a product of nonnegative orthants and second-order cones.

use crate::program::Cone;
use crate::scalar::Scalar;

/// Product cone with precomputed slice offsets into the `m`-dimensional
/// slack/dual vectors.
#[derive(Debug, Clone)]
pub struct ConeSet {
    cones: Vec<Cone>,
    offsets: Vec<usize>,
    dim: usize,
    degree: usize,
}

/// Nesterov–Todd scaling block for one cone.
///
/// For the orthant the scaling matrix is `diag(w)` with `w_i = sqrt(s_i/z_i)`.
/// For a second-order cone it is `sqrt(eta) * V(wbar)` where `wbar` is a
/// unit hyperbolic vector (`wbar' J wbar = 1`) and
/// `V = [[a, b'], [b, I + b b'/(1+a)]]` with `a = wbar[0]`, `b = wbar[1..]`;
/// `V^2 = 2 wbar wbar' - J`, so `W^2 z = s` holds by construction.
#[derive(Debug, Clone)]
pub enum ScalingBlock<F> {
    Orthant { w: Vec<F> },
    Soc { eta: F, wbar: Vec<F> },
}

/// Full NT scaling: one block per cone plus the scaled point
/// `lambda = W z = W^{-1} s`.
#[derive(Debug, Clone)]
pub struct Scaling<F> {
    pub blocks: Vec<ScalingBlock<F>>,
    pub lambda: Vec<F>,
}

impl ConeSet {
    pub fn new(cones: &[Cone]) -> Self {
        let mut offsets = Vec::with_capacity(cones.len());
        let mut dim = 0;
        let mut degree = 0;
        for k in cones {
            offsets.push(dim);
            dim += k.dim();
            degree += match k {
                Cone::NonnegativeOrthant(d) => *d,
                Cone::SecondOrderCone(_) => 1,
            };
        }
        ConeSet {
            cones: cones.to_vec(),
            offsets,
            dim,
            degree,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Barrier degree: orthant dimensions count fully, each second-order
    /// cone counts once. Normalizes the complementarity gap.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cone, usize)> + '_ {
        self.cones.iter().copied().zip(self.offsets.iter().copied())
    }

    /// Smallest cone eigenvalue of `v`: per orthant component the value
    /// itself, per second-order cone `v0 - ||v1..||`. Positive iff `v` is
    /// in the interior of the product cone.
    pub fn min_eigenvalue<F: Scalar>(&self, v: &[F]) -> F {
        let mut me = F::infinity();
        for (cone, off) in self.iter() {
            match cone {
                Cone::NonnegativeOrthant(d) => {
                    for i in 0..d {
                        me = me.min(v[off + i]);
                    }
                }
                Cone::SecondOrderCone(d) => {
                    let tail = norm2(&v[off + 1..off + d]);
                    me = me.min(v[off] - tail);
                }
            }
        }
        me
    }

    /// Shifts `v` along the cone identity so it lands strictly inside the
    /// cone; used to turn the least-squares initial point into a valid
    /// interior iterate.
    pub fn shift_to_interior<F: Scalar>(&self, v: &mut [F]) {
        let me = self.min_eigenvalue(v);
        if me <= F::zero() {
            let shift = F::one() - me;
            self.add_identity(shift, v);
        }
    }

    /// `v += alpha * e`, where `e` is the cone identity element.
    pub fn add_identity<F: Scalar>(&self, alpha: F, v: &mut [F]) {
        for (cone, off) in self.iter() {
            match cone {
                Cone::NonnegativeOrthant(d) => {
                    for i in 0..d {
                        v[off + i] += alpha;
                    }
                }
                Cone::SecondOrderCone(_) => v[off] += alpha,
            }
        }
    }

    /// Computes the NT scaling for an interior pair `(s, z)`. Returns
    /// `None` when either point is numerically outside the cone, which the
    /// solver treats as a numerical failure.
    pub fn nt_scaling<F: Scalar>(&self, s: &[F], z: &[F]) -> Option<Scaling<F>> {
        let mut blocks = Vec::with_capacity(self.cones.len());
        let mut lambda = vec![F::zero(); self.dim];
        for (cone, off) in self.iter() {
            match cone {
                Cone::NonnegativeOrthant(d) => {
                    let mut w = vec![F::zero(); d];
                    for i in 0..d {
                        let (si, zi) = (s[off + i], z[off + i]);
                        if si <= F::zero() || zi <= F::zero() {
                            return None;
                        }
                        w[i] = (si / zi).sqrt();
                        lambda[off + i] = (si * zi).sqrt();
                    }
                    blocks.push(ScalingBlock::Orthant { w });
                }
                Cone::SecondOrderCone(d) => {
                    let sv = &s[off..off + d];
                    let zv = &z[off..off + d];
                    let sres = jdot(sv, sv);
                    let zres = jdot(zv, zv);
                    if sres <= F::zero() || zres <= F::zero() || sv[0] <= F::zero() || zv[0] <= F::zero()
                    {
                        return None;
                    }
                    let snorm = sres.sqrt();
                    let znorm = zres.sqrt();
                    // gamma^2 = (1 + s~'z~) / 2 with normalized points.
                    let sz = dot(sv, zv) / (snorm * znorm);
                    let gamma = ((F::one() + sz) * F::half()).sqrt();
                    let mut wbar = vec![F::zero(); d];
                    let inv = (F::two() * gamma).recip();
                    wbar[0] = (sv[0] / snorm + zv[0] / znorm) * inv;
                    for i in 1..d {
                        wbar[i] = (sv[i] / snorm - zv[i] / znorm) * inv;
                    }
                    let eta = snorm / znorm;
                    let block = ScalingBlock::Soc { eta, wbar };
                    apply_block(&block, zv, &mut lambda[off..off + d], false);
                    blocks.push(block);
                }
            }
        }
        Some(Scaling { blocks, lambda })
    }

    /// `out = W v` (or `W^{-1} v` when `inverse`), blockwise.
    pub fn apply_scaling<F: Scalar>(
        &self,
        scaling: &Scaling<F>,
        v: &[F],
        out: &mut [F],
        inverse: bool,
    ) {
        for (idx, (cone, off)) in self.iter().enumerate() {
            let d = cone.dim();
            apply_block(&scaling.blocks[idx], &v[off..off + d], &mut out[off..off + d], inverse);
        }
    }

    /// Jordan product `out = a o b`, blockwise.
    pub fn product<F: Scalar>(&self, a: &[F], b: &[F], out: &mut [F]) {
        for (cone, off) in self.iter() {
            match cone {
                Cone::NonnegativeOrthant(d) => {
                    for i in 0..d {
                        out[off + i] = a[off + i] * b[off + i];
                    }
                }
                Cone::SecondOrderCone(d) => {
                    let av = &a[off..off + d];
                    let bv = &b[off..off + d];
                    out[off] = dot(av, bv);
                    for i in 1..d {
                        out[off + i] = av[0] * bv[i] + bv[0] * av[i];
                    }
                }
            }
        }
    }

    /// Solves `lambda o u = d` for `u`, blockwise (`out = lambda \ d`).
    pub fn divide<F: Scalar>(&self, lambda: &[F], d_vec: &[F], out: &mut [F]) {
        for (cone, off) in self.iter() {
            match cone {
                Cone::NonnegativeOrthant(d) => {
                    for i in 0..d {
                        out[off + i] = d_vec[off + i] / lambda[off + i];
                    }
                }
                Cone::SecondOrderCone(d) => {
                    let lv = &lambda[off..off + d];
                    let dv = &d_vec[off..off + d];
                    let det = jdot(lv, lv);
                    let tail = dot(&lv[1..], &dv[1..]);
                    let u0 = (lv[0] * dv[0] - tail) / det;
                    out[off] = u0;
                    for i in 1..d {
                        out[off + i] = (dv[i] - u0 * lv[i]) / lv[0];
                    }
                }
            }
        }
    }

    /// Largest step `alpha` with `v + alpha * dv` still in the cone
    /// (possibly infinite). `v` must be interior.
    pub fn step_to_boundary<F: Scalar>(&self, v: &[F], dv: &[F]) -> F {
        let mut alpha = F::infinity();
        for (cone, off) in self.iter() {
            match cone {
                Cone::NonnegativeOrthant(d) => {
                    for i in 0..d {
                        if dv[off + i] < F::zero() {
                            alpha = alpha.min(-v[off + i] / dv[off + i]);
                        }
                    }
                }
                Cone::SecondOrderCone(d) => {
                    let vv = &v[off..off + d];
                    let dd = &dv[off..off + d];
                    // (v0+a d0)^2 - ||v1+a d1||^2 >= 0 is quadratic in a
                    // with positive value at a = 0; the feasible steps form
                    // an interval whose right edge we want.
                    let qa = jdot(dd, dd);
                    let qb = F::two() * (vv[0] * dd[0] - dot(&vv[1..], &dd[1..]));
                    let qc = jdot(vv, vv);
                    if let Some(root) = smallest_positive_root(qa, qb, qc) {
                        alpha = alpha.min(root);
                    }
                    if dd[0] < F::zero() {
                        alpha = alpha.min(-vv[0] / dd[0]);
                    }
                }
            }
        }
        alpha
    }
}

/// `sum(a_i b_i)`.
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm2<F: Scalar>(v: &[F]) -> F {
    dot(v, v).sqrt()
}

/// Hyperbolic inner product `a' J b = a0 b0 - a1' b1`.
fn jdot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a[0] * b[0] - dot(&a[1..], &b[1..])
}

/// Applies one scaling block: `out = W v` or `out = W^{-1} v`.
///
/// For the second-order block, `W^{-1}` only flips the sign of the
/// off-diagonal `wbar` part and inverts `eta` (Lorentz-boost inverse).
fn apply_block<F: Scalar>(block: &ScalingBlock<F>, v: &[F], out: &mut [F], inverse: bool) {
    match block {
        ScalingBlock::Orthant { w } => {
            for i in 0..v.len() {
                out[i] = if inverse { v[i] / w[i] } else { v[i] * w[i] };
            }
        }
        ScalingBlock::Soc { eta, wbar } => {
            let a = wbar[0];
            let sgn = if inverse { -F::one() } else { F::one() };
            let scale = if inverse { eta.sqrt().recip() } else { eta.sqrt() };
            let bv = dot(&wbar[1..], &v[1..]);
            out[0] = scale * (a * v[0] + sgn * bv);
            let coef = sgn * v[0] + bv / (F::one() + a);
            for i in 1..v.len() {
                out[i] = scale * (v[i] + coef * wbar[i]);
            }
        }
    }
}

/// `W^2` of one second-order block as a dense symmetric matrix in
/// row-major lower-triangle order; the KKT assembly scatters these entries.
/// `W^2 = eta (2 wbar wbar' - J)`.
pub fn soc_w_squared<F: Scalar>(eta: F, wbar: &[F], out: &mut Vec<F>) {
    out.clear();
    let d = wbar.len();
    for i in 0..d {
        for j in 0..=i {
            let jij = if i != j {
                F::zero()
            } else if i == 0 {
                F::one()
            } else {
                -F::one()
            };
            out.push(eta * (F::two() * wbar[i] * wbar[j] - jij));
        }
    }
}

/// Smallest positive root of `a x^2 + b x + c = 0`, computed with the
/// numerically stable split; `None` when no positive root exists.
fn smallest_positive_root<F: Scalar>(a: F, b: F, c: F) -> Option<F> {
    let eps = F::epsilon();
    if a.abs() < eps * eps {
        // Effectively linear.
        if b < F::zero() {
            let r = -c / b;
            return (r > F::zero()).then_some(r);
        }
        return None;
    }
    let disc = b * b - F::cast(4.0) * a * c;
    if disc < F::zero() {
        return None;
    }
    let sq = disc.sqrt();
    let q = -(b + b.signum() * sq) * F::half();
    let mut roots = [q / a, if q != F::zero() { c / q } else { F::nan() }];
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    roots
        .into_iter()
        .find(|r| r.is_finite() && *r > F::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_interior(rng: &mut ChaCha8Rng, set: &ConeSet) -> Vec<f64> {
        let mut v = vec![0.0; set.dim()];
        for (cone, off) in set.iter() {
            match cone {
                Cone::NonnegativeOrthant(d) => {
                    for i in 0..d {
                        v[off + i] = rng.gen_range(0.1..10.0);
                    }
                }
                Cone::SecondOrderCone(d) => {
                    let mut tail = 0.0f64;
                    for i in 1..d {
                        v[off + i] = rng.gen_range(-3.0..3.0);
                        tail += v[off + i] * v[off + i];
                    }
                    v[off] = tail.sqrt() + rng.gen_range(0.1..5.0);
                }
            }
        }
        v
    }

    fn test_set() -> ConeSet {
        ConeSet::new(&[
            Cone::NonnegativeOrthant(4),
            Cone::SecondOrderCone(3),
            Cone::SecondOrderCone(5),
        ])
    }

    #[test]
    fn nt_scaling_maps_z_to_s() {
        let set = test_set();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let s = sample_interior(&mut rng, &set);
            let z = sample_interior(&mut rng, &set);
            let sc = set.nt_scaling(&s, &z).expect("interior pair");
            // lambda = W z must also equal W^{-1} s.
            let mut winv_s = vec![0.0; set.dim()];
            set.apply_scaling(&sc, &s, &mut winv_s, true);
            for i in 0..set.dim() {
                assert_relative_eq!(sc.lambda[i], winv_s[i], max_relative = 1e-10);
            }
            // W (W z) = s.
            let mut wz = vec![0.0; set.dim()];
            set.apply_scaling(&sc, &sc.lambda, &mut wz, false);
            for i in 0..set.dim() {
                assert_relative_eq!(wz[i], s[i], max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn soc_w_squared_matches_double_application() {
        let set = ConeSet::new(&[Cone::SecondOrderCone(3)]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = sample_interior(&mut rng, &set);
        let z = sample_interior(&mut rng, &set);
        let sc = set.nt_scaling(&s, &z).unwrap();
        let ScalingBlock::Soc { eta, wbar } = &sc.blocks[0] else {
            panic!("expected second-order block");
        };
        let mut packed = Vec::new();
        soc_w_squared(*eta, wbar, &mut packed);
        // Apply W twice to each basis vector and compare entries.
        for j in 0..3 {
            let mut e = vec![0.0; 3];
            e[j] = 1.0;
            let mut we = vec![0.0; 3];
            let mut wwe = vec![0.0; 3];
            set.apply_scaling(&sc, &e, &mut we, false);
            set.apply_scaling(&sc, &we, &mut wwe, false);
            for i in j..3 {
                let idx = i * (i + 1) / 2 + j;
                assert_relative_eq!(packed[idx], wwe[i], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn jordan_divide_inverts_product() {
        let set = test_set();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lambda = sample_interior(&mut rng, &set);
        let d: Vec<f64> = (0..set.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut quot = vec![0.0; set.dim()];
        set.divide(&lambda, &d, &mut quot);
        let mut back = vec![0.0; set.dim()];
        set.product(&lambda, &quot, &mut back);
        for i in 0..set.dim() {
            assert_relative_eq!(back[i], d[i], epsilon = 1e-12, max_relative = 1e-10);
        }
    }

    #[test]
    fn boundary_step_lands_on_boundary() {
        let set = test_set();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let v = sample_interior(&mut rng, &set);
            let dv: Vec<f64> = (0..set.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let alpha = set.step_to_boundary(&v, &dv);
            if alpha.is_finite() {
                let at: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a + alpha * b).collect();
                assert!(set.min_eigenvalue(&at).abs() < 1e-8, "not on boundary");
                let inside: Vec<f64> =
                    v.iter().zip(&dv).map(|(a, b)| a + 0.99 * alpha * b).collect();
                assert!(set.min_eigenvalue(&inside) > 0.0, "0.99 step left the cone");
            }
        }
    }

    #[test]
    fn identity_shift_enters_interior() {
        let set = test_set();
        let mut v = vec![0.0; set.dim()];
        v[5] = -4.0; // make the first soc badly infeasible
        set.shift_to_interior(&mut v);
        assert!(set.min_eigenvalue(&v) > 0.0);
    }

    #[test]
    fn degree_counts_orthant_fully_and_socs_once() {
        assert_eq!(test_set().degree(), 4 + 1 + 1);
        assert_eq!(test_set().dim(), 12);
    }
}
