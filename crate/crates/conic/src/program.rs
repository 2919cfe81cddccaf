use crate::scalar::Scalar;
use crate::sparse::CscMatrix;
use crate::Error;

/// One cone in the product making up the conic constraint.
///
/// The slack vector is partitioned in order: all `NonnegativeOrthant`
/// segments and `SecondOrderCone` segments appear exactly in the sequence
/// given by [`Problem::cones`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `s[k] >= 0` componentwise, `dim` components.
    NonnegativeOrthant(usize),
    /// `s[0] >= ||s[1..dim]||_2`.
    SecondOrderCone(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::NonnegativeOrthant(d) | Cone::SecondOrderCone(d) => d,
        }
    }
}

/// Conic program in standard form
///
/// ```text
///   minimize    c' x
///   subject to  A x = b
///               G x + s = h,   s in K
/// ```
///
/// where `K` is the product of the cones in `cones`, covering all `m` rows
/// of `G`.
#[derive(Debug, Clone)]
pub struct Problem<F> {
    pub c: Vec<F>,
    pub a: CscMatrix<F>,
    pub b: Vec<F>,
    pub g: CscMatrix<F>,
    pub h: Vec<F>,
    pub cones: Vec<Cone>,
}

impl<F: Scalar> Problem<F> {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_eq(&self) -> usize {
        self.b.len()
    }

    pub fn num_cone_rows(&self) -> usize {
        self.h.len()
    }

    /// Checks dimensional consistency; every solve runs this first.
    pub fn validate(&self) -> Result<(), Error> {
        let n = self.num_vars();
        let p = self.num_eq();
        let m = self.num_cone_rows();
        if self.a.nrows() != p || self.a.ncols() != n {
            return Err(Error::InvalidDimension(format!(
                "equality matrix is {}x{}, expected {p}x{n}",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.g.nrows() != m || self.g.ncols() != n {
            return Err(Error::InvalidDimension(format!(
                "cone matrix is {}x{}, expected {m}x{n}",
                self.g.nrows(),
                self.g.ncols()
            )));
        }
        let cone_dim: usize = self.cones.iter().map(|k| k.dim()).sum();
        if cone_dim != m {
            return Err(Error::InvalidDimension(format!(
                "cone dimensions sum to {cone_dim}, but the cone matrix has {m} rows"
            )));
        }
        for k in &self.cones {
            match *k {
                Cone::NonnegativeOrthant(d) if d == 0 => {
                    return Err(Error::InvalidDimension(
                        "zero-dimensional orthant cone".into(),
                    ))
                }
                Cone::SecondOrderCone(d) if d < 2 => {
                    return Err(Error::InvalidDimension(format!(
                        "second-order cone needs dimension >= 2, got {d}"
                    )))
                }
                _ => {}
            }
        }
        let finite = |v: &[F]| v.iter().all(|x| x.is_finite());
        if !finite(&self.c) || !finite(&self.b) || !finite(&self.h) {
            return Err(Error::InvalidDimension(
                "non-finite entry in problem data".into(),
            ));
        }
        let mut ok = true;
        self.a.for_each(|_, _, v| ok &= v.is_finite());
        self.g.for_each(|_, _, v| ok &= v.is_finite());
        if !ok {
            return Err(Error::InvalidDimension(
                "non-finite entry in problem matrices".into(),
            ));
        }
        Ok(())
    }

    /// Serializes the full problem in a plain-text triplet format for
    /// debugging and external cross-checks. Deterministic layout: header,
    /// then `c`, `b`, `h` as indexed lines, then `A` and `G` as
    /// `row col value` triplets in column-major order, then the cone list.
    pub fn dump_triplets(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "conic-program n={} p={} m={} nnz_a={} nnz_g={}",
            self.num_vars(),
            self.num_eq(),
            self.num_cone_rows(),
            self.a.nnz(),
            self.g.nnz()
        );
        for (i, v) in self.c.iter().enumerate() {
            let _ = writeln!(out, "c {i} {v:?}");
        }
        for (i, v) in self.b.iter().enumerate() {
            let _ = writeln!(out, "b {i} {v:?}");
        }
        for (i, v) in self.h.iter().enumerate() {
            let _ = writeln!(out, "h {i} {v:?}");
        }
        self.a.for_each(|r, c, v| {
            let _ = writeln!(out, "A {r} {c} {v:?}");
        });
        self.g.for_each(|r, c, v| {
            let _ = writeln!(out, "G {r} {c} {v:?}");
        });
        for k in &self.cones {
            match *k {
                Cone::NonnegativeOrthant(d) => {
                    let _ = writeln!(out, "cone orthant {d}");
                }
                Cone::SecondOrderCone(d) => {
                    let _ = writeln!(out, "cone soc {d}");
                }
            }
        }
        out
    }
}
