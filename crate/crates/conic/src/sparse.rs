use crate::scalar::Scalar;
use crate::Error;

/// Compressed sparse column matrix.
///
/// The only operations the solver needs are construction from triplets,
/// `y += alpha * A * x`, `y += alpha * A' * x`, and column/row scaling, so
/// this stays deliberately small instead of pulling in a full sparse crate.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix<F> {
    nrows: usize,
    ncols: usize,
    /// Column pointers, `ncols + 1` entries.
    colptr: Vec<usize>,
    /// Row index of each stored entry, sorted within each column.
    rowind: Vec<usize>,
    values: Vec<F>,
}

impl<F: Scalar> CscMatrix<F> {
    /// Builds from unordered triplets; duplicate coordinates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, F)],
    ) -> Result<Self, Error> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidDimension(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols} matrix"
                )));
            }
        }
        // Count column occupancy, then fill with a cursor per column.
        let mut count = vec![0usize; ncols];
        for &(_, c, _) in triplets {
            count[c] += 1;
        }
        let mut colptr = vec![0usize; ncols + 1];
        for c in 0..ncols {
            colptr[c + 1] = colptr[c] + count[c];
        }
        let mut rowind = vec![0usize; triplets.len()];
        let mut values = vec![F::zero(); triplets.len()];
        let mut cursor = colptr.clone();
        for &(r, c, v) in triplets {
            rowind[cursor[c]] = r;
            values[cursor[c]] = v;
            cursor[c] += 1;
        }
        // Sort rows within each column and merge duplicates.
        let mut out_rowind = Vec::with_capacity(triplets.len());
        let mut out_values = Vec::with_capacity(triplets.len());
        let mut out_colptr = vec![0usize; ncols + 1];
        let mut scratch: Vec<(usize, F)> = Vec::new();
        for c in 0..ncols {
            scratch.clear();
            for k in colptr[c]..colptr[c + 1] {
                scratch.push((rowind[k], values[k]));
            }
            scratch.sort_by_key(|&(r, _)| r);
            let col_start = out_rowind.len();
            for &(r, v) in scratch.iter() {
                if out_rowind.len() > col_start && *out_rowind.last().unwrap() == r {
                    *out_values.last_mut().unwrap() += v;
                } else {
                    out_rowind.push(r);
                    out_values.push(v);
                }
            }
            out_colptr[c + 1] = out_rowind.len();
        }
        Ok(CscMatrix {
            nrows,
            ncols,
            colptr: out_colptr,
            rowind: out_rowind,
            values: out_values,
        })
    }

    /// All-zero matrix with no stored entries.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowind: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y += alpha * A * x`.
    pub fn axpy(&self, alpha: F, x: &[F], y: &mut [F]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for c in 0..self.ncols {
            let xc = alpha * x[c];
            if xc != F::zero() {
                for k in self.colptr[c]..self.colptr[c + 1] {
                    y[self.rowind[k]] += self.values[k] * xc;
                }
            }
        }
    }

    /// `y += alpha * A' * x`.
    pub fn axpy_transpose(&self, alpha: F, x: &[F], y: &mut [F]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for c in 0..self.ncols {
            let mut acc = F::zero();
            for k in self.colptr[c]..self.colptr[c + 1] {
                acc += self.values[k] * x[self.rowind[k]];
            }
            y[c] += alpha * acc;
        }
    }

    /// In-place `A <- diag(r) * A * diag(c)`.
    pub fn scale(&mut self, row_scale: &[F], col_scale: &[F]) {
        debug_assert_eq!(row_scale.len(), self.nrows);
        debug_assert_eq!(col_scale.len(), self.ncols);
        for c in 0..self.ncols {
            for k in self.colptr[c]..self.colptr[c + 1] {
                self.values[k] = self.values[k] * row_scale[self.rowind[k]] * col_scale[c];
            }
        }
    }

    /// Visits every stored entry as `(row, col, value)`.
    pub fn for_each(&self, mut visit: impl FnMut(usize, usize, F)) {
        for c in 0..self.ncols {
            for k in self.colptr[c]..self.colptr[c + 1] {
                visit(self.rowind[k], c, self.values[k]);
            }
        }
    }

    /// Infinity norm of each row.
    pub fn row_inf_norms(&self, out: &mut [F]) {
        debug_assert_eq!(out.len(), self.nrows);
        for c in 0..self.ncols {
            for k in self.colptr[c]..self.colptr[c + 1] {
                let a = self.values[k].abs();
                let r = self.rowind[k];
                if a > out[r] {
                    out[r] = a;
                }
            }
        }
    }

    /// Infinity norm of each column.
    pub fn col_inf_norms(&self, out: &mut [F]) {
        debug_assert_eq!(out.len(), self.ncols);
        for c in 0..self.ncols {
            for k in self.colptr[c]..self.colptr[c + 1] {
                let a = self.values[k].abs();
                if a > out[c] {
                    out[c] = a;
                }
            }
        }
    }
}
