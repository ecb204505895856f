use faer::{Mat, MatRef};

use crate::error::{Error, Result};

/// Label of the computational basis in which sampled and assembled operators
/// are expressed.
pub const COMPUTATIONAL_BASIS: &str = "computational";

/// A real symmetric matrix together with the label of the basis it is
/// written in.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    matrix: Mat<f64>,
    basis: String,
}

impl HermitianOperator {
    /// Wraps `matrix`, rejecting non-square input and relative asymmetry above
    /// `tolerance`.
    pub fn new(matrix: Mat<f64>, basis: impl Into<String>, tolerance: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let (asymmetry, scale) = asymmetry(matrix.as_ref());
        if asymmetry > tolerance * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric { asymmetry, scale });
        }
        Ok(Self { matrix, basis: basis.into() })
    }

    /// Wraps `matrix` after replacing it by `(M + Mᵀ)/2`, which is exactly
    /// symmetric in floating point.
    pub fn symmetrized(mut matrix: Mat<f64>, basis: impl Into<String>) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.ncols() });
        }
        for j in 0..n {
            for i in (j + 1)..n {
                let m = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
                matrix[(i, j)] = m;
                matrix[(j, i)] = m;
            }
        }
        Ok(Self { matrix, basis: basis.into() })
    }

    pub fn from_diagonal(values: &[f64], basis: impl Into<String>) -> Self {
        let n = values.len();
        let matrix = Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 });
        Self { matrix, basis: basis.into() }
    }

    /// Builds an operator from row-major data.
    pub fn from_row_major(
        dim: usize,
        data: &[f64],
        basis: impl Into<String>,
        tolerance: f64,
    ) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        Self::new(Mat::from_fn(dim, dim, |i, j| data[i * dim + j]), basis, tolerance)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn basis(&self) -> &str {
        &self.basis
    }

    pub fn with_basis(mut self, basis: impl Into<String>) -> Self {
        self.basis = basis.into();
        self
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<f64> {
        self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// Returns `(max |M_ij - M_ji|, max |M_ij|)`.
    pub fn asymmetry(&self) -> (f64, f64) {
        asymmetry(self.matrix.as_ref())
    }

    pub fn row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.matrix[(i, j)]);
            }
        }
        out
    }

    /// `M v` for a real vector.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
        let mut out = vec![0.0; n];
        // column-major storage: accumulate column by column
        for (j, &vj) in v.iter().enumerate() {
            if vj == 0.0 {
                continue;
            }
            let col = self.matrix.col(j);
            for (i, o) in out.iter_mut().enumerate() {
                *o += col[i] * vj;
            }
        }
        Ok(out)
    }

    /// Returns `c · M`.
    pub fn scaled(&self, c: f64) -> Self {
        let n = self.dim();
        Self { matrix: Mat::from_fn(n, n, |i, j| c * self.matrix[(i, j)]), basis: self.basis.clone() }
    }

    /// Expresses the operator in a rotated basis: `Uᵀ M U`, symmetrized.
    pub fn rotated(&self, u: MatRef<'_, f64>, basis: impl Into<String>) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: u.nrows() });
        }
        let tmp = self.matrix.as_ref() * u;
        let rotated = u.transpose() * &tmp;
        Self::symmetrized(rotated, basis)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.matrix[(i, j)] == 0.0))
    }
}

fn asymmetry(m: MatRef<'_, f64>) -> (f64, f64) {
    let n = m.nrows();
    let mut asym = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            scale = scale.max(m[(i, j)].abs());
            if i > j {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
    }
    (asym, scale)
}
