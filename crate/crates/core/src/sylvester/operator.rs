use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sylvester::Interval;

/// Relative size below which a shifted eigenvalue counts as zero.
const SINGULAR_REL: f64 = 1e-14;

/// Real normal operator stored through its eigendecomposition: either a
/// diagonal spectrum or a symmetric matrix `V Λ Vᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalOperator {
    eigenvalues: Vec<f64>,
    vectors: Option<Matrix>,
    interval: Interval,
}

impl NormalOperator {
    pub fn diagonal(values: Vec<f64>) -> Result<Self> {
        let interval = Interval::hull_of(&values)?;
        Ok(NormalOperator { eigenvalues: values, vectors: None, interval })
    }

    /// Eigendecomposition of a symmetric matrix.
    pub fn symmetric(m: &Matrix) -> Result<Self> {
        let n = m.rows();
        if m.cols() != n || n == 0 {
            return Err(Error::ShapeMismatch(format!("operator must be square, got {}x{}", n, m.cols())));
        }
        let asym = m.sub(&m.transpose())?.max_abs();
        if asym > 1e-12 * m.max_abs().max(1.0) {
            return Err(Error::InvalidArgument(format!("operator is not symmetric (defect {asym:.2e})")));
        }
        let eig = DMatrix::from_column_slice(n, n, m.as_slice()).symmetric_eigen();
        let vectors = Matrix::from_col_major(n, n, eig.eigenvectors.as_slice().to_vec())?;
        Self::from_eigen(eig.eigenvalues.iter().copied().collect(), vectors)
    }

    /// `V diag(values) Vᵀ` with orthonormal `V`.
    pub fn from_eigen(values: Vec<f64>, vectors: Matrix) -> Result<Self> {
        if vectors.rows() != values.len() || vectors.cols() != values.len() {
            return Err(Error::ShapeMismatch("eigenvector matrix does not match the spectrum".into()));
        }
        if vectors.orthonormality_defect() > 1e-10 {
            return Err(Error::InvalidArgument("eigenvectors are not orthonormal".into()));
        }
        let interval = Interval::hull_of(&values)?;
        Ok(NormalOperator { eigenvalues: values, vectors: Some(vectors), interval })
    }

    /// Replaces the spectral interval by a wider one.
    pub fn with_interval(mut self, interval: Interval) -> Result<Self> {
        if !interval.encloses(&self.interval) {
            return Err(Error::InvalidArgument(format!(
                "interval {interval} does not enclose the spectrum {}",
                self.interval
            )));
        }
        self.interval = interval;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> Option<&Matrix> {
        self.vectors.as_ref()
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn is_diagonal(&self) -> bool {
        self.vectors.is_none()
    }

    pub fn negated(&self) -> NormalOperator {
        NormalOperator {
            eigenvalues: self.eigenvalues.iter().map(|v| -v).collect(),
            vectors: self.vectors.clone(),
            interval: self.interval.negated(),
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::from_diagonal(&self.eigenvalues);
        if let Some(v) = &self.vectors {
            out = v.matmul(&out).and_then(|m| m.matmul_tr(v)).expect("square");
        }
        out
    }

    /// `A·X`.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.map_spectrum(x, |lam, v| Ok(lam * v))
    }

    /// `(A − qI)⁻¹ rhs`.
    pub fn shifted_solve(&self, q: f64, rhs: &Matrix) -> Result<Matrix> {
        let tiny = SINGULAR_REL * self.scale().max(q.abs());
        self.map_spectrum(rhs, |lam, v| {
            let den = lam - q;
            if den.abs() <= tiny {
                return Err(Error::SingularShift { shift: q });
            }
            Ok(v / den)
        })
    }

    /// Scalar operations of one [`Self::shifted_solve`] with `cols` columns.
    pub fn solve_cost(&self, cols: usize) -> u64 {
        let n = self.dim() as u64;
        let transform = if self.is_diagonal() { 0 } else { 4 * n * n };
        (transform + n) * cols as u64
    }

    pub(crate) fn scale(&self) -> f64 {
        self.interval.lo.abs().max(self.interval.hi.abs())
    }

    fn map_spectrum(&self, x: &Matrix, f: impl Fn(f64, f64) -> Result<f64>) -> Result<Matrix> {
        if x.rows() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "operator of size {} applied to {} rows",
                self.dim(),
                x.rows()
            )));
        }
        let mut y = match &self.vectors {
            Some(v) => v.tr_matmul(x)?,
            None => x.clone(),
        };
        for j in 0..y.cols() {
            for (v, &lam) in y.column_mut(j).iter_mut().zip(&self.eigenvalues) {
                *v = f(lam, *v)?;
            }
        }
        match &self.vectors {
            Some(v) => v.matmul(&y),
            None => Ok(y),
        }
    }
}

/// Solves `(I ⊗ A + B ⊗ I − qI) X = rhs` column by column, each column an
/// `n_A × n_B` matrix stored column-major, without forming the Kronecker sum.
pub fn kron_shifted_solve(a: &NormalOperator, b: &NormalOperator, q: f64, rhs: &Matrix) -> Result<Matrix> {
    let (n1, n2) = (a.dim(), b.dim());
    if rhs.rows() != n1 * n2 {
        return Err(Error::ShapeMismatch(format!("Kronecker solve of size {} with {} rows", n1 * n2, rhs.rows())));
    }
    let tiny = SINGULAR_REL * (a.scale() + b.scale()).max(q.abs());
    let mut out = Matrix::zeros(rhs.rows(), rhs.cols());
    for c in 0..rhs.cols() {
        let r = Matrix::from_col_major(n1, n2, rhs.column(c).to_vec())?;
        // to the joint eigenbasis: Uᵀ R V
        let mut t = match a.eigenvectors() {
            Some(u) => u.tr_matmul(&r)?,
            None => r,
        };
        if let Some(v) = b.eigenvectors() {
            t = t.matmul(v)?;
        }
        for (j, &beta) in b.eigenvalues().iter().enumerate() {
            for (i, &alpha) in a.eigenvalues().iter().enumerate() {
                let den = alpha + beta - q;
                if den.abs() <= tiny {
                    return Err(Error::SingularShift { shift: q });
                }
                t[(i, j)] /= den;
            }
        }
        if let Some(u) = a.eigenvectors() {
            t = u.matmul(&t)?;
        }
        if let Some(v) = b.eigenvectors() {
            t = t.matmul_tr(v)?;
        }
        out.column_mut(c).copy_from_slice(t.as_slice());
    }
    Ok(out)
}

/// Scalar operations of one [`kron_shifted_solve`] with `cols` columns.
pub fn kron_solve_cost(a: &NormalOperator, b: &NormalOperator, cols: usize) -> u64 {
    let (n1, n2) = (a.dim() as u64, b.dim() as u64);
    let mut per = n1 * n2;
    if !a.is_diagonal() {
        per += 4 * n1 * n1 * n2;
    }
    if !b.is_diagonal() {
        per += 4 * n1 * n2 * n2;
    }
    per * cols as u64
}
