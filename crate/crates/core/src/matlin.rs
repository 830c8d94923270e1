//! Dense kernel for small real symmetric matrices.
//!
//! Everything downstream works with d x d blocks for d <= 16, so the kernel
//! favors robustness over asymptotics: eigendecomposition is cyclic Jacobi,
//! which is unconditionally stable for symmetric input, and all derived
//! operations (square roots, operator norms, generalized eigenvalue extremes,
//! the PSD order check) go through it.

use crate::error::{Error, Result};

/// Relative floor below which a matrix is rejected as not positive definite:
/// PD requires `lambda_min > PD_FLOOR_REL * lambda_max`.
pub const PD_FLOOR_REL: f64 = 1e-13;

const JACOBI_TOL_REL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 50;

/// General dense row-major matrix. Internal workhorse for non-symmetric
/// intermediates (conjugations, products of symmetric factors).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Matrix { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "vector length must match columns");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self.get(i, j) * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn frob(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    /// (A^T A) as a symmetric matrix; symmetric by construction up to rounding.
    pub fn gram(&self) -> SymMatrix {
        let t = self.transpose().matmul(self);
        SymMatrix::from_matrix(&t)
    }
}

/// Real symmetric d x d matrix, symmetrized at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds from row-major entries, enforcing symmetry as (M + M^T)/2.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("symmetric matrix entries"));
        }
        let mut m = SymMatrix { dim, data };
        m.symmetrize();
        Ok(m)
    }

    /// Maximum relative asymmetry |M - M^T| / max(1, ||M||_F) of raw entries.
    /// Callers that must reject asymmetric input check this before `new`.
    pub fn asymmetry(dim: usize, data: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        let mut frob = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let x = data[i * dim + j];
                frob += x * x;
                if j > i {
                    worst = worst.max((x - data[j * dim + i]).abs());
                }
            }
        }
        worst / frob.sqrt().max(1.0)
    }

    fn symmetrize(&mut self) {
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let avg = 0.5 * (self.data[i * self.dim + j] + self.data[j * self.dim + i]);
                self.data[i * self.dim + j] = avg;
                self.data[j * self.dim + i] = avg;
            }
        }
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let dim = values.len();
        let mut m = SymMatrix::zeros(dim);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * dim + i] = v;
        }
        m
    }

    /// Symmetrizes an (approximately symmetric) square matrix.
    pub fn from_matrix(m: &Matrix) -> Self {
        assert_eq!(m.rows(), m.cols(), "matrix must be square");
        let dim = m.rows();
        let mut s = SymMatrix {
            dim,
            data: m.data().to_vec(),
        };
        s.symmetrize();
        s
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        SymMatrix {
            dim: self.dim,
            data,
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        SymMatrix {
            dim: self.dim,
            data,
        }
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    /// Midpoint of two symmetric matrices, computed entrywise as (a + b)/2.
    pub fn midpoint(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        SymMatrix {
            dim: self.dim,
            data,
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, v.len());
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut acc = 0.0;
            for j in 0..self.dim {
                acc += self.data[i * self.dim + j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// <M v, v>.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mv = self.matvec(v);
        mv.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Product with another symmetric matrix; the result is general.
    pub fn mul_sym(&self, other: &SymMatrix) -> Matrix {
        self.to_matrix().matmul(&other.to_matrix())
    }

    pub fn frob(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    fn off_diagonal_frob(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    let x = self.data[i * self.dim + j];
                    acc += x * x;
                }
            }
        }
        acc.sqrt()
    }
}

/// Eigendecomposition of a symmetric matrix: ascending eigenvalues and the
/// matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomp {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    /// Rebuilds Q diag(values) Q^T.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        for k in 0..n {
            let lk = self.values[k];
            for i in 0..n {
                let qik = self.vectors.get(i, k);
                if qik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let v = out.get(i, j) + lk * qik * self.vectors.get(j, k);
                    out.set(i, j, v);
                }
            }
        }
        SymMatrix::from_matrix(&out)
    }

    /// ||Q^T Q - I||_F.
    pub fn orthonormality_residual(&self) -> f64 {
        let n = self.dim();
        let qtq = self.vectors.transpose().matmul(&self.vectors);
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                let diff = qtq.get(i, j) - target;
                acc += diff * diff;
            }
        }
        acc.sqrt()
    }

    /// Applies Q f(diag) Q^T for a spectral function f.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mapped = EigenDecomp {
            values: self.values.iter().map(|&l| f(l)).collect(),
            vectors: self.vectors.clone(),
        };
        mapped.reconstruct()
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Sweeps annihilate each off-diagonal entry in turn until the off-diagonal
/// Frobenius norm drops below `1e-14 * ||M||_F`, at most 50 sweeps.
pub fn eig_sym(m: &SymMatrix) -> Result<EigenDecomp> {
    let n = m.dim();
    if n == 0 {
        return Ok(EigenDecomp {
            values: vec![],
            vectors: Matrix::zeros(0, 0),
        });
    }
    let tol = JACOBI_TOL_REL * m.frob();
    let mut a = m.clone();
    let mut q = Matrix::identity(n);

    if n == 1 {
        return Ok(EigenDecomp {
            values: vec![a.get(0, 0)],
            vectors: q,
        });
    }

    let mut converged = a.off_diagonal_frob() <= tol;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        for p in 0..(n - 1) {
            for r in (p + 1)..n {
                let apr = a.get(p, r);
                if apr == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let arr = a.get(r, r);
                // Rotation angle per Golub & Van Loan (8.4).
                let theta = (arr - app) / (2.0 * apr);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Apply J^T A J on rows/columns p and r.
                for j in 0..n {
                    let ajp = a.get(j, p);
                    let ajr = a.get(j, r);
                    a.set_entry(j, p, c * ajp - s * ajr);
                    a.set_entry(j, r, s * ajp + c * ajr);
                }
                for j in 0..n {
                    let apj = a.get(p, j);
                    let arj = a.get(r, j);
                    a.set_entry(p, j, c * apj - s * arj);
                    a.set_entry(r, j, s * apj + c * arj);
                }
                // Force exact zero and symmetry at the pivot.
                a.set_sym(p, r, 0.0);
                for j in 0..n {
                    let qjp = q.get(j, p);
                    let qjr = q.get(j, r);
                    q.set(j, p, c * qjp - s * qjr);
                    q.set(j, r, s * qjp + c * qjr);
                }
            }
        }
        sweeps += 1;
        converged = a.off_diagonal_frob() <= tol;
    }
    if !converged {
        return Err(Error::EigenNoConvergence {
            sweeps,
            off_diag: a.off_diagonal_frob(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, new_col, q.get(i, old_col));
        }
    }
    Ok(EigenDecomp { values, vectors })
}

impl SymMatrix {
    // Single-entry write without mirroring; used mid-rotation where symmetry
    // is restored by the paired row/column update.
    #[inline]
    fn set_entry(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }
}

fn require_pd(eig: &EigenDecomp) -> Result<()> {
    let lambda_min = *eig.values.first().unwrap_or(&0.0);
    let lambda_max = *eig.values.last().unwrap_or(&0.0);
    if lambda_min <= PD_FLOOR_REL * lambda_max.abs() || lambda_min <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            lambda_min,
            lambda_max,
        });
    }
    Ok(())
}

/// True iff the spectrum clears the PD floor.
pub fn is_pd(m: &SymMatrix) -> Result<bool> {
    let eig = eig_sym(m)?;
    Ok(require_pd(&eig).is_ok())
}

/// Symmetric PD square root.
pub fn sqrt_spd(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = eig_sym(m)?;
    require_pd(&eig)?;
    Ok(eig.map_spectrum(f64::sqrt))
}

/// Symmetric PD inverse square root.
pub fn invsqrt_spd(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = eig_sym(m)?;
    require_pd(&eig)?;
    Ok(eig.map_spectrum(|l| 1.0 / l.sqrt()))
}

/// Inverse of a symmetric PD matrix through its spectrum.
pub fn inv_spd(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = eig_sym(m)?;
    require_pd(&eig)?;
    Ok(eig.map_spectrum(|l| 1.0 / l))
}

/// Operator (spectral) norm of a general matrix: largest singular value,
/// obtained as sqrt(lambda_max(M^T M)).
pub fn op_norm(m: &Matrix) -> Result<f64> {
    let gram = m.gram();
    let eig = eig_sym(&gram)?;
    let lmax = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    Ok(lmax.sqrt())
}

/// Operator norm of a symmetric matrix: max |eigenvalue|.
pub fn op_norm_sym(m: &SymMatrix) -> Result<f64> {
    let eig = eig_sym(m)?;
    let lo = eig.values.first().copied().unwrap_or(0.0);
    let hi = eig.values.last().copied().unwrap_or(0.0);
    Ok(lo.abs().max(hi.abs()))
}

/// S A S for symmetric S and A, symmetrized only after the full product.
pub fn conjugate_sym(s: &SymMatrix, a: &SymMatrix) -> SymMatrix {
    let sm = s.to_matrix();
    SymMatrix::from_matrix(&sm.matmul(&a.to_matrix()).matmul(&sm))
}

/// Extreme eigenvalues of A relative to a PD matrix B, i.e. of
/// B^{-1/2} A B^{-1/2}; equivalently extremal Rayleigh quotients
/// x^T A x / x^T B x.
pub fn gen_eig_extremes(a: &SymMatrix, b: &SymMatrix) -> Result<(f64, f64)> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: b.dim(),
            got: a.dim(),
        });
    }
    let w = invsqrt_spd(b)?;
    let eig = eig_sym(&conjugate_sym(&w, a))?;
    Ok((eig.values[0], eig.values[eig.values.len() - 1]))
}

/// PSD order check: A <= B up to `tol`, i.e.
/// lambda_min(B - A) >= -tol * max(1, ||B||).
pub fn psd_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: b.dim(),
            got: a.dim(),
        });
    }
    let diff = b.sub(a);
    let eig = eig_sym(&diff)?;
    let lambda_min = eig.values.first().copied().unwrap_or(0.0);
    let scale = op_norm_sym(b)?.max(1.0);
    Ok(lambda_min >= -tol * scale)
}
