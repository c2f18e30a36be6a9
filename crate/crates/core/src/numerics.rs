//! Small dense complex linear-algebra kernel.
//!
//! Everything here is deterministic: Cholesky without pivoting for Hermitian
//! positive-definite solves and cyclic Jacobi rotations for the Hermitian
//! eigenproblem. Matrices in this crate are tiny (at most a few dozen rows),
//! so clarity wins over blocking or SIMD.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Relative tolerance used when checking that an input is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", data.len()),
            });
        }
        if let Some(i) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NumericsError::NonFinite {
                row: i / cols.max(1),
                col: i % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [C64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[C64]) {
        assert_eq!(values.len(), self.rows);
        for (r, &v) in values.iter().enumerate() {
            self[(r, c)] = v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let orow = other.row(k);
                for (o, b) in out.row_mut(r).iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `A x` for a column vector `x`.
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len(), "mul_vec dimension");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Aᴴ x` without forming the adjoint.
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.rows, x.len(), "adjoint_mul_vec dimension");
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (r, xr) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a.conj() * xr;
            }
        }
        out
    }

    /// `x A` for a row vector `x`.
    pub fn row_mul(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.rows, x.len(), "row_mul dimension");
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (r, xr) in x.iter().enumerate() {
            if *xr == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += xr * a;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `‖A − Aᴴ‖_F`; zero for an exactly Hermitian matrix.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                acc += (self[(r, c)] - self[(c, r)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.is_square() && self.hermitian_defect() <= rel_tol * self.frobenius_norm().max(f64::MIN_POSITIVE)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// `Σ conj(a_i) b_i`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `Σ a_i b_i` (bilinear, no conjugation).
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    norm_sqr(v).sqrt()
}

fn check_hermitian(b: &CMatrix) -> Result<(), NumericsError> {
    if !b.is_square() {
        return Err(NumericsError::DimensionMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", b.rows(), b.cols()),
        });
    }
    if !b.is_finite() {
        let i = b.as_slice().iter().position(|z| !z.re.is_finite() || !z.im.is_finite()).unwrap();
        return Err(NumericsError::NonFinite {
            row: i / b.cols(),
            col: i % b.cols(),
        });
    }
    if !b.is_hermitian(HERMITIAN_TOL) {
        return Err(NumericsError::NotHermitian {
            defect: b.hermitian_defect(),
        });
    }
    Ok(())
}

/// Lower-triangular Cholesky factor `L` with `B = L Lᴴ`.
///
/// Only the lower triangle of `b` is read.
pub fn cholesky(b: &CMatrix) -> Result<CMatrix, NumericsError> {
    check_hermitian(b)?;
    let n = b.rows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = b[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(NumericsError::NotPositiveDefinite { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `B x = c` for Hermitian positive-definite `B`.
///
/// Fails with [`NumericsError::NotPositiveDefinite`] when a Cholesky pivot is
/// not strictly positive; callers are expected to add a ridge and retry.
pub fn hermitian_solve(b: &CMatrix, c: &[C64]) -> Result<Vec<C64>, NumericsError> {
    if c.len() != b.rows() {
        return Err(NumericsError::DimensionMismatch {
            expected: format!("rhs of length {}", b.rows()),
            got: format!("length {}", c.len()),
        });
    }
    let l = cholesky(b)?;
    let n = l.rows();
    // forward: L y = c
    let mut y = c.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)].re;
    }
    // backward: Lᴴ x = y
    let mut x = y;
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)].conj() * x[k];
        }
        x[i] = s / l[(i, i)].re;
    }
    Ok(x)
}

/// Eigendecomposition `B = V diag(λ) Vᴴ` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the unit eigenvector for `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        CMatrix::from_fn(n, n, |r, c| {
            (0..n)
                .map(|k| v[(r, k)] * self.eigenvalues[k] * v[(c, k)].conj())
                .sum()
        })
    }
}

/// Cyclic complex Jacobi eigensolver.
pub fn eig_hermitian(b: &CMatrix) -> Result<HermitianEig, NumericsError> {
    check_hermitian(b)?;
    let n = b.rows();
    // Work on the exactly Hermitian part so rounding in the input cannot
    // leak imaginary parts onto the diagonal.
    let mut a = CMatrix::from_fn(n, n, |r, c| 0.5 * (b[(r, c)] + b[(c, r)].conj()));
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm();

    let off = |a: &CMatrix| -> f64 {
        let mut s = 0.0;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    s += a[(r, c)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = scale == 0.0 || n < 2;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE || r <= 1e-300 * scale {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Skip rotations that cannot change the diagonal in floating point.
                if sweeps > 3 && (app.abs() + 1e2 * r == app.abs()) && (aqq.abs() + 1e2 * r == aqq.abs()) {
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    continue;
                }
                let phase = apq / r; // e^{iφ}
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]] restricted to (p, q).
                let g_pp = C64::new(c, 0.0);
                let g_pq = C64::new(s, 0.0);
                let g_qp = -phase.conj() * s;
                let g_qq = phase.conj() * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
        converged = off(&a) <= 1e-15 * scale;
    }
    if !converged {
        return Err(NumericsError::NoConvergence { sweeps });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}
