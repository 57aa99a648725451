//! Small dense real linear algebra: eigenvalues, symmetric extreme
//! eigenvalues and pivoted linear solves.

mod hqr;

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on QR sweeps before giving up.
pub const MAX_QR_SWEEPS: usize = 10_000;

/// Tolerance on symmetry of input to [`sym_eigmax`], relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("empty matrix")]
    Empty,
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: matrix order {order}, vector length {len}")]
    DimensionMismatch { order: usize, len: usize },
    #[error("matrix is singular to working precision (pivot {pivot:e} in column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("eigenvalue iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Matrix { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
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

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_square(&self) -> Result<usize, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if self.rows == 0 {
            return Err(LinalgError::Empty);
        }
        if !self.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        Ok(self.rows)
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(|v| format!("{v:>12.6}")).collect();
            writeln!(f, "[{}]", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Eigenvalues of a real matrix, with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSet {
    /// Sorted by real part, then imaginary part.
    pub values: Vec<Complex64>,
    /// `max |det(lambda I - A)| / max(1, ||A||_F)^n` over the returned values.
    pub residual: f64,
}

impl EigenSet {
    /// Largest real part.
    pub fn spectral_abscissa(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn sort_values(values: &mut [Complex64]) {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

fn closed_form_2x2(a: f64, b: f64, c: f64, d: f64) -> [Complex64; 2] {
    let half_tr = 0.5 * (a + d);
    let p = 0.5 * (a - d);
    let disc = p * p + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // Larger-magnitude root first, the other from det / root.
        let big = half_tr + if half_tr >= 0.0 { s } else { -s };
        let det = a * d - b * c;
        let small = if big != 0.0 { det / big } else { half_tr - s };
        [Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(half_tr, s), Complex64::new(half_tr, -s)]
    }
}

/// `det(lambda I - A)` by complex LU with partial pivoting.
pub fn char_poly_at(a: &Matrix, lambda: Complex64) -> Complex64 {
    let n = a.rows();
    let mut m: Vec<Complex64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let diag = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
            diag - a.get(i, j)
        })
        .collect();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&x, &y| m[x * n + col].norm().total_cmp(&m[y * n + col].norm()))
            .unwrap();
        if m[pivot_row * n + col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot_row != col {
            for j in 0..n {
                m.swap(col * n + j, pivot_row * n + j);
            }
            det = -det;
        }
        let piv = m[col * n + col];
        det *= piv;
        for i in (col + 1)..n {
            let factor = m[i * n + col] / piv;
            for j in col..n {
                let v = m[col * n + j];
                m[i * n + j] -= factor * v;
            }
        }
    }
    det
}

/// All eigenvalues of a square real matrix.
///
/// Orders 1 and 2 use closed forms; larger orders are balanced, reduced to
/// Hessenberg form and iterated with Francis double-shift QR.
pub fn eigenvalues(a: &Matrix) -> Result<EigenSet, LinalgError> {
    let n = a.check_square()?;
    let mut values = match n {
        1 => vec![Complex64::new(a.get(0, 0), 0.0)],
        2 => closed_form_2x2(a.get(0, 0), a.get(0, 1), a.get(1, 0), a.get(1, 1)).to_vec(),
        _ => hqr::eigenvalues_general(a.data(), n, MAX_QR_SWEEPS)
            .map_err(|_| LinalgError::NoConvergence(MAX_QR_SWEEPS))?,
    };
    sort_values(&mut values);
    let scale = a.frobenius_norm().max(1.0).powi(n as i32);
    let residual = values
        .iter()
        .map(|&l| char_poly_at(a, l).norm() / scale)
        .fold(0.0, f64::max);
    Ok(EigenSet { values, residual })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with the matching unit eigenvectors
/// (as columns of the returned matrix). The input is symmetrized first.
pub fn sym_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    let n = a.check_square()?;
    let scale = a.max_abs();
    let mut asym: f64 = 0.0;
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((a.get(i, j) - a.get(j, i)).abs());
            m.set(i, j, 0.5 * (a.get(i, j) + a.get(j, i)));
        }
    }
    if asym > SYMMETRY_TOL * scale.max(1.0) {
        return Err(LinalgError::NotSymmetric(asym));
    }
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).powi(2))
            .sum();
        let diag: f64 = (0..n).map(|i| m.get(i, i).powi(2)).sum();
        if off == 0.0 || off <= 1e-32 * diag {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m.get(x, x).total_cmp(&m.get(y, y)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, col, v.get(k, src));
        }
    }
    Ok((values, vectors))
}

/// Largest eigenvalue of `(A + A^T) / 2`.
pub fn sym_eigmax(a: &Matrix) -> Result<f64, LinalgError> {
    let (values, _) = sym_eigen(a)?;
    Ok(*values.last().expect("order >= 1"))
}

/// Spectral norm of a symmetric matrix, `max |lambda|`.
pub fn sym_spectral_norm(a: &Matrix) -> Result<f64, LinalgError> {
    let (values, _) = sym_eigen(a)?;
    Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.check_square()?;
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            order: n,
            len: b.len(),
        });
    }
    let gate = 1e-14 * a.max_abs();
    let mut m = a.data().to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        let pivot = m[pivot_row * n + col];
        if pivot.abs() <= gate || pivot == 0.0 {
            return Err(LinalgError::Singular { column: col, pivot });
        }
        if pivot_row != col {
            for j in 0..n {
                m.swap(col * n + j, pivot_row * n + j);
            }
            x.swap(col, pivot_row);
        }
        for i in (col + 1)..n {
            let factor = m[i * n + col] / pivot;
            if factor != 0.0 {
                for j in col..n {
                    m[i * n + j] -= factor * m[col * n + j];
                }
                x[i] -= factor * x[col];
            }
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= m[i * n + j] * x[j];
        }
        x[i] = s / m[i * n + i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, re: f64, im: f64, tol: f64) -> bool {
        (a.re - re).abs() < tol && (a.im - im).abs() < tol
    }

    #[test]
    fn vdp_linearization_eigenvalues() {
        let e = eigenvalues(&Matrix::from_rows(&[[0.0, 1.0], [-1.0, -0.1]])).unwrap();
        let im = (1.0f64 - 0.0025).sqrt();
        assert!(close(e.values[0], -0.05, -im, 1e-12), "{:?}", e.values);
        assert!(close(e.values[1], -0.05, im, 1e-12));
        assert!(e.residual < 1e-14);
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let e = eigenvalues(&Matrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![Complex64::new(1.0, 0.0); 2]);
        let e = eigenvalues(&Matrix::identity(5)).unwrap();
        assert!(e.values.iter().all(|v| close(*v, 1.0, 0.0, 1e-14)));
    }

    #[test]
    fn fhn_linearization_eigenvalues() {
        let e = eigenvalues(&Matrix::from_rows(&[[0.0, -1.0], [1.0, -0.333]])).unwrap();
        // lambda^2 + 0.333 lambda + 1 = 0
        let im = (4.0f64 - 0.333 * 0.333).sqrt() / 2.0;
        assert!(close(e.values[0], -0.1665, -im, 1e-12));
        assert!(close(e.values[1], -0.1665, im, 1e-12));
        assert!((im - 0.9860).abs() < 1e-4);
    }

    #[test]
    fn three_by_three_companion() {
        // roots 1, 2, 3: x^3 - 6x^2 + 11x - 6
        let a = Matrix::from_rows(&[[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let e = eigenvalues(&a).unwrap();
        for (v, r) in e.values.iter().zip([1.0, 2.0, 3.0]) {
            assert!(close(*v, r, 0.0, 1e-10), "{v}");
        }
    }

    #[test]
    fn rotation_block_in_four_dimensions() {
        let a = Matrix::from_rows(&[
            [0.0, -2.0, 0.0, 0.0],
            [2.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, -1.0, 0.0],
            [0.0, 0.0, 0.0, 3.0],
        ]);
        let e = eigenvalues(&a).unwrap();
        assert!(close(e.values[0], -1.0, 0.0, 1e-12));
        assert!(close(e.values[1], 0.0, -2.0, 1e-12));
        assert!(close(e.values[2], 0.0, 2.0, 1e-12));
        assert!(close(e.values[3], 3.0, 0.0, 1e-12));
    }

    #[test]
    fn eigenvalue_errors() {
        assert!(matches!(
            eigenvalues(&Matrix::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));
        assert!(matches!(
            eigenvalues(&Matrix::from_rows(&[[f64::NAN]])),
            Err(LinalgError::NonFinite)
        ));
    }

    #[test]
    fn sym_eigmax_examples() {
        assert_eq!(sym_eigmax(&Matrix::from_rows(&[[-2.0, 0.0], [0.0, 0.0]])).unwrap(), 0.0);
        assert_eq!(sym_eigmax(&Matrix::zeros(3, 3)).unwrap(), 0.0);
        let v = sym_eigmax(&Matrix::from_rows(&[[0.0, 0.2], [0.2, 0.0]])).unwrap();
        assert!((v - 0.2).abs() < 1e-15);
        assert!(matches!(
            sym_eigmax(&Matrix::zeros(1, 2)),
            Err(LinalgError::NotSquare { .. })
        ));
    }

    #[test]
    fn sym_eigmax_symmetrizes_rounding_noise() {
        let a = Matrix::from_rows(&[[1.0, 2.0 + 1e-12], [2.0, 1.0]]);
        assert!((sym_eigmax(&a).unwrap() - 3.0).abs() < 1e-11);
        let bad = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(sym_eigmax(&bad), Err(LinalgError::NotSymmetric(_))));
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve_linear(&Matrix::identity(2), &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let d = Matrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]);
        assert_eq!(solve_linear(&d, &[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
        let s = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        assert!(matches!(
            solve_linear(&s, &[1.0, 5.0]),
            Err(LinalgError::Singular { .. })
        ));
        assert!(matches!(
            solve_linear(&d, &[1.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn solve_needs_pivoting() {
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(solve_linear(&a, &[5.0, 7.0]).unwrap(), vec![7.0, 5.0]);
    }
}
