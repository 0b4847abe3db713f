//! Small dense linear algebra: vector helpers, a row-major matrix, and a
//! cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Everything here targets the small dimensions of the simulations
//! (d ≤ 64 for eigensolves, d² ≤ 16 for policy Hessians).

use crate::error::{Result, ViolinError};
use serde::{Deserialize, Serialize};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += s * x`
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Radial projection onto the Euclidean ball of the given radius.
pub fn project_ball(a: &mut [f64], radius: f64) {
    let n = norm(a);
    if n > radius {
        let s = radius / n;
        a.iter_mut().for_each(|x| *x *= s);
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(ViolinError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            crate::error::check_dim(c, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: r,
            cols: c,
            data,
        })
    }

    /// `x yᵀ`
    pub fn outer(x: &[f64], y: &[f64]) -> Self {
        let mut m = Self::zeros(x.len(), y.len());
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                m[(i, j)] = xi * yj;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Aᵀ x`
    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            axpy(&mut out, *xi, self.row(i));
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    pub fn add_scaled(&mut self, s: f64, other: &Matrix) {
        axpy(&mut self.data, s, &other.data);
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: scale(&self.data, s),
        }
    }

    pub fn frobenius(&self) -> f64 {
        norm(&self.data)
    }

    /// Largest absolute deviation `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        dev
    }

    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = m;
                self[(j, i)] = m;
            }
        }
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    s += self[(i, j)] * self[(i, j)];
                }
            }
        }
        s.sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix,
}

const SYMMETRY_TOL: f64 = 1e-10;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
pub const MAX_EIGEN_DIM: usize = 64;

/// Cyclic Jacobi eigensolver.
///
/// Sweeps rotations until the off-diagonal Frobenius norm drops below
/// `1e-12 · max(1, ‖A‖_F)`.
pub fn sym_eigen(a: &Matrix) -> Result<SymEigen> {
    let n = a.rows();
    crate::error::check_dim(n, a.cols())?;
    if n > MAX_EIGEN_DIM {
        return Err(ViolinError::BudgetExceeded {
            needed: n,
            budget: MAX_EIGEN_DIM,
        });
    }
    let scale_ref = a.frobenius().max(1.0);
    let max_dev = a.asymmetry();
    if max_dev > SYMMETRY_TOL * scale_ref {
        return Err(ViolinError::Asymmetric { max_dev });
    }
    let mut m = a.clone();
    m.symmetrize();
    let mut v = Matrix::identity(n);
    let tol = JACOBI_TOL * scale_ref;

    for _ in 0..JACOBI_MAX_SWEEPS {
        if m.off_diagonal_norm() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, col)] = v[(k, src)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(h: &Matrix) -> Result<f64> {
    Ok(sym_eigen(h)?.values[0])
}

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
pub fn sym_spectral_norm(h: &Matrix) -> Result<f64> {
    let e = sym_eigen(h)?;
    Ok(e.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// Operator norm of a general matrix, via the eigenvalues of `AᵀA`.
pub fn op_norm(a: &Matrix) -> Result<f64> {
    let ata = a.transpose().matmul(a);
    Ok(lambda_max(&ata)?.max(0.0).sqrt())
}

/// Projects `a` onto `{X : ‖X‖_op ≤ bound}` by clipping singular values.
///
/// With `AᵀA = V diag(s²) Vᵀ`, the projection is `A V diag(min(1, bound/s)) Vᵀ`.
pub fn project_op_norm(a: &Matrix, bound: f64) -> Result<Matrix> {
    let ata = a.transpose().matmul(a);
    let eig = sym_eigen(&ata)?;
    if eig.values[0].max(0.0).sqrt() <= bound {
        return Ok(a.clone());
    }
    let n = a.cols();
    let mut shrink = Matrix::zeros(n, n);
    for k in 0..n {
        let s = eig.values[k].max(0.0).sqrt();
        let f = if s > bound { bound / s } else { 1.0 };
        for i in 0..n {
            for j in 0..n {
                shrink[(i, j)] += f * eig.vectors[(i, k)] * eig.vectors[(j, k)];
            }
        }
    }
    Ok(a.matmul(&shrink))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_identity_has_lambda_max_minus_one() {
        let h = Matrix::identity(4).scaled(-1.0);
        assert!((lambda_max(&h).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_lambda_max() {
        let h = Matrix::from_diag(&[3.0, -1.0]);
        assert!((lambda_max(&h).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let h = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(lambda_max(&h), Err(ViolinError::Asymmetric { .. })));
    }

    #[test]
    fn eigenvectors_reconstruct_matrix() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, -2.0],
            vec![1.0, 2.0, 0.5],
            vec![-2.0, 0.5, -3.0],
        ])
        .unwrap();
        let e = sym_eigen(&a).unwrap();
        let mut rec = Matrix::zeros(3, 3);
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    rec[(i, j)] += e.values[k] * e.vectors[(i, k)] * e.vectors[(j, k)];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!((rec[(i, j)] - a[(i, j)]).abs() < 1e-11);
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn op_norm_projection_clips_singular_values() {
        let a = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 0.5]]).unwrap();
        let p = project_op_norm(&a, 1.0).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((p[(1, 1)] - 0.5).abs() < 1e-12);
        assert!((op_norm(&p).unwrap() - 1.0).abs() < 1e-10);
    }
}
