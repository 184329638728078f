//! Dense row-major matrices and a cyclic Jacobi eigensolver.
//!
//! [`DMat`] is the one matrix type used everywhere: autodiff values,
//! adjacency operators, encoder weights. It is deliberately plain — a
//! `Vec<f64>` with a shape — because every consumer iterates rows or
//! multiplies, nothing fancier.
//!
//! [`symmetric_eig`] diagonalizes a symmetric matrix by cyclic Jacobi
//! sweeps: rotations are applied in a fixed (p, q) order, convergence is
//! declared when the off-diagonal Frobenius norm drops below
//! [`JACOBI_TOL`], and the rotation count is capped so a pathological
//! input fails loudly instead of spinning. Eigenvalues come back in
//! ascending order; each eigenvector's sign is fixed so its
//! largest-magnitude entry is positive (ties broken toward the lowest
//! index), which makes the output independent of sweep order.

use std::ops::{Index, IndexMut};

/// Off-diagonal Frobenius norm below which the Jacobi sweep stops.
pub const JACOBI_TOL: f64 = 1e-10;

/// Rotation budget per matrix: `100 * n * n`.
pub const JACOBI_ROTATION_FACTOR: usize = 100;

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DMat {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DMat { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = DMat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wraps an existing row-major buffer. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length {} != {rows}x{cols}", data.len());
        DMat { rows, cols, data }
    }

    /// Builds a matrix from equally sized rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged row: {} != {c}", row.len());
            data.extend_from_slice(row);
        }
        DMat { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Total number of entries.
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `j` copied out.
    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn transpose(&self) -> DMat {
        let mut out = DMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self * other`. Panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &DMat) -> DMat {
        assert_eq!(
            self.cols, other.rows,
            "matmul inner dims: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = DMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T` without materializing the transpose.
    pub fn matmul_nt(&self, other: &DMat) -> DMat {
        assert_eq!(
            self.cols, other.cols,
            "matmul_nt inner dims: {}x{} * ({}x{})^T",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = DMat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..other.rows {
                let b_row = &other.data[j * other.cols..(j + 1) * other.cols];
                let mut acc = 0.0;
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out.data[i * other.rows + j] = acc;
            }
        }
        out
    }

    /// `self^T * other` without materializing the transpose.
    pub fn matmul_tn(&self, other: &DMat) -> DMat {
        assert_eq!(
            self.rows, other.rows,
            "matmul_tn inner dims: ({}x{})^T * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = DMat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = &self.data[k * self.cols..(k + 1) * self.cols];
            let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Frobenius norm of the whole matrix.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Elementwise `self += other`. Panics on shape mismatch.
    pub fn add_assign(&mut self, other: &DMat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add_assign shapes");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Elementwise `self += c * other`. Panics on shape mismatch.
    pub fn scaled_add_assign(&mut self, c: f64, other: &DMat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "scaled_add_assign shapes");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }
}

impl Index<(usize, usize)> for DMat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Why [`symmetric_eig`] refused or failed.
#[derive(Debug, thiserror::Error)]
pub enum EigenError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({i}, {j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("Jacobi did not converge after {rotations} rotations (off-diagonal norm {off_norm:e})")]
    NoConvergence { rotations: usize, off_norm: f64 },
}

/// Eigendecomposition of a symmetric matrix: `values[j]` pairs with
/// column `j` of `vectors`.
#[derive(Debug, Clone)]
pub struct Eigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, signs fixed.
    pub vectors: DMat,
}

/// Diagonalizes a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eig(m: &DMat) -> Result<Eigen, EigenError> {
    let n = m.rows();
    if m.cols() != n {
        return Err(EigenError::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if m[(i, j)] != m[(j, i)] {
                return Err(EigenError::NotSymmetric { i, j, a: m[(i, j)], b: m[(j, i)] });
            }
        }
    }

    let mut a = m.clone();
    let mut v = DMat::identity(n);
    let cap = JACOBI_ROTATION_FACTOR * n * n;
    let mut rotations = 0usize;

    loop {
        let off = off_diagonal_norm(&a);
        if off < JACOBI_TOL {
            break;
        }
        if rotations >= cap {
            return Err(EigenError::NoConvergence { rotations, off_norm: off });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                rotate(&mut a, &mut v, p, q);
                rotations += 1;
            }
        }
    }

    // Sort ascending, carrying columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());

    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = (0..n).map(|i| v[(i, src)]).collect();
        fix_sign(&mut col);
        for (i, &x) in col.iter().enumerate() {
            vectors[(i, dst)] = x;
        }
    }

    Ok(Eigen { values, vectors })
}

/// Frobenius norm of the strictly off-diagonal part.
fn off_diagonal_norm(a: &DMat) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// One Jacobi rotation zeroing `a[(p, q)]`, accumulated into `v`.
fn rotate(a: &mut DMat, v: &mut DMat, p: usize, q: usize) {
    let n = a.rows();
    let apq = a[(p, q)];
    let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    let app = a[(p, p)];
    let aqq = a[(q, q)];
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for i in 0..n {
        if i == p || i == q {
            continue;
        }
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = c * aip - s * aiq;
        a[(p, i)] = a[(i, p)];
        a[(i, q)] = s * aip + c * aiq;
        a[(q, i)] = a[(i, q)];
    }
    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = c * vip - s * viq;
        v[(i, q)] = s * vip + c * viq;
    }
}

/// Flips the vector so its largest-magnitude entry is positive; among
/// equal magnitudes the lowest index decides.
fn fix_sign(col: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, &x) in col.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if col.get(best).copied().unwrap_or(0.0) < 0.0 {
        for x in col.iter_mut() {
            *x = -*x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn matmul_small() {
        let a = DMat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = DMat::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_variants_agree_with_explicit_transpose() {
        let a = DMat::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let b = DMat::from_rows(&[vec![7.0, 8.0, 9.0], vec![10.0, 11.0, 12.0]]);
        assert_eq!(a.matmul_nt(&b), a.matmul(&b.transpose()));
        assert_eq!(a.matmul_tn(&b), a.transpose().matmul(&b));
    }

    #[test]
    fn eig_two_by_two() {
        let m = DMat::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        let e = symmetric_eig(&m).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], 3.0, epsilon = 1e-12);
        let r = 0.5_f64.sqrt();
        // λ=1 vector is ±[1,1]/√2: tie on magnitude, entry 0 wins and must be positive.
        assert_abs_diff_eq!(e.vectors[(0, 0)], r, epsilon = 1e-10);
        assert_abs_diff_eq!(e.vectors[(1, 0)], r, epsilon = 1e-10);
        // λ=3 vector is ±[1,-1]/√2: entry 0 must be positive.
        assert_abs_diff_eq!(e.vectors[(0, 1)], r, epsilon = 1e-10);
        assert_abs_diff_eq!(e.vectors[(1, 1)], -r, epsilon = 1e-10);
    }

    #[test]
    fn eig_sorts_unordered_diagonal() {
        let m = DMat::from_rows(&[
            vec![3.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ]);
        let e = symmetric_eig(&m).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        // Columns follow the sort: e_1, e_2, e_0.
        assert_eq!(e.vectors[(1, 0)], 1.0);
        assert_eq!(e.vectors[(2, 1)], 1.0);
        assert_eq!(e.vectors[(0, 2)], 1.0);
    }

    #[test]
    fn eig_reconstructs_and_is_orthonormal() {
        use rand::Rng;
        let mut rng = crate::rng::stream(7, "linalg-test");
        let n = 8;
        let mut m = DMat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        let e = symmetric_eig(&m).unwrap();

        let vtv = e.vectors.matmul_tn(&e.vectors);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(vtv[(i, j)], want, epsilon = 1e-9);
            }
        }

        let mut lam = DMat::zeros(n, n);
        for i in 0..n {
            lam[(i, i)] = e.values[i];
        }
        let rebuilt = e.vectors.matmul(&lam).matmul_nt(&e.vectors);
        for i in 0..n {
            for j in 0..n {
                assert_abs_diff_eq!(rebuilt[(i, j)], m[(i, j)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let m = DMat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(matches!(symmetric_eig(&m), Err(EigenError::NotSymmetric { .. })));
    }

    #[test]
    fn eig_handles_tiny_sizes() {
        let e = symmetric_eig(&DMat::from_vec(1, 1, vec![4.0])).unwrap();
        assert_eq!(e.values, vec![4.0]);
        assert_eq!(e.vectors[(0, 0)], 1.0);

        let e = symmetric_eig(&DMat::zeros(0, 0)).unwrap();
        assert!(e.values.is_empty());
    }
}
