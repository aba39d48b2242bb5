//! Dense and sparse helpers shared by the kernel modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Matrix = DMatrix<f64>;

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// Cosine normalization `K'(a,b) = K(a,b) / sqrt(K(a,a) K(b,b))`. Rows with a
/// zero self-similarity get 0 off the diagonal and 1 on it.
pub fn cosine_normalize(k: &Matrix) -> Matrix {
    let n = k.nrows();
    let diag: Vec<f64> = (0..n).map(|i| k[(i, i)]).collect();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            return 1.0;
        }
        let denom = (diag[i] * diag[j]).sqrt();
        if denom > 0.0 && denom.is_finite() {
            k[(i, j)] / denom
        } else {
            0.0
        }
    })
}

/// Row-compressed sparse matrix, enough for matrix-vector products.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// zeros dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| t.2 != 0.0);
        let mut row_start = vec![0; n + 1];
        for &(r, _, _) in &merged {
            row_start[r + 1] += 1;
        }
        for i in 0..n {
            row_start[i + 1] += row_start[i];
        }
        SparseMatrix {
            n,
            row_start,
            cols: merged.iter().map(|t| t.1).collect(),
            values: merged.iter().map(|t| t.2).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_start[i]..self.row_start[i + 1] {
                m[(i, self.cols[k])] += self.values[k];
            }
        }
        m
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_start[i]..self.row_start[i + 1]).map(move |k| (i, self.cols[k], self.values[k]))
        })
    }

    /// True when the nonzero pattern, read as a digraph, has no cycle.
    pub fn is_acyclic(&self) -> bool {
        let mut indegree = vec![0usize; self.n];
        for &c in &self.cols {
            indegree[c] += 1;
        }
        let mut stack: Vec<usize> = (0..self.n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = stack.pop() {
            seen += 1;
            for k in self.row_start[i]..self.row_start[i + 1] {
                let c = self.cols[k];
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    stack.push(c);
                }
            }
        }
        seen == self.n
    }
}

/// Perron root of a nonnegative matrix by power iteration on `A + I`, from the
/// all-ones start vector. The shift makes periodic matrices converge and keeps
/// the iterate positive, so every estimate `max_i (Ax)_i / x_i` is an upper
/// bound on the root. The iteration stops once both the estimate and the
/// normalized iterate move by less than `tol`, or after `max_iter` steps.
/// Acyclic patterns are nilpotent and return 0.
pub fn perron_root(a: &SparseMatrix, tol: f64, max_iter: usize) -> f64 {
    let n = a.dim();
    if n == 0 || a.nnz() == 0 || a.is_acyclic() {
        return 0.0;
    }
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut estimate = f64::INFINITY;
    for _ in 0..max_iter {
        a.mul_vec(&x, &mut y);
        let mut norm_y = 0.0f64;
        let mut next = 0.0f64;
        for i in 0..n {
            next = next.max(y[i] / x[i]);
            y[i] += x[i];
            norm_y = norm_y.max(y[i]);
        }
        let mut moved = 0.0f64;
        for i in 0..n {
            let v = y[i] / norm_y;
            moved = moved.max((v - x[i]).abs());
            x[i] = v;
        }
        // integer patterns can repeat a growth ratio before the direction settles
        if (next - estimate).abs() < tol * next.abs().max(1.0) && moved < tol {
            return next.max(0.0);
        }
        estimate = next;
    }
    estimate.max(0.0)
}

/// Solves `(I - lambda A) x = b` by the Neumann fixed point `x <- b + lambda A x`.
/// Requires `lambda * rho(A) < 1`.
pub fn neumann_solve(a: &SparseMatrix, lambda: f64, b: &[f64], tol: f64, max_iter: usize) -> Vec<f64> {
    let n = a.dim();
    let mut x = b.to_vec();
    let mut ax = vec![0.0; n];
    for _ in 0..max_iter {
        a.mul_vec(&x, &mut ax);
        let mut delta = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..n {
            let next = b[i] + lambda * ax[i];
            delta = delta.max((next - x[i]).abs());
            scale = scale.max(next.abs());
            x[i] = next;
        }
        if delta <= tol * scale.max(1.0) {
            break;
        }
    }
    x
}

pub fn dense_solve(m: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let rhs = DVector::from_column_slice(b);
    m.clone().lu().solve(&rhs).map(|v| v.iter().copied().collect())
}

/// Euclidean distances between L2-normalized rows. All-zero rows stay zero
/// vectors.
pub fn normalized_euclidean(rows: &Matrix) -> Matrix {
    let n = rows.nrows();
    let mut unit = rows.clone();
    for i in 0..n {
        let norm = unit.row(i).norm();
        if norm > 0.0 {
            unit.row_mut(i).scale_mut(1.0 / norm);
        }
    }
    Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (unit.row(i) - unit.row(j)).norm() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_dense_agree() {
        let s = SparseMatrix::from_triplets(3, vec![(0, 1, 2.0), (2, 0, 1.0), (0, 1, 1.0), (1, 1, 0.0)]);
        assert_eq!(s.nnz(), 2);
        let d = s.to_dense();
        assert_eq!(d[(0, 1)], 3.0);
        let mut out = vec![0.0; 3];
        s.mul_vec(&[1.0, 2.0, 3.0], &mut out);
        assert_eq!(out, vec![6.0, 0.0, 1.0]);
    }

    #[test]
    fn perron_root_of_cycle_and_dag() {
        // 2-cycle is periodic; the shift handles it
        let cycle = SparseMatrix::from_triplets(2, vec![(0, 1, 1.0), (1, 0, 1.0)]);
        assert!((perron_root(&cycle, 1e-12, 10_000) - 1.0).abs() < 1e-9);
        let dag = SparseMatrix::from_triplets(3, vec![(0, 1, 1.0), (1, 2, 1.0)]);
        assert_eq!(perron_root(&dag, 1e-12, 10_000), 0.0);
        let triangle = SparseMatrix::from_triplets(
            3,
            vec![(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0), (0, 2, 1.0), (2, 0, 1.0)],
        );
        assert!((perron_root(&triangle, 1e-12, 10_000) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn neumann_matches_lu() {
        let a = SparseMatrix::from_triplets(3, vec![(0, 1, 1.0), (1, 2, 0.5), (2, 0, 1.0), (1, 0, 0.25)]);
        let lambda = 0.4;
        let b = [1.0, 1.0, 1.0];
        let x = neumann_solve(&a, lambda, &b, 1e-15, 10_000);
        let m = Matrix::identity(3, 3) - a.to_dense() * lambda;
        let y = dense_solve(&m, &b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_normalization_zero_rows() {
        let k = Matrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]);
        let n = cosine_normalize(&k);
        assert_eq!(n, Matrix::identity(2, 2));
    }

    #[test]
    fn normalized_euclidean_ignores_scale() {
        let rows = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 5.0, 0.0, 0.0, 2.0]);
        let d = normalized_euclidean(&rows);
        assert!(d[(0, 1)].abs() < 1e-15);
        assert!((d[(0, 2)] - 2f64.sqrt()).abs() < 1e-15);
    }
}
