//! Compressed sparse row matrices and a banded Cholesky factorization.
//!
//! Natural node ordering on the structured mesh gives a bandwidth of about
//! `nx + 2`, so a band solver is both simple and fast at the sizes used here.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed in
    /// insertion order, so two entries receiving the same sequence of
    /// contributions end up bitwise equal.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for t in order {
            let (r, c, v) = triplets[t];
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}×{cols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &triplets)
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Self {
        let rows = dense.len();
        let cols = dense.first().map_or(0, |r| r.len());
        let mut triplets = Vec::new();
        for (i, row) in dense.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    triplets.push((i, j, *v));
                }
            }
        }
        Self::from_triplets(rows, cols, &triplets)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|(j, _)| *j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        (0..self.rows)
            .map(|r| x[r] * self.row(r).map(|(c, v)| v * y[c]).sum::<f64>())
            .sum()
    }

    /// Submatrix on the given row and column index lists.
    pub fn submatrix(&self, row_list: &[usize], col_list: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.cols];
        for (k, c) in col_list.iter().enumerate() {
            col_map[*c] = k;
        }
        let mut triplets = Vec::new();
        for (i, r) in row_list.iter().enumerate() {
            for (c, v) in self.row(*r) {
                if col_map[c] != usize::MAX {
                    triplets.push((i, col_map[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(row_list.len(), col_list.len(), &triplets)
    }

    /// `a A + b B` on the union of the sparsity patterns.
    pub fn linear_combination(a: f64, lhs: &CsrMatrix, b: f64, rhs: &CsrMatrix) -> CsrMatrix {
        assert_eq!((lhs.rows, lhs.cols), (rhs.rows, rhs.cols));
        let mut triplets = Vec::with_capacity(lhs.nnz() + rhs.nnz());
        for r in 0..lhs.rows {
            triplets.extend(lhs.row(r).map(|(c, v)| (r, c, a * v)));
            triplets.extend(rhs.row(r).map(|(c, v)| (r, c, b * v)));
        }
        CsrMatrix::from_triplets(lhs.rows, lhs.cols, &triplets)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }

    pub fn bandwidth(&self) -> usize {
        (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }
}

/// Cholesky factor `A = L Lᵀ` stored by band.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    n: usize,
    band: usize,
    // row i holds L[i][i - band ..= i]
    lower: Vec<f64>,
}

impl SpdFactor {
    pub fn new(matrix: &CsrMatrix) -> Result<Self> {
        if matrix.rows != matrix.cols {
            return Err(Error::Dimension {
                expected: matrix.rows,
                found: matrix.cols,
            });
        }
        let n = matrix.rows;
        let band = matrix.bandwidth();
        let width = band + 1;
        let mut lower = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in matrix.row(i) {
                if j <= i {
                    lower[i * width + band + j - i] = v;
                }
            }
        }
        let at = |i: usize, j: usize| i * width + band + j - i;
        for i in 0..n {
            let lo = i.saturating_sub(band);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(band));
                let mut s = lower[at(i, j)];
                for k in klo..j {
                    s -= lower[at(i, k)] * lower[at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Solver(format!(
                            "matrix is not positive definite (pivot {s:e} at row {i})"
                        )));
                    }
                    lower[at(i, i)] = s.sqrt();
                } else {
                    lower[at(i, j)] = s / lower[at(j, j)];
                }
            }
        }
        Ok(Self { n, band, lower })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: rhs.len(),
            });
        }
        let width = self.band + 1;
        let at = |i: usize, j: usize| i * width + self.band + j - i;
        let mut y = rhs.to_vec();
        for i in 0..self.n {
            let lo = i.saturating_sub(self.band);
            let mut s = y[i];
            for k in lo..i {
                s -= self.lower[at(i, k)] * y[k];
            }
            y[i] = s / self.lower[at(i, i)];
        }
        for i in (0..self.n).rev() {
            let hi = (i + self.band).min(self.n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= self.lower[at(k, i)] * y[k];
            }
            y[i] = s / self.lower[at(i, i)];
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite solution".into()));
        }
        Ok(y)
    }
}

/// Solves `lhs x = rhs` for symmetric positive definite `lhs`.
pub fn solve_spd(lhs: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    SpdFactor::new(lhs)?.solve(rhs)
}
