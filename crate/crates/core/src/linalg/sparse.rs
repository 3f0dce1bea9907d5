//! Compressed sparse row storage for symmetric operators.

use ndarray::Array2;

use crate::real::Real;

#[derive(Debug, Clone)]
pub struct Csr<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, T)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet out of bounds");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            col_idx: merged.iter().map(|t| t.1).collect(),
            vals: merged.iter().map(|t| t.2).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[s..e], &self.vals[s..e])
    }

    /// y = A x
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = T::zero();
            for k in s..e {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    /// D A D with D = diag(d), preserving the sparsity pattern.
    pub fn diag_scale(&self, d: &[T]) -> Csr<T> {
        assert_eq!(d.len(), self.n);
        let mut out = self.clone();
        for r in 0..self.n {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            for k in s..e {
                out.vals[k] = d[r] * self.vals[k] * d[self.col_idx[k]];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut a = Array2::zeros((self.n, self.n));
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                a[[r, c]] = v;
            }
        }
        a
    }

    /// Largest absolute row sum; upper bound on the spectral radius.
    pub fn inf_norm(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.n {
            let (_, vals) = self.row(r);
            let s = vals.iter().fold(T::zero(), |acc, v| acc + v.abs());
            worst = worst.max(s);
        }
        worst
    }
}
