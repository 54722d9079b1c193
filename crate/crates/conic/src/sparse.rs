//! Compressed sparse column storage.

/// Sparse matrix in compressed column form. Row indices within a column are
/// sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowval: Vec<usize>,
    pub nzval: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowval: Vec::new(),
            nzval: Vec::new(),
        }
    }

    /// Builds from (row, col, value) triplets. Duplicates are summed; explicit
    /// zeros are kept so the pattern is predictable.
    pub fn from_triplets(nrows: usize, ncols: usize, trip: &[(usize, usize, f64)]) -> Self {
        let mut count = vec![0usize; ncols + 1];
        for &(r, c, _) in trip {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            count[c + 1] += 1;
        }
        for j in 0..ncols {
            count[j + 1] += count[j];
        }
        let mut next = count.clone();
        let mut rows = vec![0usize; trip.len()];
        let mut vals = vec![0.0; trip.len()];
        for &(r, c, v) in trip {
            let p = next[c];
            rows[p] = r;
            vals[p] = v;
            next[c] += 1;
        }
        let mut colptr = vec![0usize; ncols + 1];
        let mut rowval = Vec::with_capacity(trip.len());
        let mut nzval = Vec::with_capacity(trip.len());
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for j in 0..ncols {
            buf.clear();
            buf.extend((count[j]..count[j + 1]).map(|p| (rows[p], vals[p])));
            buf.sort_by_key(|e| e.0);
            for &(r, v) in &buf {
                if rowval.len() > colptr[j] && *rowval.last().unwrap() == r {
                    *nzval.last_mut().unwrap() += v;
                } else {
                    rowval.push(r);
                    nzval.push(v);
                }
            }
            colptr[j + 1] = rowval.len();
        }
        CscMatrix {
            nrows,
            ncols,
            colptr,
            rowval,
            nzval,
        }
    }

    pub fn nnz(&self) -> usize {
        self.rowval.len()
    }

    pub fn transpose(&self) -> CscMatrix {
        let mut count = vec![0usize; self.nrows + 1];
        for &r in &self.rowval {
            count[r + 1] += 1;
        }
        for i in 0..self.nrows {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut rowval = vec![0usize; self.nnz()];
        let mut nzval = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let r = self.rowval[p];
                let q = next[r];
                rowval[q] = j;
                nzval[q] = self.nzval[p];
                next[r] += 1;
            }
        }
        CscMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            colptr: count,
            rowval,
            nzval,
        }
    }

    /// y = alpha * A x + y
    pub fn gemv(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for j in 0..self.ncols {
            let xj = alpha * x[j];
            if xj == 0.0 {
                continue;
            }
            for p in self.colptr[j]..self.colptr[j + 1] {
                y[self.rowval[p]] += self.nzval[p] * xj;
            }
        }
    }

    /// y = alpha * A' x + y
    pub fn gemv_t(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for j in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.colptr[j]..self.colptr[j + 1] {
                acc += self.nzval[p] * x[self.rowval[p]];
            }
            y[j] += alpha * acc;
        }
    }

    /// y = alpha * K x + y, where self holds only the upper triangle of the
    /// symmetric matrix K.
    pub fn symv_upper(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let i = self.rowval[p];
                let v = alpha * self.nzval[p];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                d[self.rowval[p]][j] += self.nzval[p];
            }
        }
        d
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                out.push((self.rowval[p], j, self.nzval[p]));
            }
        }
        out
    }
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let a =
            CscMatrix::from_triplets(3, 2, &[(2, 0, 1.0), (0, 0, 2.0), (2, 0, 3.0), (1, 1, -1.0)]);
        assert_eq!(a.colptr, vec![0, 2, 3]);
        assert_eq!(a.rowval, vec![0, 2, 1]);
        assert_eq!(a.nzval, vec![2.0, 4.0, -1.0]);
    }

    #[test]
    fn transpose_matches_dense() {
        let a =
            CscMatrix::from_triplets(3, 4, &[(0, 1, 1.5), (2, 3, -2.0), (1, 0, 4.0), (2, 1, 0.5)]);
        let at = a.transpose();
        let d = a.to_dense();
        let dt = at.to_dense();
        for i in 0..3 {
            for j in 0..4 {
                assert_eq!(d[i][j], dt[j][i]);
            }
        }
    }

    #[test]
    fn gemv_and_transpose_agree() {
        let a =
            CscMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 1, 2.0), (0, 2, 3.0), (1, 2, -1.0)]);
        let mut y = vec![0.0; 2];
        a.gemv(1.0, &[1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, vec![4.0, 1.0]);
        let mut z = vec![0.0; 3];
        a.gemv_t(2.0, &[1.0, 1.0], &mut z);
        assert_eq!(z, vec![2.0, 4.0, 4.0]);
    }

    #[test]
    fn symv_upper_uses_both_triangles() {
        // K = [[2, 1], [1, 3]]
        let k = CscMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]);
        let mut y = vec![0.0; 2];
        k.symv_upper(1.0, &[1.0, 2.0], &mut y);
        assert_eq!(y, vec![4.0, 7.0]);
    }
}
