//! Sparse LDL' factorization for quasidefinite matrices.
//!
//! Symbolic analysis (fill-reducing ordering, elimination tree, column
//! counts) happens once per pattern; the numeric phase is an up-looking
//! factorization that can be repeated with new values.

use crate::sparse::CscMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdlError {
    #[error("matrix is not upper triangular (entry ({0},{1}))")]
    NotUpper(usize, usize),
    #[error("ordering failed: {0}")]
    Ordering(String),
    #[error("zero pivot at column {0}")]
    ZeroPivot(usize),
}

const NONE: usize = usize::MAX;

/// Dynamic pivot regularization: a pivot whose signed value falls below
/// `eps` is replaced by `delta` with the expected sign.
#[derive(Debug, Clone, Copy)]
pub struct DynamicReg {
    pub eps: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    // permuted upper triangle
    kp: Vec<usize>,
    ki: Vec<usize>,
    kx: Vec<f64>,
    map: Vec<usize>,
    signs: Vec<f64>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    // workspaces
    y_vals: Vec<f64>,
    y_idx: Vec<usize>,
    elim: Vec<usize>,
    marked: Vec<bool>,
    next_in_col: Vec<usize>,
    work: Vec<f64>,
}

impl LdlFactor {
    /// Symbolic analysis of the upper triangle `k`. `signs[i]` is the
    /// expected sign (+1 or -1) of the i-th pivot in the original ordering.
    pub fn new(k: &CscMatrix, signs: &[f64]) -> Result<Self, LdlError> {
        let n = k.ncols;
        assert_eq!(k.nrows, n);
        assert_eq!(signs.len(), n);
        for j in 0..n {
            for p in k.colptr[j]..k.colptr[j + 1] {
                if k.rowval[p] > j {
                    return Err(LdlError::NotUpper(k.rowval[p], j));
                }
            }
        }
        let perm = if n == 0 {
            Vec::new()
        } else {
            let (p, _, _) = amd::order(n, &k.colptr, &k.rowval, &amd::Control::default())
                .map_err(|s| LdlError::Ordering(format!("{s:?}")))?;
            p
        };
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // permuted upper triangle with a map from original entries
        let mut count = vec![0usize; n + 1];
        let mut target = Vec::with_capacity(k.nnz());
        for j in 0..n {
            for p in k.colptr[j]..k.colptr[j + 1] {
                let (a, b) = (iperm[k.rowval[p]], iperm[j]);
                let (r, c) = if a <= b { (a, b) } else { (b, a) };
                target.push((r, c));
                count[c + 1] += 1;
            }
        }
        for j in 0..n {
            count[j + 1] += count[j];
        }
        let mut next = count.clone();
        let mut ki = vec![0usize; target.len()];
        let mut map = vec![0usize; target.len()];
        for (p, &(r, c)) in target.iter().enumerate() {
            ki[next[c]] = r;
            map[p] = next[c];
            next[c] += 1;
        }
        let kp = count;

        // elimination tree and column counts
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for j in 0..n {
            flag[j] = j;
            for p in kp[j]..kp[j + 1] {
                let mut i = ki[p];
                while flag[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    flag[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let total = lp[n];
        let psigns = perm.iter().map(|&o| signs[o]).collect();
        Ok(LdlFactor {
            n,
            perm,
            kx: vec![0.0; ki.len()],
            kp,
            ki,
            map,
            signs: psigns,
            etree,
            lp,
            li: vec![0; total],
            lx: vec![0.0; total],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            y_vals: vec![0.0; n],
            y_idx: vec![0; n],
            elim: vec![0; n],
            marked: vec![false; n],
            next_in_col: vec![0; n],
            work: vec![0.0; n],
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    /// Loads numeric values given in the original entry order.
    pub fn set_values(&mut self, vals: &[f64]) {
        assert_eq!(vals.len(), self.map.len());
        for (p, &v) in vals.iter().enumerate() {
            self.kx[self.map[p]] = v;
        }
    }

    /// Numeric factorization. Returns how many pivots were regularized.
    pub fn factor(&mut self, reg: Option<DynamicReg>) -> Result<usize, LdlError> {
        let n = self.n;
        let mut bumped = 0;
        for i in 0..n {
            self.next_in_col[i] = self.lp[i];
            self.marked[i] = false;
            self.y_vals[i] = 0.0;
        }
        for k in 0..n {
            let mut nnz_y = 0;
            self.d[k] = 0.0;
            for p in self.kp[k]..self.kp[k + 1] {
                let b = self.ki[p];
                if b == k {
                    self.d[k] += self.kx[p];
                    continue;
                }
                self.y_vals[b] += self.kx[p];
                if !self.marked[b] {
                    self.marked[b] = true;
                    self.elim[0] = b;
                    let mut ne = 1;
                    let mut next = self.etree[b];
                    while next != NONE && next < k {
                        if self.marked[next] {
                            break;
                        }
                        self.marked[next] = true;
                        self.elim[ne] = next;
                        ne += 1;
                        next = self.etree[next];
                    }
                    while ne > 0 {
                        ne -= 1;
                        self.y_idx[nnz_y] = self.elim[ne];
                        nnz_y += 1;
                    }
                }
            }
            for t in (0..nnz_y).rev() {
                let c = self.y_idx[t];
                let slot = self.next_in_col[c];
                let yc = self.y_vals[c];
                for q in self.lp[c]..slot {
                    self.y_vals[self.li[q]] -= self.lx[q] * yc;
                }
                self.li[slot] = k;
                let l = yc * self.dinv[c];
                self.lx[slot] = l;
                self.d[k] -= yc * l;
                self.next_in_col[c] += 1;
                self.y_vals[c] = 0.0;
                self.marked[c] = false;
            }
            if let Some(r) = reg {
                if self.signs[k] * self.d[k] <= r.eps {
                    self.d[k] = self.signs[k] * r.delta;
                    bumped += 1;
                }
            }
            if self.d[k] == 0.0 || !self.d[k].is_finite() {
                return Err(LdlError::ZeroPivot(self.perm[k]));
            }
            self.dinv[k] = 1.0 / self.d[k];
        }
        Ok(bumped)
    }

    /// Solves K x = b in place (original ordering).
    pub fn solve(&mut self, b: &mut [f64]) {
        let n = self.n;
        let x = &mut self.work;
        for k in 0..n {
            x[k] = b[self.perm[k]];
        }
        for i in 0..n {
            let xi = x[i];
            for q in self.lp[i]..self.lp[i + 1] {
                x[self.li[q]] -= self.lx[q] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for q in self.lp[i]..self.lp[i + 1] {
                acc -= self.lx[q] * x[self.li[q]];
            }
            x[i] = acc;
        }
        for k in 0..n {
            b[self.perm[k]] = x[k];
        }
    }

    /// Pivots in factorization order.
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn upper_of(dense: &[Vec<f64>]) -> CscMatrix {
        let n = dense.len();
        let mut t = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                if dense[i][j] != 0.0 || i == j {
                    t.push((i, j, dense[i][j]));
                }
            }
        }
        CscMatrix::from_triplets(n, n, &t)
    }

    fn matvec(dense: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        dense
            .iter()
            .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn solves_quasidefinite_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, m) = (6, 4);
        let dim = n + m;
        let mut k = vec![vec![0.0; dim]; dim];
        for i in 0..n {
            k[i][i] = 1.0 + rng.gen::<f64>();
        }
        for i in 0..m {
            k[n + i][n + i] = -(0.5 + rng.gen::<f64>());
            for j in 0..n {
                if rng.gen::<f64>() < 0.5 {
                    let v = rng.gen_range(-2.0..2.0);
                    k[n + i][j] = v;
                    k[j][n + i] = v;
                }
            }
        }
        let mut signs = vec![1.0; n];
        signs.extend(vec![-1.0; m]);
        let a = upper_of(&k);
        let mut f = LdlFactor::new(&a, &signs).unwrap();
        f.set_values(&a.nzval);
        assert_eq!(f.factor(None).unwrap(), 0);
        let x: Vec<f64> = (0..dim).map(|i| (i as f64) - 3.0).collect();
        let mut b = matvec(&k, &x);
        f.solve(&mut b);
        for i in 0..dim {
            assert!((b[i] - x[i]).abs() < 1e-10, "{} vs {}", b[i], x[i]);
        }
        // pivots carry the inertia of the matrix
        assert_eq!(f.pivots().iter().filter(|d| **d > 0.0).count(), n);
    }

    #[test]
    fn dynamic_regularization_replaces_bad_pivots() {
        // [[1, 1], [1, 1]] is singular; the second pivot is zero
        let a = upper_of(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let mut f = LdlFactor::new(&a, &[1.0, 1.0]).unwrap();
        f.set_values(&a.nzval);
        assert!(f.factor(None).is_err());
        let bumped = f
            .factor(Some(DynamicReg {
                eps: 1e-13,
                delta: 1e-7,
            }))
            .unwrap();
        assert_eq!(bumped, 1);
    }

    #[test]
    fn rejects_lower_entries() {
        let a = CscMatrix::from_triplets(2, 2, &[(1, 0, 1.0), (0, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(
            LdlFactor::new(&a, &[1.0, 1.0]),
            Err(LdlError::NotUpper(1, 0))
        ));
    }

    #[test]
    fn refactor_with_new_values() {
        let a = upper_of(&[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ]);
        let mut f = LdlFactor::new(&a, &[1.0; 3]).unwrap();
        f.set_values(&a.nzval);
        f.factor(None).unwrap();
        let doubled: Vec<f64> = a.nzval.iter().map(|v| 2.0 * v).collect();
        f.set_values(&doubled);
        f.factor(None).unwrap();
        // K (1, 2, 1) = (6, 8, 4)
        let mut c = vec![12.0, 16.0, 8.0];
        f.solve(&mut c);
        for (ci, xi) in c.iter().zip([1.0, 2.0, 1.0]) {
            assert!((ci - xi).abs() < 1e-12);
        }
    }
}
