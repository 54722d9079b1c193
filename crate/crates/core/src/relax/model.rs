//! Complex affine expressions over a real conic program.

use std::f64::consts::SQRT_2;

use mpopf_conic::{AffExpr, ConeSpec, ProgramBuilder};
use num_complex::Complex64;

use crate::netmodel::{CMat, PhaseSet};

/// re + j im, each an affine expression in the real program variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CExpr {
    pub re: AffExpr,
    pub im: AffExpr,
}

impl CExpr {
    pub fn zero() -> CExpr {
        CExpr::default()
    }

    pub fn constant(c: Complex64) -> CExpr {
        CExpr {
            re: AffExpr::constant(c.re),
            im: AffExpr::constant(c.im),
        }
    }

    /// self += k * other
    pub fn add_scaled(&mut self, other: &CExpr, k: Complex64) {
        self.re.add_scaled(&other.re, k.re);
        self.re.add_scaled(&other.im, -k.im);
        self.im.add_scaled(&other.im, k.re);
        self.im.add_scaled(&other.re, k.im);
    }

    pub fn conj(&self) -> CExpr {
        CExpr {
            re: self.re.clone(),
            im: self.im.scaled(-1.0),
        }
    }

    pub fn compact(&mut self) {
        self.re.compact();
        self.im.compact();
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }
}

/// Dense matrix of complex expressions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatExpr {
    pub rows: usize,
    pub cols: usize,
    data: Vec<CExpr>,
}

impl CMatExpr {
    pub fn zeros(rows: usize, cols: usize) -> CMatExpr {
        CMatExpr {
            rows,
            cols,
            data: vec![CExpr::zero(); rows * cols],
        }
    }

    pub fn constant(m: &CMat) -> CMatExpr {
        let mut e = CMatExpr::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                *e.at_mut(i, j) = CExpr::constant(m[(i, j)]);
            }
        }
        e
    }

    pub fn at(&self, i: usize, j: usize) -> &CExpr {
        &self.data[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut CExpr {
        &mut self.data[i * self.cols + j]
    }

    /// Fresh k x k Hermitian matrix: real diagonal plus upper re / im parts.
    pub fn hermitian_var(pb: &mut ProgramBuilder, k: usize) -> CMatExpr {
        let mut e = CMatExpr::zeros(k, k);
        for i in 0..k {
            e.at_mut(i, i).re = AffExpr::var(pb.add_var());
        }
        for i in 0..k {
            for j in i + 1..k {
                let (re, im) = (pb.add_var(), pb.add_var());
                *e.at_mut(i, j) = CExpr {
                    re: AffExpr::var(re),
                    im: AffExpr::var(im),
                };
                *e.at_mut(j, i) = CExpr {
                    re: AffExpr::var(re),
                    im: AffExpr {
                        terms: vec![(im, -1.0)],
                        constant: 0.0,
                    },
                };
            }
        }
        e
    }

    /// Fresh unstructured complex matrix.
    pub fn complex_var(pb: &mut ProgramBuilder, rows: usize, cols: usize) -> CMatExpr {
        let mut e = CMatExpr::zeros(rows, cols);
        for d in &mut e.data {
            let (re, im) = (pb.add_var(), pb.add_var());
            *d = CExpr {
                re: AffExpr::var(re),
                im: AffExpr::var(im),
            };
        }
        e
    }

    pub fn adjoint(&self) -> CMatExpr {
        let mut e = CMatExpr::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *e.at_mut(j, i) = self.at(i, j).conj();
            }
        }
        e
    }

    /// self += k * other
    pub fn add_scaled(&mut self, other: &CMatExpr, k: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            a.add_scaled(b, Complex64::new(k, 0.0));
        }
    }

    pub fn add_constant(&mut self, m: &CMat, k: f64) {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let e = self.at_mut(i, j);
                e.re.constant += k * m[(i, j)].re;
                e.im.constant += k * m[(i, j)].im;
            }
        }
    }

    /// a * self
    pub fn left_mul(&self, a: &CMat) -> CMatExpr {
        assert_eq!(a.ncols(), self.rows);
        let mut e = CMatExpr::zeros(a.nrows(), self.cols);
        for i in 0..a.nrows() {
            for j in 0..self.cols {
                let out = e.at_mut(i, j);
                for k in 0..self.rows {
                    out.add_scaled(self.at(k, j), a[(i, k)]);
                }
                out.compact();
            }
        }
        e
    }

    /// self * b
    pub fn right_mul(&self, b: &CMat) -> CMatExpr {
        assert_eq!(b.nrows(), self.cols);
        let mut e = CMatExpr::zeros(self.rows, b.ncols());
        for i in 0..self.rows {
            for j in 0..b.ncols() {
                let out = e.at_mut(i, j);
                for k in 0..self.cols {
                    out.add_scaled(self.at(i, k), b[(k, j)]);
                }
                out.compact();
            }
        }
        e
    }

    /// Sub-block on `target` phases of a square block over `from`.
    pub fn project(&self, from: PhaseSet, target: PhaseSet) -> CMatExpr {
        let pos = from.positions(target).expect("projection onto a subset");
        let mut e = CMatExpr::zeros(pos.len(), pos.len());
        for (a, &i) in pos.iter().enumerate() {
            for (b, &j) in pos.iter().enumerate() {
                *e.at_mut(a, b) = self.at(i, j).clone();
            }
        }
        e
    }

    pub fn diagonal(&self) -> Vec<CExpr> {
        (0..self.rows.min(self.cols))
            .map(|i| self.at(i, i).clone())
            .collect()
    }

    /// [[a, b], [c, d]]
    pub fn blocks(a: &CMatExpr, b: &CMatExpr, c: &CMatExpr, d: &CMatExpr) -> CMatExpr {
        let (r, s) = (a.rows + c.rows, a.cols + b.cols);
        let mut e = CMatExpr::zeros(r, s);
        for i in 0..r {
            for j in 0..s {
                let src = match (i < a.rows, j < a.cols) {
                    (true, true) => a.at(i, j),
                    (true, false) => b.at(i, j - a.cols),
                    (false, true) => c.at(i - a.rows, j),
                    (false, false) => d.at(i - a.rows, j - a.cols),
                };
                *e.at_mut(i, j) = src.clone();
            }
        }
        e
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.at(i, j).eval(x))
    }
}

/// e = 0 as two real equalities.
pub fn add_complex_eq(pb: &mut ProgramBuilder, e: &CExpr) {
    let mut e = e.clone();
    e.compact();
    pb.add_eq(e.re);
    pb.add_eq(e.im);
}

/// M = 0 for a Hermitian-valued expression: real diagonal and upper triangle.
pub fn add_hermitian_eq(pb: &mut ProgramBuilder, m: &CMatExpr) {
    for i in 0..m.rows {
        for j in i..m.cols {
            let mut e = m.at(i, j).clone();
            e.compact();
            pb.add_eq(e.re);
            if i != j {
                pb.add_eq(e.im);
            }
        }
    }
}

/// M >= 0 for a Hermitian-valued expression through [[Re, -Im], [Im, Re]].
/// Returns the first row of the cone block.
pub fn add_hermitian_psd(pb: &mut ProgramBuilder, m: &CMatExpr) -> usize {
    let n = m.rows;
    let side = 2 * n;
    let entry = |r: usize, c: usize| -> AffExpr {
        let v = m.at(r % n, c % n);
        match (r < n, c < n) {
            (true, true) | (false, false) => v.re.clone(),
            (true, false) => v.im.scaled(-1.0),
            (false, true) => v.im.clone(),
        }
    };
    let mut exprs = Vec::with_capacity(side * (side + 1) / 2);
    for j in 0..side {
        for i in 0..=j {
            let e = entry(i, j);
            exprs.push(if i == j { e } else { e.scaled(SQRT_2) });
        }
    }
    pb.add_cone(ConeSpec::Psd(side), &exprs)
}
