//! Problem data: `min c'x  s.t.  A x + s = b,  s in K`.
//!
//! K is a product of cones in the order they are listed. x is free; equality
//! constraints are rows in a `Zero` cone.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::cones::svec_len;
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeSpec {
    /// s = 0
    Zero(usize),
    /// s >= 0 elementwise
    NonNeg(usize),
    /// s0 >= |s1..|
    Soc(usize),
    /// svec of a symmetric positive semidefinite matrix of the given side
    Psd(usize),
}

impl ConeSpec {
    pub fn dim(&self) -> usize {
        match *self {
            ConeSpec::Zero(d) | ConeSpec::NonNeg(d) | ConeSpec::Soc(d) => d,
            ConeSpec::Psd(n) => svec_len(n),
        }
    }

    fn keyword(&self) -> (&'static str, usize) {
        match *self {
            ConeSpec::Zero(d) => ("zero", d),
            ConeSpec::NonNeg(d) => ("nonneg", d),
            ConeSpec::Soc(d) => ("soc", d),
            ConeSpec::Psd(n) => ("psd", n),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProgramError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("second-order cone needs dimension >= 1")]
    EmptySoc,
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub c: Vec<f64>,
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<ConeSpec>,
}

impl ConicProgram {
    pub fn new(
        c: Vec<f64>,
        a: CscMatrix,
        b: Vec<f64>,
        cones: Vec<ConeSpec>,
    ) -> Result<Self, ProgramError> {
        let m: usize = cones.iter().map(|k| k.dim()).sum();
        if a.ncols != c.len() {
            return Err(ProgramError::Dimension(format!(
                "A has {} columns but c has {}",
                a.ncols,
                c.len()
            )));
        }
        if a.nrows != b.len() || m != b.len() {
            return Err(ProgramError::Dimension(format!(
                "A has {} rows, b has {}, cones cover {}",
                a.nrows,
                b.len(),
                m
            )));
        }
        if cones.iter().any(|k| matches!(k, ConeSpec::Soc(0))) {
            return Err(ProgramError::EmptySoc);
        }
        Ok(ConicProgram { c, a, b, cones })
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// Row ranges of each cone block.
    pub fn cone_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut off = 0;
        self.cones
            .iter()
            .map(|k| {
                let r = off..off + k.dim();
                off += k.dim();
                r
            })
            .collect()
    }

    /// Plain-text triplet dump for debugging and cross-checking.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "conic-program 1")?;
        writeln!(w, "dims {} {}", self.num_vars(), self.num_rows())?;
        let mut line = String::from("cones");
        for k in &self.cones {
            let (name, d) = k.keyword();
            write!(line, " {name}:{d}").unwrap();
        }
        writeln!(w, "{line}")?;
        let cnz: Vec<_> = self
            .c
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .collect();
        writeln!(w, "c {}", cnz.len())?;
        for (i, v) in cnz {
            writeln!(w, "{i} {v:?}")?;
        }
        let bnz: Vec<_> = self
            .b
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .collect();
        writeln!(w, "b {}", bnz.len())?;
        for (i, v) in bnz {
            writeln!(w, "{i} {v:?}")?;
        }
        let trip = self.a.triplets();
        writeln!(w, "A {}", trip.len())?;
        for (i, j, v) in trip {
            writeln!(w, "{i} {j} {v:?}")?;
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(r: R) -> Result<Self, ProgramError> {
        let lines: Vec<String> = r.lines().collect::<Result<_, _>>()?;
        let mut it = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, msg: &str| ProgramError::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let mut next = |what: &str| {
            it.next()
                .ok_or_else(|| err(lines.len(), &format!("missing {what}")))
        };

        let (ln, head) = next("header")?;
        if head.trim() != "conic-program 1" {
            return Err(err(ln, "bad header"));
        }
        let (ln, dims) = next("dims")?;
        let d: Vec<usize> = dims
            .split_whitespace()
            .skip(1)
            .map(|t| t.parse().map_err(|_| err(ln, "bad dims")))
            .collect::<Result<_, _>>()?;
        if d.len() != 2 {
            return Err(err(ln, "dims needs two values"));
        }
        let (n, m) = (d[0], d[1]);
        let (ln, cl) = next("cones")?;
        let mut cones = Vec::new();
        for tok in cl.split_whitespace().skip(1) {
            let (name, dim) = tok
                .split_once(':')
                .ok_or_else(|| err(ln, "bad cone token"))?;
            let dim: usize = dim.parse().map_err(|_| err(ln, "bad cone dim"))?;
            cones.push(match name {
                "zero" => ConeSpec::Zero(dim),
                "nonneg" => ConeSpec::NonNeg(dim),
                "soc" => ConeSpec::Soc(dim),
                "psd" => ConeSpec::Psd(dim),
                _ => return Err(err(ln, "unknown cone")),
            });
        }
        let mut read_section =
            |key: &str, width: usize| -> Result<Vec<(Vec<usize>, f64)>, ProgramError> {
                let (ln, h) = next(key)?;
                let mut parts = h.split_whitespace();
                if parts.next() != Some(key) {
                    return Err(err(ln, &format!("expected section {key}")));
                }
                let count: usize = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(ln, "bad count"))?;
                let mut out = Vec::with_capacity(count);
                for _ in 0..count {
                    let (ln, l) = next(key)?;
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    if toks.len() != width + 1 {
                        return Err(err(ln, "wrong number of fields"));
                    }
                    let idx = toks[..width]
                        .iter()
                        .map(|t| t.parse::<usize>().map_err(|_| err(ln, "bad index")))
                        .collect::<Result<Vec<_>, _>>()?;
                    let v: f64 = toks[width].parse().map_err(|_| err(ln, "bad value"))?;
                    out.push((idx, v));
                }
                Ok(out)
            };
        let cs = read_section("c", 1)?;
        let bs = read_section("b", 1)?;
        let at = read_section("A", 2)?;
        let mut c = vec![0.0; n];
        for (i, v) in cs {
            *c.get_mut(i[0])
                .ok_or_else(|| err(0, "c index out of range"))? = v;
        }
        let mut b = vec![0.0; m];
        for (i, v) in bs {
            *b.get_mut(i[0])
                .ok_or_else(|| err(0, "b index out of range"))? = v;
        }
        let mut trip = Vec::with_capacity(at.len());
        for (i, v) in at {
            if i[0] >= m || i[1] >= n {
                return Err(err(0, "A index out of range"));
            }
            trip.push((i[0], i[1], v));
        }
        ConicProgram::new(c, CscMatrix::from_triplets(m, n, &trip), b, cones)
    }
}

/// Affine expression sum(coef * x[var]) + constant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffExpr {
    pub fn constant(c: f64) -> Self {
        AffExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: usize) -> Self {
        AffExpr {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
    }

    pub fn add_scaled(&mut self, other: &AffExpr, k: f64) {
        if k == 0.0 {
            return;
        }
        for &(v, c) in &other.terms {
            self.terms.push((v, k * c));
        }
        self.constant += k * other.constant;
    }

    pub fn scaled(&self, k: f64) -> AffExpr {
        let mut e = AffExpr::default();
        e.add_scaled(self, k);
        e
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn compact(&mut self) {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>() + self.constant
    }
}

/// Incremental construction of a conic program from affine expressions.
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    c: Vec<f64>,
    trip: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<ConeSpec>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self) -> usize {
        self.c.push(0.0);
        self.c.len() - 1
    }

    pub fn add_vars(&mut self, k: usize) -> std::ops::Range<usize> {
        let start = self.c.len();
        self.c.resize(start + k, 0.0);
        start..start + k
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// Adds `expr` to the objective (its constant is dropped).
    pub fn add_objective(&mut self, expr: &AffExpr) {
        for &(v, k) in &expr.terms {
            self.c[v] += k;
        }
    }

    /// Requires the stacked expressions to lie in `cone`. Returns the first
    /// row index of the block.
    pub fn add_cone(&mut self, cone: ConeSpec, exprs: &[AffExpr]) -> usize {
        assert_eq!(
            cone.dim(),
            exprs.len(),
            "cone {cone:?} needs {} expressions",
            cone.dim()
        );
        let first = self.b.len();
        for (k, e) in exprs.iter().enumerate() {
            let row = first + k;
            for &(v, coef) in &e.terms {
                assert!(v < self.c.len(), "unknown variable {v}");
                if coef != 0.0 {
                    self.trip.push((row, v, -coef));
                }
            }
            self.b.push(e.constant);
        }
        self.cones.push(cone);
        first
    }

    pub fn add_eq(&mut self, expr: AffExpr) -> usize {
        self.add_cone(ConeSpec::Zero(1), &[expr])
    }

    pub fn add_nonneg(&mut self, expr: AffExpr) -> usize {
        self.add_cone(ConeSpec::NonNeg(1), &[expr])
    }

    /// Collapses runs of consecutive scalar Zero / NonNeg blocks into single
    /// blocks and returns the finished program.
    pub fn build(self) -> ConicProgram {
        let mut cones: Vec<ConeSpec> = Vec::new();
        for k in self.cones {
            match (cones.last_mut(), k) {
                (Some(ConeSpec::Zero(d)), ConeSpec::Zero(e)) => *d += e,
                (Some(ConeSpec::NonNeg(d)), ConeSpec::NonNeg(e)) => *d += e,
                _ => cones.push(k),
            }
        }
        let m = self.b.len();
        let a = CscMatrix::from_triplets(m, self.c.len(), &self.trip);
        ConicProgram::new(self.c, a, self.b, cones).expect("builder keeps dimensions consistent")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConicProgram {
        let mut pb = ProgramBuilder::new();
        let x = pb.add_vars(3);
        pb.add_objective(&AffExpr {
            terms: vec![(x.start, 1.0), (x.start + 2, -0.5)],
            constant: 0.0,
        });
        pb.add_eq(AffExpr {
            terms: vec![(0, 1.0), (1, 1.0)],
            constant: -1.0,
        });
        pb.add_nonneg(AffExpr::var(2));
        pb.add_nonneg(AffExpr {
            terms: vec![(2, -1.0)],
            constant: 3.0,
        });
        pb.add_cone(
            ConeSpec::Soc(3),
            &[AffExpr::constant(2.0), AffExpr::var(0), AffExpr::var(1)],
        );
        pb.build()
    }

    #[test]
    fn builder_merges_scalar_blocks() {
        let p = sample();
        assert_eq!(
            p.cones,
            vec![ConeSpec::Zero(1), ConeSpec::NonNeg(2), ConeSpec::Soc(3)]
        );
        assert_eq!(p.num_rows(), 6);
        // x0 + x1 - 1 = 0 stored as s = b - A x with b = -1, A = [-1, -1, 0]
        assert_eq!(p.b[0], -1.0);
        assert_eq!(p.a.to_dense()[0], vec![-1.0, -1.0, 0.0]);
    }

    #[test]
    fn triplet_dump_roundtrip() {
        let p = sample();
        let mut buf = Vec::new();
        p.write_triplets(&mut buf).unwrap();
        let q = ConicProgram::read_triplets(&buf[..]).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let a = CscMatrix::zeros(2, 1);
        assert!(
            ConicProgram::new(vec![0.0], a, vec![0.0, 0.0], vec![ConeSpec::NonNeg(3)]).is_err()
        );
    }

    #[test]
    fn affexpr_compact_merges_terms() {
        let mut e = AffExpr {
            terms: vec![(3, 1.0), (1, 2.0), (3, -1.0), (1, 0.5)],
            constant: 1.0,
        };
        e.compact();
        assert_eq!(e.terms, vec![(1, 2.5)]);
        assert_eq!(e.eval(&[0.0, 2.0, 0.0, 9.0]), 6.0);
    }
}
