//! Row reduction and Ruiz equilibration ahead of the interior-point solve.

use std::collections::HashMap;

use crate::program::{ConeSpec, ConicProgram};
use crate::sparse::{norm_inf, CscMatrix};

/// Result of removing empty and duplicate rows from Zero / NonNeg blocks.
#[derive(Debug, Clone)]
pub enum Presolve {
    Reduced(Reduced),
    /// A dual ray z (over the original rows) with A'z = 0, b'z = -1, z in K*.
    Infeasible(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct Reduced {
    pub prog: ConicProgram,
    /// original row index of each kept row
    pub keep: Vec<usize>,
    pub orig_rows: usize,
}

impl Reduced {
    /// Scatters reduced-row vectors back to the original rows (zeros elsewhere).
    pub fn expand(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.orig_rows];
        for (k, &i) in self.keep.iter().enumerate() {
            out[i] = v[k];
        }
        out
    }
}

pub fn presolve(p: &ConicProgram, tol: f64) -> Presolve {
    let m = p.num_rows();
    let at = p.a.transpose();
    let at = &at;
    let row = |i: usize| (at.colptr[i]..at.colptr[i + 1]).map(move |q| (at.rowval[q], at.nzval[q]));
    let mut drop = vec![false; m];
    let ranges = p.cone_ranges();
    for (cone, rg) in p.cones.iter().zip(&ranges) {
        let eq = match cone {
            ConeSpec::Zero(_) => true,
            ConeSpec::NonNeg(_) => false,
            _ => continue,
        };
        // rows with a numerically empty A
        for i in rg.clone() {
            if row(i).all(|(_, v)| v == 0.0) {
                let b = p.b[i];
                if eq && b.abs() > tol {
                    let mut z = vec![0.0; m];
                    z[i] = -b.signum() / b.abs();
                    return Presolve::Infeasible(z);
                }
                if !eq && b < -tol {
                    let mut z = vec![0.0; m];
                    z[i] = 1.0 / -b;
                    return Presolve::Infeasible(z);
                }
                drop[i] = true;
            }
        }
        // exact duplicates
        let mut seen: HashMap<Vec<(usize, u64)>, usize> = HashMap::new();
        for i in rg.clone() {
            if drop[i] {
                continue;
            }
            let key: Vec<(usize, u64)> = row(i)
                .filter(|e| e.1 != 0.0)
                .map(|(j, v)| (j, v.to_bits()))
                .collect();
            match seen.get(&key) {
                None => {
                    seen.insert(key, i);
                }
                Some(&k) => {
                    if eq {
                        let diff = p.b[i] - p.b[k];
                        if diff.abs() > tol * (1.0 + p.b[i].abs().max(p.b[k].abs())) {
                            // (A_i - A_k) x = b_i - b_k = diff, while the rows are equal
                            let mut z = vec![0.0; m];
                            z[i] = -diff.signum() / diff.abs();
                            z[k] = diff.signum() / diff.abs();
                            return Presolve::Infeasible(z);
                        }
                        drop[i] = true;
                    } else if p.b[i] >= p.b[k] {
                        drop[i] = true;
                    } else {
                        drop[k] = true;
                        seen.insert(key, i);
                    }
                }
            }
        }
    }

    let keep: Vec<usize> = (0..m).filter(|&i| !drop[i]).collect();
    let mut new_index = vec![usize::MAX; m];
    for (k, &i) in keep.iter().enumerate() {
        new_index[i] = k;
    }
    let mut trip = Vec::with_capacity(p.a.nnz());
    for (i, j, v) in p.a.triplets() {
        if !drop[i] {
            trip.push((new_index[i], j, v));
        }
    }
    let mut cones = Vec::new();
    for (cone, rg) in p.cones.iter().zip(&ranges) {
        let kept = rg.clone().filter(|&i| !drop[i]).count();
        let c = match cone {
            ConeSpec::Zero(_) => ConeSpec::Zero(kept),
            ConeSpec::NonNeg(_) => ConeSpec::NonNeg(kept),
            other => *other,
        };
        if c.dim() > 0 {
            cones.push(c);
        }
    }
    let b = keep.iter().map(|&i| p.b[i]).collect();
    let a = CscMatrix::from_triplets(keep.len(), p.num_vars(), &trip);
    let prog =
        ConicProgram::new(p.c.clone(), a, b, cones).expect("presolve keeps dimensions consistent");
    Presolve::Reduced(Reduced {
        prog,
        keep,
        orig_rows: m,
    })
}

/// Diagonal scalings with A_s = E A D, b_s = E b, c_s = k D c.
#[derive(Debug, Clone)]
pub struct Scaling {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub cost: f64,
}

const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;

pub fn identity_scaling(p: &ConicProgram) -> Scaling {
    Scaling {
        d: vec![1.0; p.num_vars()],
        e: vec![1.0; p.num_rows()],
        cost: 1.0,
    }
}

/// Ruiz equilibration of [0 A'; A 0]. Row factors are uniform within each
/// SOC / PSD block so the cones are preserved.
pub fn equilibrate(p: &ConicProgram, sweeps: usize) -> (ConicProgram, Scaling) {
    let (m, n) = (p.num_rows(), p.num_vars());
    let mut a = p.a.clone();
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let ranges = p.cone_ranges();
    let clamp = |v: f64| {
        if v == 0.0 {
            1.0
        } else {
            (1.0 / v.sqrt()).clamp(SCALE_MIN, SCALE_MAX)
        }
    };
    for _ in 0..sweeps {
        let mut col = vec![0.0f64; n];
        let mut row = vec![0.0f64; m];
        for j in 0..n {
            for q in a.colptr[j]..a.colptr[j + 1] {
                let v = a.nzval[q].abs();
                col[j] = col[j].max(v);
                row[a.rowval[q]] = row[a.rowval[q]].max(v);
            }
        }
        for (cone, rg) in p.cones.iter().zip(&ranges) {
            if matches!(cone, ConeSpec::Soc(_) | ConeSpec::Psd(_)) {
                let mx = row[rg.clone()].iter().cloned().fold(0.0, f64::max);
                row[rg.clone()].fill(mx);
            }
        }
        if col
            .iter()
            .chain(&row)
            .all(|v| *v == 0.0 || (v - 1.0).abs() < 1e-3)
        {
            break;
        }
        let dc: Vec<f64> = col.iter().map(|v| clamp(*v)).collect();
        let er: Vec<f64> = row.iter().map(|v| clamp(*v)).collect();
        for j in 0..n {
            for q in a.colptr[j]..a.colptr[j + 1] {
                a.nzval[q] *= dc[j] * er[a.rowval[q]];
            }
            d[j] = (d[j] * dc[j]).clamp(SCALE_MIN, SCALE_MAX);
        }
        for i in 0..m {
            e[i] = (e[i] * er[i]).clamp(SCALE_MIN, SCALE_MAX);
        }
    }
    // rebuild from the accumulated factors so clamping stays consistent
    let mut a = p.a.clone();
    for j in 0..n {
        for q in a.colptr[j]..a.colptr[j + 1] {
            a.nzval[q] *= d[j] * e[a.rowval[q]];
        }
    }
    let b: Vec<f64> = p.b.iter().zip(&e).map(|(b, e)| b * e).collect();
    let mut c: Vec<f64> = p.c.iter().zip(&d).map(|(c, d)| c * d).collect();
    let cn = norm_inf(&c);
    let cost = if cn > 0.0 {
        (1.0 / cn).clamp(SCALE_MIN, SCALE_MAX)
    } else {
        1.0
    };
    for v in &mut c {
        *v *= cost;
    }
    let prog = ConicProgram::new(c, a, b, p.cones.clone()).expect("scaling keeps dimensions");
    (prog, Scaling { d, e, cost })
}
