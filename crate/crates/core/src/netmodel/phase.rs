use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn letter(self) -> char {
        ['a', 'b', 'c'][self as usize]
    }
}

/// Ordered nonempty subset of {a, b, c}.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn new(phases: &[Phase]) -> Result<PhaseSet> {
        let bits = phases.iter().fold(0u8, |b, p| b | p.bit());
        if bits == 0 {
            return Err(Error::Schema("phase set must be nonempty".into()));
        }
        Ok(PhaseSet(bits))
    }

    pub fn single(p: Phase) -> PhaseSet {
        PhaseSet(p.bit())
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & p.bit() != 0
    }

    pub fn is_subset(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    /// Position of `p` within this set.
    pub fn index_of(self, p: Phase) -> Option<usize> {
        self.contains(p)
            .then(|| (self.0 & (p.bit() - 1)).count_ones() as usize)
    }

    /// Positions of `sub`'s phases inside `self`, or None if not a subset.
    pub fn positions(self, sub: PhaseSet) -> Option<Vec<usize>> {
        sub.is_subset(self)
            .then(|| sub.iter().map(|p| self.index_of(p).unwrap()).collect())
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhaseSet({self})")
    }
}

impl FromStr for PhaseSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<PhaseSet> {
        let mut bits = 0u8;
        let mut last: Option<Phase> = None;
        for ch in s.chars() {
            let p = match ch.to_ascii_lowercase() {
                'a' => Phase::A,
                'b' => Phase::B,
                'c' => Phase::C,
                _ => return Err(Error::Schema(format!("bad phase letter '{ch}' in \"{s}\""))),
            };
            if last.is_some_and(|l| l >= p) {
                return Err(Error::Schema(format!(
                    "phases \"{s}\" must be distinct and ordered a<b<c"
                )));
            }
            last = Some(p);
            bits |= p.bit();
        }
        if bits == 0 {
            return Err(Error::Schema("empty phase set".into()));
        }
        Ok(PhaseSet(bits))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    VoltagePu,
    CurrentPu,
    PowerPu,
    ImpedancePu,
    Dimensionless,
}

/// Complex vector indexed by a phase set.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVec {
    pub phases: PhaseSet,
    pub values: CVec,
    pub unit: Unit,
}

/// Complex matrix indexed by row and column phase sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseBlock {
    pub rows: PhaseSet,
    pub cols: PhaseSet,
    pub values: CMat,
    pub unit: Unit,
}

/// Hermitian block stored as its upper triangle (row-major, i <= j).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianBlock {
    pub phases: PhaseSet,
    upper: Vec<Complex64>,
    pub unit: Unit,
}

impl PhaseVec {
    pub fn new(phases: PhaseSet, values: CVec, unit: Unit) -> Result<Self> {
        if values.len() != phases.len() {
            return Err(Error::PhaseMismatch(format!(
                "{} values for phases {phases}",
                values.len()
            )));
        }
        Ok(PhaseVec {
            phases,
            values,
            unit,
        })
    }

    pub fn get(&self, p: Phase) -> Option<Complex64> {
        self.phases.index_of(p).map(|k| self.values[k])
    }

    pub fn project(&self, target: PhaseSet) -> Result<PhaseVec> {
        let v = project_vec(&self.values, self.phases, target)?;
        Ok(PhaseVec {
            phases: target,
            values: v,
            unit: self.unit,
        })
    }

    pub fn embed(&self, target: PhaseSet) -> Result<PhaseVec> {
        let v = embed_vec(&self.values, self.phases, target)?;
        Ok(PhaseVec {
            phases: target,
            values: v,
            unit: self.unit,
        })
    }
}

impl PhaseBlock {
    pub fn new(rows: PhaseSet, cols: PhaseSet, values: CMat, unit: Unit) -> Result<Self> {
        if values.nrows() != rows.len() || values.ncols() != cols.len() {
            return Err(Error::PhaseMismatch(format!(
                "{}x{} matrix for phases {rows}x{cols}",
                values.nrows(),
                values.ncols()
            )));
        }
        Ok(PhaseBlock {
            rows,
            cols,
            values,
            unit,
        })
    }

    pub fn square(phases: PhaseSet, values: CMat, unit: Unit) -> Result<Self> {
        Self::new(phases, phases, values, unit)
    }

    pub fn project(&self, target: PhaseSet) -> Result<PhaseBlock> {
        if self.rows != self.cols {
            return Err(Error::PhaseMismatch(
                "projection of a non-square block".into(),
            ));
        }
        let m = project_mat(&self.values, self.rows, target)?;
        Ok(PhaseBlock {
            rows: target,
            cols: target,
            values: m,
            unit: self.unit,
        })
    }

    pub fn embed(&self, target: PhaseSet) -> Result<PhaseBlock> {
        if self.rows != self.cols {
            return Err(Error::PhaseMismatch(
                "embedding of a non-square block".into(),
            ));
        }
        let m = embed_mat(&self.values, self.rows, target)?;
        Ok(PhaseBlock {
            rows: target,
            cols: target,
            values: m,
            unit: self.unit,
        })
    }
}

impl HermitianBlock {
    /// Takes the upper triangle of `m`; the diagonal keeps only its real part.
    pub fn from_upper(phases: PhaseSet, m: &CMat, unit: Unit) -> Result<Self> {
        let k = phases.len();
        if m.nrows() != k || m.ncols() != k {
            return Err(Error::PhaseMismatch(format!(
                "{}x{} matrix for phases {phases}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut upper = Vec::with_capacity(k * (k + 1) / 2);
        for i in 0..k {
            for j in i..k {
                let v = m[(i, j)];
                upper.push(if i == j { Complex64::new(v.re, 0.0) } else { v });
            }
        }
        Ok(HermitianBlock {
            phases,
            upper,
            unit,
        })
    }

    pub fn to_matrix(&self) -> CMat {
        let k = self.phases.len();
        let mut m = CMat::zeros(k, k);
        let mut it = self.upper.iter();
        for i in 0..k {
            for j in i..k {
                let v = *it.next().unwrap();
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        m
    }
}

/// Sub-vector on `target` phases of a vector over `from`.
pub fn project_vec(v: &CVec, from: PhaseSet, target: PhaseSet) -> Result<CVec> {
    let pos = from
        .positions(target)
        .ok_or_else(|| Error::PhaseMismatch(format!("cannot project {from} onto {target}")))?;
    Ok(CVec::from_iterator(pos.len(), pos.iter().map(|&k| v[k])))
}

/// Vector over `target` with zeros in phases missing from `from`.
pub fn embed_vec(v: &CVec, from: PhaseSet, target: PhaseSet) -> Result<CVec> {
    let pos = target
        .positions(from)
        .ok_or_else(|| Error::PhaseMismatch(format!("cannot embed {from} into {target}")))?;
    let mut out = CVec::zeros(target.len());
    for (k, &p) in pos.iter().enumerate() {
        out[p] = v[k];
    }
    Ok(out)
}

pub fn project_mat(m: &CMat, from: PhaseSet, target: PhaseSet) -> Result<CMat> {
    let pos = from
        .positions(target)
        .ok_or_else(|| Error::PhaseMismatch(format!("cannot project {from} onto {target}")))?;
    Ok(CMat::from_fn(pos.len(), pos.len(), |i, j| {
        m[(pos[i], pos[j])]
    }))
}

pub fn embed_mat(m: &CMat, from: PhaseSet, target: PhaseSet) -> Result<CMat> {
    let pos = target
        .positions(from)
        .ok_or_else(|| Error::PhaseMismatch(format!("cannot embed {from} into {target}")))?;
    let mut out = CMat::zeros(target.len(), target.len());
    for i in 0..pos.len() {
        for j in 0..pos.len() {
            out[(pos[i], pos[j])] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Diagonal of a square matrix as a vector.
pub fn diag(m: &CMat) -> CVec {
    m.diagonal()
}
