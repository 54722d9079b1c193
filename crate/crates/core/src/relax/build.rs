//! Conic programs for the bus-injection and branch-flow SDP relaxations.

use mpopf_conic::{AffExpr, ConicProgram, ProgramBuilder};
use num_complex::Complex64;

use super::device::device_constraints;
use super::model::{add_complex_eq, add_hermitian_eq, add_hermitian_psd, CExpr, CMatExpr};
use super::{BfmSdpPoint, BimSdpPoint};
use crate::error::{Error, Result};
use crate::netmodel::{errors_only, validate_network, CMat, CVec, Network, PhaseSet};
use crate::powerflow::admittances;

/// Program expressions for each component of a BIM-SDP point.
#[derive(Debug, Clone)]
pub struct BimIndex {
    pub s: Vec<Vec<CExpr>>,
    pub v: Vec<CMatExpr>,
    /// W_ij for each line i -> j
    pub w: Vec<CMatExpr>,
}

/// Program expressions for each component of a BFM-SDP point.
#[derive(Debug, Clone)]
pub struct BfmIndex {
    pub s: Vec<Vec<CExpr>>,
    pub v: Vec<CMatExpr>,
    pub flow: Vec<CMatExpr>,
    pub ell: Vec<CMatExpr>,
}

fn eval_vec(e: &[CExpr], x: &[f64]) -> CVec {
    CVec::from_iterator(e.len(), e.iter().map(|c| c.eval(x)))
}

impl BimIndex {
    pub fn extract(&self, x: &[f64]) -> BimSdpPoint {
        BimSdpPoint {
            s: self.s.iter().map(|e| eval_vec(e, x)).collect(),
            v: self.v.iter().map(|m| m.eval(x)).collect(),
            w: self.w.iter().map(|m| m.eval(x)).collect(),
        }
    }
}

impl BfmIndex {
    pub fn extract(&self, x: &[f64]) -> BfmSdpPoint {
        BfmSdpPoint {
            s: self.s.iter().map(|e| eval_vec(e, x)).collect(),
            v: self.v.iter().map(|m| m.eval(x)).collect(),
            flow: self.flow.iter().map(|m| m.eval(x)).collect(),
            ell: self.ell.iter().map(|m| m.eval(x)).collect(),
        }
    }
}

/// Sum over buses and phases of Re(s), the total loss once injections balance.
pub fn loss_objective(s: &[Vec<CExpr>]) -> AffExpr {
    let mut obj = AffExpr::default();
    for e in s.iter().flatten() {
        obj.add_scaled(&e.re, 1.0);
    }
    obj.compact();
    obj
}

/// The same objective evaluated on numeric injections.
pub fn loss_value(s: &[CVec]) -> f64 {
    s.iter().flat_map(|x| x.iter()).map(|x| x.re).sum()
}

fn ensure_valid(net: &Network) -> Result<()> {
    let errs = errors_only(&validate_network(net));
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errs))
    }
}

/// Injection expressions: a free variable at the substation, device sets
/// elsewhere (zero where a bus has no devices).
fn injections(pb: &mut ProgramBuilder, net: &Network) -> Result<Vec<Vec<CExpr>>> {
    let mut out = Vec::with_capacity(net.num_buses());
    for b in &net.buses {
        let k = b.phases.len();
        let s = if b.is_substation() {
            let m = CMatExpr::complex_var(pb, k, 1);
            (0..k).map(|i| m.at(i, 0).clone()).collect()
        } else {
            match b.region() {
                Some(r) => device_constraints(pb, &r, b.phases)?,
                None => vec![CExpr::zero(); k],
            }
        };
        out.push(s);
    }
    Ok(out)
}

/// v_0 fixed, Hermitian variables elsewhere, with squared magnitude bounds.
fn voltages(pb: &mut ProgramBuilder, net: &Network) -> Vec<CMatExpr> {
    let mut out = Vec::with_capacity(net.num_buses());
    for b in &net.buses {
        if b.is_substation() {
            out.push(CMatExpr::constant(&net.v0()));
            continue;
        }
        let v = CMatExpr::hermitian_var(pb, b.phases.len());
        for (k, (lo, hi)) in b.v_min.iter().zip(&b.v_max).enumerate() {
            let d = &v.at(k, k).re;
            let mut lower = d.clone();
            lower.constant -= lo * lo;
            pb.add_nonneg(lower);
            let mut upper = d.scaled(-1.0);
            upper.constant += hi * hi;
            pb.add_nonneg(upper);
        }
        out.push(v);
    }
    out
}

/// acc[pos[k]] += sign * d[k]
fn accumulate(acc: &mut [CExpr], d: &[CExpr], outer: PhaseSet, inner: PhaseSet, sign: f64) {
    let pos = outer
        .positions(inner)
        .expect("line phases lie within the bus phases");
    for (k, e) in d.iter().enumerate() {
        acc[pos[k]].add_scaled(e, Complex64::new(sign, 0.0));
    }
}

fn close_balances(pb: &mut ProgramBuilder, bal: Vec<Vec<CExpr>>) {
    for mut e in bal.into_iter().flatten() {
        e.compact();
        add_complex_eq(pb, &e);
    }
}

/// Relaxation of the bus injection model: W_ji is eliminated as W_ij^H.
pub fn build_bim_sdp(net: &Network) -> Result<(ConicProgram, BimIndex)> {
    ensure_valid(net)?;
    let y = admittances(net)?;
    let mut pb = ProgramBuilder::new();
    let s = injections(&mut pb, net)?;
    let v = voltages(&mut pb, net);
    let w: Vec<CMatExpr> = net
        .lines
        .iter()
        .map(|l| CMatExpr::complex_var(&mut pb, l.phases.len(), l.phases.len()))
        .collect();

    let mut bal = s.clone();
    for (k, l) in net.lines.iter().enumerate() {
        let (i, j) = (l.from, l.to);
        let yh = y[k].adjoint();
        let vi = v[i].project(net.phases(i), l.phases);
        let wh = w[k].adjoint();
        let mut di = vi.clone();
        di.add_scaled(&w[k], -1.0);
        let mut dj = v[j].clone();
        dj.add_scaled(&wh, -1.0);
        accumulate(
            &mut bal[i],
            &di.right_mul(&yh).diagonal(),
            net.phases(i),
            l.phases,
            -1.0,
        );
        accumulate(
            &mut bal[j],
            &dj.right_mul(&yh).diagonal(),
            net.phases(j),
            l.phases,
            -1.0,
        );
        add_hermitian_psd(&mut pb, &CMatExpr::blocks(&vi, &w[k], &wh, &v[j]));
    }
    close_balances(&mut pb, bal);
    pb.add_objective(&loss_objective(&s));
    Ok((pb.build(), BimIndex { s, v, w }))
}

/// Relaxation of the branch flow model.
pub fn build_bfm_sdp(net: &Network) -> Result<(ConicProgram, BfmIndex)> {
    ensure_valid(net)?;
    let mut pb = ProgramBuilder::new();
    let s = injections(&mut pb, net)?;
    let v = voltages(&mut pb, net);
    let mut flow = Vec::with_capacity(net.lines.len());
    let mut ell = Vec::with_capacity(net.lines.len());
    for l in &net.lines {
        let k = l.phases.len();
        flow.push(CMatExpr::complex_var(&mut pb, k, k));
        ell.push(CMatExpr::hermitian_var(&mut pb, k));
    }

    let mut bal = s.clone();
    for (k, l) in net.lines.iter().enumerate() {
        let (i, j) = (l.from, l.to);
        let z: &CMat = &l.z;
        let zh = z.adjoint();
        let zl = ell[k].left_mul(z);
        // receiving end diag(S - z l) at j, sending end diag(S) leaves i
        let mut recv = flow[k].clone();
        recv.add_scaled(&zl, -1.0);
        accumulate(&mut bal[j], &recv.diagonal(), net.phases(j), l.phases, 1.0);
        accumulate(
            &mut bal[i],
            &flow[k].diagonal(),
            net.phases(i),
            l.phases,
            -1.0,
        );

        // v_j - v_i + (S z^H + z S^H) - z l z^H = 0
        let vi = v[i].project(net.phases(i), l.phases);
        let szh = flow[k].right_mul(&zh);
        let mut e = v[j].clone();
        e.add_scaled(&vi, -1.0);
        e.add_scaled(&szh, 1.0);
        e.add_scaled(&szh.adjoint(), 1.0);
        e.add_scaled(&zl.right_mul(&zh), -1.0);
        add_hermitian_eq(&mut pb, &e);

        add_hermitian_psd(
            &mut pb,
            &CMatExpr::blocks(&vi, &flow[k], &flow[k].adjoint(), &ell[k]),
        );
    }
    close_balances(&mut pb, bal);
    pb.add_objective(&loss_objective(&s));
    Ok((pb.build(), BfmIndex { s, v, flow, ell }))
}
