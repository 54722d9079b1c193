//! Semidefinite relaxations of optimal power flow on radial networks, the
//! bijection between their feasible sets, and voltage recovery.

mod build;
pub mod device;
pub mod model;
mod opf;
mod recover;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigendecompose, rank_ratio};
use crate::netmodel::{embed_vec, project_mat, project_vec, CMat, CVec, Network};
use crate::powerflow::{admittances, bfm_from_voltages, vec_inf, BranchFlowState};

pub use build::{build_bfm_sdp, build_bim_sdp, loss_objective, loss_value, BfmIndex, BimIndex};
pub use device::{device_constraints, device_distance};
pub use opf::{solve_opf, Model, OpfOptions, OpfResult};
pub use recover::{recover_voltages_alg1, recover_voltages_alg2, Recovery};

/// Default bound on |lambda_2 / lambda_1| for calling a block rank one.
pub const DEFAULT_THRESHOLD: f64 = 1e-6;

/// (s, v, W) with W stored once per line as W_ij (W_ji = W_ij^H).
#[derive(Debug, Clone, PartialEq)]
pub struct BimSdpPoint {
    pub s: Vec<CVec>,
    pub v: Vec<CMat>,
    pub w: Vec<CMat>,
}

/// (s, v, S, l)
#[derive(Debug, Clone, PartialEq)]
pub struct BfmSdpPoint {
    pub s: Vec<CVec>,
    pub v: Vec<CMat>,
    pub flow: Vec<CMat>,
    pub ell: Vec<CMat>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RelaxPoint {
    Bim(BimSdpPoint),
    Bfm(BfmSdpPoint),
}

impl BimSdpPoint {
    /// [[v_i, W_ij], [W_ij^H, v_j]] on the line's phases.
    pub fn line_block(&self, net: &Network, k: usize) -> Result<CMat> {
        let l = &net.lines[k];
        let vi = project_mat(&self.v[l.from], net.phases(l.from), l.phases)?;
        Ok(stack(&vi, &self.w[k], &self.v[l.to]))
    }
}

impl BfmSdpPoint {
    /// [[v_i, S_ij], [S_ij^H, l_ij]] on the line's phases.
    pub fn line_block(&self, net: &Network, k: usize) -> Result<CMat> {
        let l = &net.lines[k];
        let vi = project_mat(&self.v[l.from], net.phases(l.from), l.phases)?;
        Ok(stack(&vi, &self.flow[k], &self.ell[k]))
    }
}

impl RelaxPoint {
    pub fn line_block(&self, net: &Network, k: usize) -> Result<CMat> {
        match self {
            RelaxPoint::Bim(p) => p.line_block(net, k),
            RelaxPoint::Bfm(p) => p.line_block(net, k),
        }
    }

    pub fn injections(&self) -> &[CVec] {
        match self {
            RelaxPoint::Bim(p) => &p.s,
            RelaxPoint::Bfm(p) => &p.s,
        }
    }

    pub fn voltages(&self) -> &[CMat] {
        match self {
            RelaxPoint::Bim(p) => &p.v,
            RelaxPoint::Bfm(p) => &p.v,
        }
    }
}

fn stack(a: &CMat, b: &CMat, d: &CMat) -> CMat {
    let k = a.nrows();
    let mut m = CMat::zeros(2 * k, 2 * k);
    m.view_mut((0, 0), (k, k)).copy_from(a);
    m.view_mut((0, k), (k, k)).copy_from(b);
    m.view_mut((k, 0), (k, k)).copy_from(&b.adjoint());
    m.view_mut((k, k), (k, k)).copy_from(d);
    m
}

/// Forward map: S = (v_i - W) y^H, l = y (v_i - W^H - W + v_j) y^H.
pub fn map_f(p: &BimSdpPoint, net: &Network) -> Result<BfmSdpPoint> {
    let y = admittances(net)?;
    let mut flow = Vec::with_capacity(net.lines.len());
    let mut ell = Vec::with_capacity(net.lines.len());
    for (k, l) in net.lines.iter().enumerate() {
        let vi = project_mat(&p.v[l.from], net.phases(l.from), l.phases)?;
        let w = &p.w[k];
        let yh = y[k].adjoint();
        flow.push((&vi - w) * &yh);
        // the difference is small next to its terms; sum without cancellation loss
        let d = CMat::from_fn(vi.nrows(), vi.ncols(), |r, c| {
            let terms = [vi[(r, c)], p.v[l.to][(r, c)], -w[(c, r)].conj(), -w[(r, c)]];
            Complex64::new(
                compensated_sum(terms.iter().map(|t| t.re)),
                compensated_sum(terms.iter().map(|t| t.im)),
            )
        });
        ell.push(&y[k] * d * &yh);
    }
    Ok(BfmSdpPoint {
        s: p.s.clone(),
        v: p.v.clone(),
        flow,
        ell,
    })
}

/// Neumaier summation.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() {
            (s - t) + x
        } else {
            (x - t) + s
        };
        s = t;
    }
    s + c
}

/// Inverse map: W = v_i - S z^H.
pub fn map_g(p: &BfmSdpPoint, net: &Network) -> Result<BimSdpPoint> {
    let mut w = Vec::with_capacity(net.lines.len());
    for (k, l) in net.lines.iter().enumerate() {
        let vi = project_mat(&p.v[l.from], net.phases(l.from), l.phases)?;
        w.push(vi - &p.flow[k] * l.z.adjoint());
    }
    Ok(BimSdpPoint {
        s: p.s.clone(),
        v: p.v.clone(),
        w,
    })
}

/// Rank-one point built from a voltage profile: v = V V^H, W_ij = V_i V_j^H
/// and s from the bus-injection model.
pub fn bim_point_from_voltages(net: &Network, v: &[CVec]) -> Result<BimSdpPoint> {
    let vv: Vec<CMat> = v.iter().map(|x| x * x.adjoint()).collect();
    let mut w = Vec::with_capacity(net.lines.len());
    for l in &net.lines {
        let vi = project_vec(&v[l.from], net.phases(l.from), l.phases)?;
        w.push(&vi * v[l.to].adjoint());
    }
    let mut p = BimSdpPoint {
        s: v.iter().map(|x| CVec::zeros(x.len())).collect(),
        v: vv,
        w,
    };
    p.s = bim_balance(net, &p)?.into_iter().map(|r| -r).collect();
    Ok(p)
}

/// Rank-one point from a voltage profile through the branch flow model.
pub fn bfm_point_from_voltages(net: &Network, v: &[CVec]) -> Result<BfmSdpPoint> {
    Ok(bfm_point_from_state(&bfm_from_voltages(net, v)?))
}

pub fn bfm_point_from_state(st: &BranchFlowState) -> BfmSdpPoint {
    BfmSdpPoint {
        s: st.s.clone(),
        v: st.v.iter().map(|x| x * x.adjoint()).collect(),
        flow: st.flow.clone(),
        ell: st.ell.clone(),
    }
}

/// s_i - sum_j diag((v_i - W_ij) y^H) per bus.
fn bim_balance(net: &Network, p: &BimSdpPoint) -> Result<Vec<CVec>> {
    let y = admittances(net)?;
    let mut bal = p.s.clone();
    for (k, l) in net.lines.iter().enumerate() {
        let (i, j) = (l.from, l.to);
        let yh = y[k].adjoint();
        let vi = project_mat(&p.v[i], net.phases(i), l.phases)?;
        let ti = ((&vi - &p.w[k]) * &yh).diagonal();
        let tj = ((&p.v[j] - p.w[k].adjoint()) * &yh).diagonal();
        bal[i] -= embed_vec(&ti, l.phases, net.phases(i))?;
        bal[j] -= tj;
    }
    Ok(bal)
}

/// sum_{i->j} diag(S - z l) + s_j - sum_{j->k} diag(S_jk) per bus.
fn bfm_balance(net: &Network, p: &BfmSdpPoint) -> Result<Vec<CVec>> {
    let mut bal = p.s.clone();
    for (k, l) in net.lines.iter().enumerate() {
        bal[l.to] += (&p.flow[k] - &l.z * &p.ell[k]).diagonal();
        bal[l.from] -= embed_vec(&p.flow[k].diagonal(), l.phases, net.phases(l.from))?;
    }
    Ok(bal)
}

/// Largest violation of each constraint family of a relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointResidual {
    pub balance: f64,
    pub substation: f64,
    pub bounds: f64,
    /// v_j update of the branch flow model (zero for bus-injection points)
    pub coupling: f64,
    /// negative eigenvalues and non-Hermitian parts of the line blocks
    pub psd: f64,
    pub device: f64,
}

impl PointResidual {
    pub fn max(&self) -> f64 {
        [
            self.balance,
            self.substation,
            self.bounds,
            self.coupling,
            self.psd,
            self.device,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn psd_violation(m: &CMat) -> Result<f64> {
    let skew = max_abs(&(m - m.adjoint()));
    let h = (m + m.adjoint()).scale(0.5);
    let (spec, _) = hermitian_eigendecompose(&h)?;
    Ok(skew.max(-spec.min()).max(0.0))
}

fn common_residual(
    net: &Network,
    s: &[CVec],
    v: &[CMat],
    blocks: Vec<CMat>,
) -> Result<PointResidual> {
    let mut r = PointResidual {
        substation: max_abs(&(&v[0] - net.v0())),
        ..Default::default()
    };
    for (b, vi) in net.buses.iter().zip(v).skip(1) {
        for (k, (lo, hi)) in b.v_min.iter().zip(&b.v_max).enumerate() {
            let d = vi[(k, k)].re;
            r.bounds = r.bounds.max(lo * lo - d).max(d - hi * hi);
        }
        r.device = r.device.max(device_distance(b.region().as_ref(), &s[b.id]));
        r.psd = r.psd.max(max_abs(&(vi - vi.adjoint())));
    }
    for m in &blocks {
        r.psd = r.psd.max(psd_violation(m)?);
    }
    Ok(r)
}

pub fn bim_point_residual(net: &Network, p: &BimSdpPoint) -> Result<PointResidual> {
    let blocks = (0..net.lines.len())
        .map(|k| p.line_block(net, k))
        .collect::<Result<Vec<_>>>()?;
    let mut r = common_residual(net, &p.s, &p.v, blocks)?;
    r.balance = bim_balance(net, p)?.iter().map(vec_inf).fold(0.0, f64::max);
    Ok(r)
}

pub fn bfm_point_residual(net: &Network, p: &BfmSdpPoint) -> Result<PointResidual> {
    let blocks = (0..net.lines.len())
        .map(|k| p.line_block(net, k))
        .collect::<Result<Vec<_>>>()?;
    let mut r = common_residual(net, &p.s, &p.v, blocks)?;
    r.balance = bfm_balance(net, p)?.iter().map(vec_inf).fold(0.0, f64::max);
    for (k, l) in net.lines.iter().enumerate() {
        let vi = project_mat(&p.v[l.from], net.phases(l.from), l.phases)?;
        let szh = &p.flow[k] * l.z.adjoint();
        let rhs = vi - &szh - szh.adjoint() + &l.z * &p.ell[k] * l.z.adjoint();
        r.coupling = r.coupling.max(max_abs(&(&p.v[l.to] - rhs)));
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessReport {
    /// None where the block is numerically zero
    pub ratios: Vec<Option<f64>>,
    pub max_ratio: f64,
    pub exact: bool,
    pub threshold: f64,
}

impl ExactnessReport {
    /// Line with the largest ratio.
    pub fn worst_line(&self) -> Option<usize> {
        self.ratios
            .iter()
            .enumerate()
            .filter_map(|(k, r)| r.map(|r| (k, r)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k)
    }
}

/// Rank ratio of every line block. Zero blocks are skipped with a warning.
pub fn exactness_report(
    point: &RelaxPoint,
    net: &Network,
    threshold: f64,
) -> Result<ExactnessReport> {
    let mut ratios = Vec::with_capacity(net.lines.len());
    for k in 0..net.lines.len() {
        let m = point.line_block(net, k)?;
        let h = (&m + m.adjoint()).scale(0.5);
        match rank_ratio(&h) {
            Ok(r) => ratios.push(Some(r)),
            Err(Error::ZeroMatrix) => {
                log::warn!("line {k}: zero block, rank ratio undefined");
                ratios.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let max_ratio = ratios.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    Ok(ExactnessReport {
        ratios,
        max_ratio,
        exact: max_ratio <= threshold,
        threshold,
    })
}

#[cfg(test)]
mod tests;
