//! Voltage (and current) recovery from relaxation solutions.

use num_complex::Complex64;

use super::{exactness_report, BfmSdpPoint, BimSdpPoint, RelaxPoint};
use crate::error::{Error, Result};
use crate::linalg::leading_rank1_factor;
use crate::netmodel::{project_mat, project_vec, CMat, CVec, Network};
use crate::powerflow::VoltageProfile;

const ZERO_TRACE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub v: VoltageProfile,
    /// line currents (branch flow recovery only)
    pub i: Option<Vec<CVec>>,
    /// some block was not rank one and was replaced by its best rank-one factor
    pub approximate: bool,
}

/// Lines whose blocks must be factored instead of read off directly.
fn inexact_lines(
    point: &RelaxPoint,
    net: &Network,
    threshold: f64,
    force: bool,
) -> Result<Vec<bool>> {
    let rep = exactness_report(point, net, threshold)?;
    if !rep.exact && !force {
        let line = rep.worst_line().unwrap_or(0);
        return Err(Error::NotExact {
            line,
            ratio: rep.max_ratio,
            threshold,
        });
    }
    Ok(rep
        .ratios
        .iter()
        .map(|r| r.is_some_and(|r| r > threshold))
        .collect())
}

fn trace_of(v: &CMat, bus: usize) -> Result<f64> {
    let t = v.trace().re;
    if t.abs() < ZERO_TRACE {
        Err(Error::ZeroTrace(bus))
    } else {
        Ok(t)
    }
}

/// Lower half of the leading factor of `block`, rotated so the upper half
/// lines up with the already recovered `vi`.
fn aligned_lower(block: &CMat, vi: &CVec) -> Result<CVec> {
    let u = leading_rank1_factor(block)?;
    let k = vi.len();
    let a = u.rows(0, k);
    let c: Complex64 = a.adjoint().iter().zip(vi.iter()).map(|(x, y)| x * y).sum();
    let rot = if c.norm() > 0.0 {
        c / c.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    Ok(u.rows(k, k).map(|x| x * rot))
}

/// V_0 = v_ref, then V_j = W_ji V_i / tr(v_i) outward along the tree.
pub fn recover_voltages_alg1(
    point: &BimSdpPoint,
    net: &Network,
    threshold: f64,
    force: bool,
) -> Result<Recovery> {
    let rp = RelaxPoint::Bim(point.clone());
    let bad = inexact_lines(&rp, net, threshold, force)?;
    let mut v: Vec<CVec> = net
        .buses
        .iter()
        .map(|b| CVec::zeros(b.phases.len()))
        .collect();
    v[0] = net.v_ref().clone();
    for &j in net.bfs_order().iter().skip(1) {
        let k = net.parent_line(j).unwrap();
        let l = &net.lines[k];
        let i = l.from;
        let vi = project_vec(&v[i], net.phases(i), l.phases)?;
        v[j] = if bad[k] {
            aligned_lower(&point.line_block(net, k)?, &vi)?
        } else {
            let tr = trace_of(&project_mat(&point.v[i], net.phases(i), l.phases)?, i)?;
            point.w[k].adjoint() * vi / Complex64::new(tr, 0.0)
        };
    }
    Ok(Recovery {
        v,
        i: None,
        approximate: bad.iter().any(|&b| b),
    })
}

/// I_ij = S_ij^H V_i / tr(v_i) and V_j = V_i - z I_ij outward along the tree.
pub fn recover_voltages_alg2(
    point: &BfmSdpPoint,
    net: &Network,
    threshold: f64,
    force: bool,
) -> Result<Recovery> {
    let rp = RelaxPoint::Bfm(point.clone());
    let bad = inexact_lines(&rp, net, threshold, force)?;
    let mut v: Vec<CVec> = net
        .buses
        .iter()
        .map(|b| CVec::zeros(b.phases.len()))
        .collect();
    let mut cur: Vec<CVec> = net
        .lines
        .iter()
        .map(|l| CVec::zeros(l.phases.len()))
        .collect();
    v[0] = net.v_ref().clone();
    for &j in net.bfs_order().iter().skip(1) {
        let k = net.parent_line(j).unwrap();
        let l = &net.lines[k];
        let i = l.from;
        let vi = project_vec(&v[i], net.phases(i), l.phases)?;
        cur[k] = if bad[k] {
            aligned_lower(&point.line_block(net, k)?, &vi)?
        } else {
            let tr = trace_of(&project_mat(&point.v[i], net.phases(i), l.phases)?, i)?;
            point.flow[k].adjoint() * &vi / Complex64::new(tr, 0.0)
        };
        v[j] = vi - &l.z * &cur[k];
    }
    Ok(Recovery {
        v,
        i: Some(cur),
        approximate: bad.iter().any(|&b| b),
    })
}
