//! Exact power flow: bus-injection and branch-flow residuals, and a
//! current-summation forward-backward sweep.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::netmodel::{embed_vec, project_vec, CMat, CVec, Network};

/// Per-bus complex voltage vectors over each bus's phases (p.u.).
pub type VoltageProfile = Vec<CVec>;
/// Per-bus net injections over each bus's phases (p.u., generation positive).
/// The substation entry is an output and is ignored on input.
pub type InjectionProfile = Vec<CVec>;

#[derive(Debug, Clone, PartialEq)]
pub struct BranchFlowState {
    pub v: VoltageProfile,
    /// line currents i -> j over the line phases
    pub i: Vec<CVec>,
    pub s: InjectionProfile,
    /// sending-end flow matrices S_ij
    pub flow: Vec<CMat>,
    /// current outer products l_ij
    pub ell: Vec<CMat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfmResidual {
    pub ohm: Vec<CVec>,
    pub ell: Vec<CMat>,
    pub flow: Vec<CMat>,
    pub balance: Vec<CVec>,
}

impl BfmResidual {
    pub fn max_ohm(&self) -> f64 {
        self.ohm.iter().map(vec_inf).fold(0.0, f64::max)
    }

    pub fn max_slack(&self) -> f64 {
        self.ell
            .iter()
            .chain(&self.flow)
            .map(mat_inf)
            .fold(0.0, f64::max)
    }

    pub fn max_balance(&self) -> f64 {
        self.balance.iter().map(vec_inf).fold(0.0, f64::max)
    }

    pub fn max(&self) -> f64 {
        self.max_ohm().max(self.max_slack()).max(self.max_balance())
    }
}

pub(crate) fn vec_inf(v: &CVec) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub(crate) fn mat_inf(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// diag(a b^H) as a vector.
fn diag_outer(a: &CVec, b: &CVec) -> CVec {
    a.zip_map(b, |x, y| x * y.conj())
}

pub(crate) fn admittances(net: &Network) -> Result<Vec<CMat>> {
    (0..net.lines.len())
        .map(|k| net.admittance(k).ok_or(Error::SingularImpedance(k)))
        .collect()
}

fn check_profile(net: &Network, v: &[CVec], what: &str) -> Result<()> {
    if v.len() != net.num_buses() {
        return Err(Error::PhaseMismatch(format!(
            "{what} has {} buses, network has {}",
            v.len(),
            net.num_buses()
        )));
    }
    for (i, x) in v.iter().enumerate() {
        if x.len() != net.phases(i).len() {
            return Err(Error::PhaseMismatch(format!(
                "{what} at bus {i}: {} values for phases {}",
                x.len(),
                net.phases(i)
            )));
        }
    }
    Ok(())
}

/// V_i = v_ref projected onto each bus's phases.
pub fn flat_profile(net: &Network) -> VoltageProfile {
    let p0 = net.phases(0);
    net.buses
        .iter()
        .map(|b| {
            project_vec(net.v_ref(), p0, b.phases).expect("bus phases lie within the substation's")
        })
        .collect()
}

/// s_i minus the bus-injection power flow at every bus.
pub fn bim_residual(net: &Network, v: &[CVec], s: &[CVec]) -> Result<Vec<CVec>> {
    check_profile(net, v, "voltage profile")?;
    check_profile(net, s, "injections")?;
    let y = admittances(net)?;
    let mut res: Vec<CVec> = s.to_vec();
    for (k, l) in net.lines.iter().enumerate() {
        let (i, j) = (l.from, l.to);
        let vi = project_vec(&v[i], net.phases(i), l.phases)?;
        let vj = project_vec(&v[j], net.phases(j), l.phases)?;
        let d = &vi - &vj;
        let yd = &y[k] * &d;
        let from_i = diag_outer(&vi, &yd);
        let from_j = diag_outer(&vj, &(-yd));
        res[i] -= embed_vec(&from_i, l.phases, net.phases(i))?;
        res[j] -= embed_vec(&from_j, l.phases, net.phases(j))?;
    }
    Ok(res)
}

pub fn max_bim_residual(net: &Network, v: &[CVec], s: &[CVec]) -> Result<f64> {
    Ok(bim_residual(net, v, s)?
        .iter()
        .map(vec_inf)
        .fold(0.0, f64::max))
}

/// Ohm's law, slack definitions and power balance residuals.
pub fn bfm_residual(net: &Network, st: &BranchFlowState) -> Result<BfmResidual> {
    check_profile(net, &st.v, "voltage profile")?;
    check_profile(net, &st.s, "injections")?;
    let m = net.lines.len();
    if st.i.len() != m || st.flow.len() != m || st.ell.len() != m {
        return Err(Error::PhaseMismatch(
            "state does not cover every line".into(),
        ));
    }
    let mut ohm = Vec::with_capacity(m);
    let mut ell = Vec::with_capacity(m);
    let mut flow = Vec::with_capacity(m);
    let mut balance = st.s.clone();
    for (k, l) in net.lines.iter().enumerate() {
        let (i, j) = (l.from, l.to);
        let vi = project_vec(&st.v[i], net.phases(i), l.phases)?;
        let cur = &st.i[k];
        if cur.len() != l.phases.len() {
            return Err(Error::PhaseMismatch(format!("current on line {k}")));
        }
        ohm.push(&vi - &st.v[j] - &l.z * cur);
        ell.push(&st.ell[k] - cur * cur.adjoint());
        flow.push(&st.flow[k] - &vi * cur.adjoint());
        let recv = (&st.flow[k] - &l.z * &st.ell[k]).diagonal();
        balance[j] += recv;
        balance[i] -= embed_vec(&st.flow[k].diagonal(), l.phases, net.phases(i))?;
    }
    Ok(BfmResidual {
        ohm,
        ell,
        flow,
        balance,
    })
}

/// Completes a voltage profile into a branch flow state with I from Ohm's
/// law, (S, l) from their definitions and s from the bus balances.
pub fn bfm_from_voltages(net: &Network, v: &[CVec]) -> Result<BranchFlowState> {
    check_profile(net, v, "voltage profile")?;
    let y = admittances(net)?;
    let mut st = BranchFlowState {
        v: v.to_vec(),
        i: Vec::with_capacity(net.lines.len()),
        s: v.iter().map(|x| CVec::zeros(x.len())).collect(),
        flow: Vec::with_capacity(net.lines.len()),
        ell: Vec::with_capacity(net.lines.len()),
    };
    for (k, l) in net.lines.iter().enumerate() {
        let vi = project_vec(&v[l.from], net.phases(l.from), l.phases)?;
        let cur = &y[k] * (&vi - &v[l.to]);
        st.flow.push(&vi * cur.adjoint());
        st.ell.push(&cur * cur.adjoint());
        st.i.push(cur);
    }
    fill_injections_from_balance(net, &mut st, true)?;
    Ok(st)
}

/// s_j = sum_k diag(S_jk) - diag(S_ij - z l_ij), for bus 0 only or all buses.
fn fill_injections_from_balance(net: &Network, st: &mut BranchFlowState, all: bool) -> Result<()> {
    for j in 0..net.num_buses() {
        if !all && j != 0 {
            continue;
        }
        let mut sj = CVec::zeros(net.phases(j).len());
        for &k in net.child_lines(j) {
            sj += embed_vec(&st.flow[k].diagonal(), net.lines[k].phases, net.phases(j))?;
        }
        if let Some(k) = net.parent_line(j) {
            sj -= (&st.flow[k] - &net.lines[k].z * &st.ell[k]).diagonal();
        }
        st.s[j] = sj;
    }
    Ok(())
}

/// Sum over lines of Re(diag(z l)).
pub fn total_line_loss(net: &Network, st: &BranchFlowState) -> f64 {
    net.lines
        .iter()
        .zip(&st.ell)
        .map(|(l, e)| (&l.z * e).trace().re)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbsSettings {
    /// max |V^(k+1) - V^(k)|
    pub tol: f64,
    /// max bus-injection residual at branch buses, floored at the rounding
    /// level of the largest admittance
    pub residual_tol: f64,
    pub max_iterations: usize,
}

impl Default for FbsSettings {
    fn default() -> Self {
        FbsSettings {
            tol: 1e-9,
            residual_tol: 1e-10,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FbsReport {
    pub state: BranchFlowState,
    pub iterations: usize,
    pub last_step: f64,
    pub residual: f64,
}

pub fn fbs_solve(net: &Network, s: &[CVec]) -> Result<BranchFlowState> {
    fbs_solve_with(net, s, &FbsSettings::default()).map(|r| r.state)
}

/// Current-summation sweep from a flat start. The backward sweep sums
/// injection currents conj(s / V) toward the root; the forward sweep applies
/// Ohm's law outward from the substation.
pub fn fbs_solve_with(net: &Network, s: &[CVec], set: &FbsSettings) -> Result<FbsReport> {
    check_profile(net, s, "injections")?;
    let y = admittances(net)?;
    let order = net.bfs_order();
    let mut v = flat_profile(net);
    let mut cur: Vec<CVec> = net
        .lines
        .iter()
        .map(|l| CVec::zeros(l.phases.len()))
        .collect();
    let mut step = f64::INFINITY;
    let mut residual = f64::INFINITY;
    // y (V_i - V_j) loses about eps |y| to cancellation on very short lines
    let ymax = y.iter().map(mat_inf).fold(0.0, f64::max);
    let res_tol = set.residual_tol.max(64.0 * f64::EPSILON * ymax);
    for it in 1..=set.max_iterations {
        for &j in order.iter().rev().filter(|&&j| j != 0) {
            let k = net.parent_line(j).unwrap();
            let mut acc = CVec::zeros(net.phases(j).len());
            for (p, (sv, vv)) in s[j].iter().zip(v[j].iter()).enumerate() {
                if vv.norm() == 0.0 {
                    return Err(Error::ZeroVoltage(j));
                }
                acc[p] = -(sv / vv).conj();
            }
            for &c in net.child_lines(j) {
                acc += embed_vec(&cur[c], net.lines[c].phases, net.phases(j))?;
            }
            cur[k] = acc;
        }
        step = 0.0;
        for &j in order.iter().filter(|&&j| j != 0) {
            let k = net.parent_line(j).unwrap();
            let l = &net.lines[k];
            let vi = project_vec(&v[l.from], net.phases(l.from), l.phases)?;
            let vj = vi - &l.z * &cur[k];
            step = step.max(vec_inf(&(&vj - &v[j])));
            v[j] = vj;
        }
        residual = branch_residual(net, &y, &v, s)?;
        if step <= set.tol && residual <= res_tol {
            let mut st = BranchFlowState {
                s: s.to_vec(),
                flow: net
                    .lines
                    .iter()
                    .zip(&cur)
                    .map(|(l, c)| {
                        project_vec(&v[l.from], net.phases(l.from), l.phases)
                            .map(|vi| vi * c.adjoint())
                    })
                    .collect::<Result<_>>()?,
                ell: cur.iter().map(|c| c * c.adjoint()).collect(),
                i: cur,
                v,
            };
            fill_injections_from_balance(net, &mut st, false)?;
            return Ok(FbsReport {
                state: st,
                iterations: it,
                last_step: step,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: set.max_iterations,
        last_step: step,
        residual,
        last_voltages: Box::new(v),
    })
}

fn branch_residual(net: &Network, y: &[CMat], v: &[CVec], s: &[CVec]) -> Result<f64> {
    let mut res: Vec<CVec> = s.to_vec();
    for (k, l) in net.lines.iter().enumerate() {
        let (i, j) = (l.from, l.to);
        let vi = project_vec(&v[i], net.phases(i), l.phases)?;
        let d = &vi - &v[j];
        let yd = &y[k] * &d;
        res[i] -= embed_vec(&diag_outer(&vi, &yd), l.phases, net.phases(i))?;
        res[j] -= diag_outer(&v[j], &(-yd));
    }
    Ok(res.iter().skip(1).map(vec_inf).fold(0.0, f64::max))
}

/// Injection that consumes `p + jq` on every phase of every branch bus.
pub fn uniform_load(net: &Network, load: Complex64) -> InjectionProfile {
    net.buses
        .iter()
        .map(|b| {
            if b.is_substation() {
                CVec::zeros(b.phases.len())
            } else {
                CVec::from_element(b.phases.len(), -load)
            }
        })
        .collect()
}
