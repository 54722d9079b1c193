//! Linear power flow: lossless balance plus nearly balanced voltages gives a
//! closed-form estimate of flows and voltages.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::netmodel::{embed_vec, project_mat, CMat, CVec, Network, PhaseSet};
use crate::powerflow::BranchFlowState;

/// Magnitude floor for the relative flow error.
pub const FLOW_ERROR_FLOOR: f64 = 1e-6;

/// e^{-j 2 pi / 3}
pub fn alpha() -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI / 3.0)
}

/// (1, alpha, alpha^2)
pub fn beta() -> CVec {
    let a = alpha();
    CVec::from_vec(vec![Complex64::new(1.0, 0.0), a, a * a])
}

/// gamma = beta beta^H projected onto `phases`.
pub fn gamma_matrix(phases: PhaseSet) -> CMat {
    let b = beta();
    let full = &b * b.adjoint();
    project_mat(&full, PhaseSet::ABC, phases).expect("every phase set lies in abc")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpfSolution {
    pub s0: CVec,
    /// diagonal flows per line
    pub lambda: Vec<CVec>,
    pub flow: Vec<CMat>,
    /// per-bus squared-voltage matrices
    pub v: Vec<CMat>,
}

impl LpfSolution {
    /// sqrt(diag(v_j)) per bus.
    pub fn magnitudes(&self) -> Vec<Vec<f64>> {
        self.v
            .iter()
            .map(|m| m.diagonal().iter().map(|x| x.re.max(0.0).sqrt()).collect())
            .collect()
    }
}

/// Closed form: Down sums in one post-order pass, path sums in one pre-order pass.
pub fn lpf_solve(net: &Network, s: &[CVec]) -> Result<LpfSolution> {
    if s.len() != net.num_buses()
        || s.iter()
            .enumerate()
            .any(|(i, x)| x.len() != net.phases(i).len())
    {
        return Err(Error::PhaseMismatch(
            "injections do not match the network".into(),
        ));
    }
    let order = net.bfs_order();
    let n = net.num_buses();
    // acc[j] = sum of s_k over Down(j), on Phi_j
    let mut acc: Vec<CVec> = s.to_vec();
    acc[0] = CVec::zeros(net.phases(0).len());
    for &j in order.iter().rev() {
        for &k in net.child_lines(j) {
            let c = net.lines[k].to;
            let add = embed_vec(&acc[c], net.phases(c), net.phases(j))?;
            acc[j] += add;
        }
    }
    let s0 = -acc[0].clone();
    let mut lambda = Vec::with_capacity(net.lines.len());
    let mut flow = Vec::with_capacity(net.lines.len());
    for l in &net.lines {
        let lam = -acc[l.to].clone();
        flow.push(gamma_matrix(l.phases) * CMat::from_diagonal(&lam));
        lambda.push(lam);
    }
    let mut v = vec![CMat::zeros(0, 0); n];
    v[0] = net.v0();
    for &j in order.iter().skip(1) {
        let k = net.parent_line(j).unwrap();
        let l = &net.lines[k];
        let sz = &flow[k] * l.z.adjoint();
        let vi = project_mat(&v[l.from], net.phases(l.from), l.phases)?;
        v[j] = vi - &sz - sz.adjoint();
    }
    Ok(LpfSolution {
        s0,
        lambda,
        flow,
        v,
    })
}

/// Largest residuals of the balance and voltage equations of the linear model.
pub fn lpf_residuals(net: &Network, sol: &LpfSolution, s: &[CVec]) -> Result<(f64, f64)> {
    let mut bal: Vec<CVec> = s.to_vec();
    bal[0] = sol.s0.clone();
    for (k, l) in net.lines.iter().enumerate() {
        bal[l.to] += &sol.lambda[k];
        bal[l.from] -= embed_vec(&sol.lambda[k], l.phases, net.phases(l.from))?;
    }
    let balance = bal
        .iter()
        .flat_map(|x| x.iter())
        .map(|x| x.norm())
        .fold(0.0, f64::max);
    let mut volt = (&sol.v[0] - net.v0())
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max);
    for (k, l) in net.lines.iter().enumerate() {
        let sz = &sol.flow[k] * l.z.adjoint();
        let vi = project_mat(&sol.v[l.from], net.phases(l.from), l.phases)?;
        let r = &sol.v[l.to] - (vi - &sz - sz.adjoint());
        volt = r.iter().map(|x| x.norm()).fold(volt, f64::max);
    }
    Ok((balance, volt))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpfErrorReport {
    pub voltage_error_pu: f64,
    pub flow_error_pct: f64,
}

/// Worst-case voltage magnitude error and relative diagonal-flow error.
pub fn lpf_error_report(
    net: &Network,
    approx: &LpfSolution,
    exact: &BranchFlowState,
) -> Result<LpfErrorReport> {
    if approx.v.len() != exact.v.len()
        || approx.lambda.len() != exact.flow.len()
        || exact.v.len() != net.num_buses()
    {
        return Err(Error::PhaseMismatch(
            "LPF and exact solutions come from different networks".into(),
        ));
    }
    let mut verr = 0.0f64;
    for (mags, vj) in approx.magnitudes().iter().zip(&exact.v) {
        if mags.len() != vj.len() {
            return Err(Error::PhaseMismatch("bus phase counts differ".into()));
        }
        for (m, x) in mags.iter().zip(vj.iter()) {
            verr = verr.max((m - x.norm()).abs());
        }
    }
    let mut ferr = 0.0f64;
    for (lam, sx) in approx.lambda.iter().zip(&exact.flow) {
        if lam.len() != sx.nrows() {
            return Err(Error::PhaseMismatch("line phase counts differ".into()));
        }
        for (a, b) in lam.iter().zip(sx.diagonal().iter()) {
            ferr = ferr.max((a - b).norm() / b.norm().max(FLOW_ERROR_FLOOR));
        }
    }
    Ok(LpfErrorReport {
        voltage_error_pu: verr,
        flow_error_pct: 100.0 * ferr,
    })
}
