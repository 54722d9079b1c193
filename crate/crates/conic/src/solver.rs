//! Homogeneous self-dual embedding interior-point method with
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector.

use std::time::Instant;

use log::debug;

use crate::cones::Cone;
use crate::ldl::{DynamicReg, LdlError, LdlFactor};
use crate::presolve::{equilibrate, identity_scaling, presolve, Presolve, Reduced, Scaling};
use crate::program::ConicProgram;
use crate::sparse::{dot, norm_inf, CscMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterationLimit,
    NumericalFailure,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::PrimalInfeasible => "primal_infeasible",
            Status::DualInfeasible => "dual_infeasible",
            Status::IterationLimit => "iteration_limit",
            Status::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    pub static_reg: f64,
    pub dyn_reg_eps: f64,
    pub dyn_reg_delta: f64,
    pub refine_steps: usize,
    pub equilibrate: bool,
    pub ruiz_sweeps: usize,
    pub presolve: bool,
    pub max_step_fraction: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            static_reg: 1e-8,
            dyn_reg_eps: 1e-13,
            dyn_reg_delta: 2e-7,
            refine_steps: 20,
            equilibrate: true,
            ruiz_sweeps: 10,
            presolve: true,
            max_step_fraction: 0.99,
        }
    }
}

/// Solver output. For infeasible statuses `z` (primal infeasible) or `x`
/// and `s` (dual infeasible) hold the certificate, normalized so that
/// b'z = -1 or c'x = -1.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub iterations: usize,
    pub wall_time: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

impl Solution {
    fn certificate(
        status: Status,
        p: &ConicProgram,
        x: Vec<f64>,
        s: Vec<f64>,
        z: Vec<f64>,
        it: usize,
        t: f64,
    ) -> Self {
        Solution {
            status,
            primal_obj: dot(&p.c, &x),
            dual_obj: -dot(&p.b, &z),
            x,
            s,
            z,
            iterations: it,
            wall_time: t,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::NAN,
        }
    }
}

const MAX_STATIC_REG: f64 = 1e-4;

/// Quasidefinite KKT system [eps I, A'; A, -(H + eps I)] with a fixed
/// sparsity pattern.
struct Kkt {
    n: usize,
    mat: CscMatrix,
    reg: Vec<f64>,
    a_slots: Vec<usize>,
    a_vals: Vec<f64>,
    h_slots: Vec<Vec<usize>>,
    factor: LdlFactor,
    eps: f64,
    settings_reg: DynamicReg,
    refine: usize,
    scratch: Vec<f64>,
    res: Vec<f64>,
}

impl Kkt {
    fn new(a: &CscMatrix, cones: &[Cone], eps: f64, s: &Settings) -> Result<Kkt, LdlError> {
        let (m, n) = (a.nrows, a.ncols);
        let at = a.transpose();
        let dim = n + m;
        let mut colptr = vec![0usize; dim + 1];
        let mut rowval = Vec::new();
        let mut a_slots = Vec::new();
        let mut a_vals = Vec::new();
        let mut h_slots = Vec::with_capacity(cones.len());
        for j in 0..n {
            rowval.push(j);
            colptr[j + 1] = rowval.len();
        }
        let mut off = 0;
        for cone in cones {
            let d = cone.dim();
            let mut slots = Vec::new();
            for local in 0..d {
                let i = off + local;
                for q in at.colptr[i]..at.colptr[i + 1] {
                    a_slots.push(rowval.len());
                    a_vals.push(at.nzval[q]);
                    rowval.push(at.rowval[q]);
                }
                let lo = if cone.diagonal_hessian() { local } else { 0 };
                for r in lo..=local {
                    slots.push(rowval.len());
                    rowval.push(n + off + r);
                }
                colptr[n + i + 1] = rowval.len();
            }
            h_slots.push(slots);
            off += d;
        }
        let nz = rowval.len();
        let mat = CscMatrix {
            nrows: dim,
            ncols: dim,
            colptr,
            rowval,
            nzval: vec![0.0; nz],
        };
        let mut signs = vec![1.0; n];
        signs.extend(std::iter::repeat(-1.0).take(m));
        let reg: Vec<f64> = signs.iter().map(|sg| sg * eps).collect();
        let factor = LdlFactor::new(&mat, &signs)?;
        Ok(Kkt {
            n,
            mat,
            reg,
            a_slots,
            a_vals,
            h_slots,
            factor,
            eps,
            settings_reg: DynamicReg {
                eps: s.dyn_reg_eps,
                delta: s.dyn_reg_delta,
            },
            refine: s.refine_steps,
            scratch: vec![0.0; dim],
            res: vec![0.0; dim],
        })
    }

    /// Loads the H blocks (the identity when `identity` is set, used for the
    /// starting point) and factors. If any pivot had to be replaced, the
    /// static regularization is raised and the factorization repeated.
    fn update(&mut self, cones: &[Cone], identity: bool) -> Result<(), LdlError> {
        let mut eps = self.eps;
        loop {
            self.load(cones, identity, eps);
            let bumped = match self.factor.factor(Some(self.settings_reg)) {
                Ok(b) => b,
                Err(e) if eps >= MAX_STATIC_REG => return Err(e),
                Err(_) => usize::MAX,
            };
            if bumped == 0 || eps >= MAX_STATIC_REG {
                break;
            }
            log::trace!("{bumped} pivots regularized at static reg {eps:.0e}");
            eps *= 100.0;
        }
        let n = self.n;
        for (i, r) in self.reg.iter_mut().enumerate() {
            *r = if i < n { eps } else { -eps };
        }
        Ok(())
    }

    fn load(&mut self, cones: &[Cone], identity: bool, eps: f64) {
        let v = &mut self.mat.nzval;
        for j in 0..self.n {
            v[self.mat.colptr[j]] = eps;
        }
        for (&slot, &val) in self.a_slots.iter().zip(&self.a_vals) {
            v[slot] = val;
        }
        let mut h = Vec::new();
        for (cone, slots) in cones.iter().zip(&self.h_slots) {
            if identity && !cone.is_zero() {
                h.clear();
                if cone.diagonal_hessian() {
                    h.resize(cone.dim(), 1.0);
                } else {
                    for j in 0..cone.dim() {
                        for i in 0..=j {
                            h.push(if i == j { 1.0 } else { 0.0 });
                        }
                    }
                }
            } else {
                cone.hessian(&mut h);
            }
            let d = cone.dim();
            // diagonal positions inside the block's slot list
            let mut k = 0;
            for j in 0..d {
                let (lo, hi) = if cone.diagonal_hessian() {
                    (j, j)
                } else {
                    (0, j)
                };
                for i in lo..=hi {
                    let mut val = -h[k];
                    if i == j {
                        val -= eps;
                    }
                    v[slots[k]] = val;
                    k += 1;
                }
            }
        }
        self.factor.set_values(&self.mat.nzval);
    }

    /// res = rhs - K sol for the unregularized K; returns its inf-norm.
    fn residual(&mut self, rhs: &[f64], sol: &[f64]) -> f64 {
        self.res.copy_from_slice(rhs);
        self.mat.symv_upper(-1.0, sol, &mut self.res);
        for i in 0..sol.len() {
            self.res[i] += self.reg[i] * sol[i];
        }
        norm_inf(&self.res)
    }

    /// Solves K sol = rhs with iterative refinement against the
    /// unregularized matrix. Refinement stops once it no longer halves the
    /// residual, keeping the best iterate.
    fn solve(&mut self, rhs: &[f64], sol: &mut [f64]) {
        sol.copy_from_slice(rhs);
        self.factor.solve(sol);
        let tol = 1e-14 * (1.0 + norm_inf(rhs));
        let mut err = self.residual(rhs, sol);
        let mut cand = vec![0.0; sol.len()];
        for _ in 0..self.refine {
            if err <= tol {
                break;
            }
            self.scratch.copy_from_slice(&self.res);
            self.factor.solve(&mut self.scratch);
            for i in 0..sol.len() {
                cand[i] = sol[i] + self.scratch[i];
            }
            let e = self.residual(rhs, &cand);
            if !(e < err) {
                break;
            }
            sol.copy_from_slice(&cand);
            let stalled = e > 0.9 * err;
            err = e;
            if stalled {
                break;
            }
        }
        log::trace!("kkt solve: residual {err:.2e} (rhs {:.2e})", norm_inf(rhs));
    }
}

struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

pub fn solve(prog: &ConicProgram, settings: &Settings) -> Solution {
    let start = Instant::now();
    let reduced = if settings.presolve {
        match presolve(prog, 1e-12) {
            Presolve::Infeasible(z) => {
                let m = prog.num_rows();
                return Solution::certificate(
                    Status::PrimalInfeasible,
                    prog,
                    vec![0.0; prog.num_vars()],
                    vec![0.0; m],
                    z,
                    0,
                    start.elapsed().as_secs_f64(),
                );
            }
            Presolve::Reduced(r) => r,
        }
    } else {
        Reduced {
            prog: prog.clone(),
            keep: (0..prog.num_rows()).collect(),
            orig_rows: prog.num_rows(),
        }
    };
    let mut sol = solve_reduced(&reduced.prog, settings, start);
    // back to the original rows: dropped rows get s = b - A x and z = 0
    let mut z = reduced.expand(&sol.z);
    if sol.status == Status::PrimalInfeasible {
        let bz = dot(&prog.b, &z);
        if bz < 0.0 {
            for v in &mut z {
                *v /= -bz;
            }
        }
    }
    let s = if sol.status == Status::DualInfeasible {
        let mut ax = vec![0.0; prog.num_rows()];
        prog.a.gemv(-1.0, &sol.x, &mut ax);
        ax
    } else {
        let mut s = reduced.expand(&sol.s);
        let mut r = prog.b.clone();
        prog.a.gemv(-1.0, &sol.x, &mut r);
        let mut kept = vec![false; prog.num_rows()];
        for &i in &reduced.keep {
            kept[i] = true;
        }
        for i in 0..s.len() {
            if !kept[i] {
                s[i] = r[i];
            }
        }
        s
    };
    sol.s = s;
    sol.z = z;
    sol.wall_time = start.elapsed().as_secs_f64();
    sol
}

fn solve_reduced(orig: &ConicProgram, st: &Settings, start: Instant) -> Solution {
    let (p, sc) = if st.equilibrate {
        equilibrate(orig, st.ruiz_sweeps)
    } else {
        (orig.clone(), identity_scaling(orig))
    };
    let (n, m) = (p.num_vars(), p.num_rows());
    let mut cones: Vec<Cone> = p.cones.iter().map(Cone::new).collect();
    let ranges = p.cone_ranges();
    let nu: usize = cones.iter().map(|c| c.degree()).sum();

    let fail = |status: Status, it: usize| Solution {
        status,
        x: vec![f64::NAN; n],
        s: vec![f64::NAN; m],
        z: vec![f64::NAN; m],
        primal_obj: f64::NAN,
        dual_obj: f64::NAN,
        iterations: it,
        wall_time: start.elapsed().as_secs_f64(),
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        gap: f64::NAN,
    };

    let mut kkt = match Kkt::new(&p.a, &cones, st.static_reg, st) {
        Ok(k) => k,
        Err(_) => return fail(Status::NumericalFailure, 0),
    };

    // initial point from two least-squares solves with H = I
    if kkt.update(&cones, true).is_err() {
        return fail(Status::NumericalFailure, 0);
    }
    let mut rhs = vec![0.0; n + m];
    let mut tmp = vec![0.0; n + m];
    rhs[n..].copy_from_slice(&p.b);
    kkt.solve(&rhs, &mut tmp);
    let mut it = Iterate {
        x: tmp[..n].to_vec(),
        s: tmp[n..].iter().map(|v| -v).collect(),
        z: vec![0.0; m],
        tau: 1.0,
        kappa: 1.0,
    };
    rhs.fill(0.0);
    for j in 0..n {
        rhs[j] = -p.c[j];
    }
    kkt.solve(&rhs, &mut tmp);
    it.z.copy_from_slice(&tmp[n..]);
    for (cone, rg) in cones.iter().zip(&ranges) {
        if cone.is_zero() {
            it.s[rg.clone()].fill(0.0);
        } else {
            cone.shift_to_interior(&mut it.s[rg.clone()]);
            cone.shift_to_interior(&mut it.z[rg.clone()]);
        }
    }

    let mut rx = vec![0.0; n];
    let mut rz = vec![0.0; m];
    let mut dir = Direction {
        x: vec![0.0; n],
        s: vec![0.0; m],
        z: vec![0.0; m],
        tau: 0.0,
        kappa: 0.0,
    };
    let mut aff = Direction {
        x: vec![0.0; n],
        s: vec![0.0; m],
        z: vec![0.0; m],
        tau: 0.0,
        kappa: 0.0,
    };
    let mut ds = vec![0.0; m];
    let mut x1 = vec![0.0; n];
    let mut z1 = vec![0.0; m];
    let mut small_steps = 0;

    for iter in 0..=st.max_iter {
        // residuals of the embedding
        rx.fill(0.0);
        p.a.gemv_t(1.0, &it.z, &mut rx);
        for j in 0..n {
            rx[j] += p.c[j] * it.tau;
        }
        rz.copy_from_slice(&it.s);
        p.a.gemv(1.0, &it.x, &mut rz);
        for i in 0..m {
            rz[i] -= p.b[i] * it.tau;
        }
        let rtau = dot(&p.c, &it.x) + dot(&p.b, &it.z) + it.kappa;

        if let Some(sol) = check_termination(orig, &sc, &it, st, iter, start) {
            return sol;
        }
        if iter == st.max_iter {
            break;
        }

        for (cone, rg) in cones.iter_mut().zip(&ranges) {
            if !cone.update_scaling(&it.s[rg.clone()], &it.z[rg.clone()]) {
                debug!("iter {iter}: scaling update failed");
                return unscaled_iterate(orig, &sc, &it, Status::NumericalFailure, iter, start);
            }
        }
        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (nu as f64 + 1.0);
        if let Err(e) = kkt.update(&cones, false) {
            debug!("iter {iter}: factorization failed: {e}");
            return unscaled_iterate(orig, &sc, &it, Status::NumericalFailure, iter, start);
        }
        for j in 0..n {
            rhs[j] = -p.c[j];
        }
        rhs[n..].copy_from_slice(&p.b);
        kkt.solve(&rhs, &mut tmp);
        x1.copy_from_slice(&tmp[..n]);
        z1.copy_from_slice(&tmp[n..]);
        let denom = dot(&p.c, &x1) + dot(&p.b, &z1) - it.kappa / it.tau;

        // predictor
        for (cone, rg) in cones.iter().zip(&ranges) {
            cone.lambda_sq(&mut ds[rg.clone()]);
        }
        let dkappa = it.tau * it.kappa;
        let ctx = StepCtx {
            p: &p,
            cones: &cones,
            ranges: &ranges,
            x1: &x1,
            z1: &z1,
            denom,
        };
        ctx.direction(
            &mut kkt, &it, &rx, &rz, rtau, &ds, dkappa, 1.0, &mut aff, &mut rhs, &mut tmp,
        );
        let alpha_aff = ctx.step_length(&it, &aff, 1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector
        let mut e = Vec::new();
        let mut u = Vec::new();
        let mut v = Vec::new();
        let mut w = Vec::new();
        for (cone, rg) in cones.iter().zip(&ranges) {
            if cone.is_zero() {
                ds[rg.clone()].fill(0.0);
                continue;
            }
            let d = rg.len();
            e.resize(d, 0.0);
            u.resize(d, 0.0);
            v.resize(d, 0.0);
            w.resize(d, 0.0);
            cone.unit(&mut e);
            cone.mul_winv_t(&aff.s[rg.clone()], &mut u);
            cone.mul_w(&aff.z[rg.clone()], &mut v);
            cone.circ(&u, &v, &mut w);
            let seg = &mut ds[rg.clone()];
            cone.lambda_sq(seg);
            for k in 0..d {
                seg[k] += w[k] - sigma * mu * e[k];
            }
        }
        let dkappa = it.tau * it.kappa + aff.tau * aff.kappa - sigma * mu;
        ctx.direction(
            &mut kkt,
            &it,
            &rx,
            &rz,
            rtau,
            &ds,
            dkappa,
            1.0 - sigma,
            &mut dir,
            &mut rhs,
            &mut tmp,
        );
        let alpha = (st.max_step_fraction * ctx.step_length(&it, &dir, 1.0 / st.max_step_fraction))
            .min(1.0);
        if !alpha.is_finite() || dir.x.iter().chain(&dir.z).any(|v| !v.is_finite()) {
            debug!("iter {iter}: non-finite search direction");
            return unscaled_iterate(orig, &sc, &it, Status::NumericalFailure, iter, start);
        }
        debug!(
            "iter {iter}: mu {mu:.3e} sigma {sigma:.3e} alpha {alpha:.3e} tau {:.3e} kappa {:.3e}",
            it.tau, it.kappa
        );
        if alpha < 1e-10 {
            small_steps += 1;
            if small_steps >= 5 {
                debug!("iter {iter}: step length stalled");
                return unscaled_iterate(orig, &sc, &it, Status::NumericalFailure, iter, start);
            }
        } else {
            small_steps = 0;
        }
        for j in 0..n {
            it.x[j] += alpha * dir.x[j];
        }
        for i in 0..m {
            it.s[i] += alpha * dir.s[i];
            it.z[i] += alpha * dir.z[i];
        }
        it.tau += alpha * dir.tau;
        it.kappa += alpha * dir.kappa;
    }
    unscaled_iterate(orig, &sc, &it, Status::IterationLimit, st.max_iter, start)
}

struct StepCtx<'a> {
    p: &'a ConicProgram,
    cones: &'a [Cone],
    ranges: &'a [std::ops::Range<usize>],
    x1: &'a [f64],
    z1: &'a [f64],
    denom: f64,
}

impl StepCtx<'_> {
    /// Solves the Newton system for right-hand side (k*rx, k*rz, k*rtau, ds, dkappa).
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        kkt: &mut Kkt,
        it: &Iterate,
        rx: &[f64],
        rz: &[f64],
        rtau: f64,
        ds: &[f64],
        dkappa: f64,
        k: f64,
        out: &mut Direction,
        rhs: &mut [f64],
        tmp: &mut [f64],
    ) {
        let n = rx.len();
        // wt = W'(lambda \ ds)
        let mut wt = vec![0.0; rz.len()];
        let mut buf = Vec::new();
        for (cone, rg) in self.cones.iter().zip(self.ranges) {
            if cone.is_zero() {
                continue;
            }
            buf.resize(rg.len(), 0.0);
            cone.lambda_inv_circ(&ds[rg.clone()], &mut buf);
            cone.mul_wt(&buf, &mut wt[rg.clone()]);
        }
        for j in 0..n {
            rhs[j] = -k * rx[j];
        }
        for i in 0..rz.len() {
            rhs[n + i] = -k * rz[i] + wt[i];
        }
        kkt.solve(rhs, tmp);
        let num =
            -k * rtau + dkappa / it.tau - dot(&self.p.c, &tmp[..n]) - dot(&self.p.b, &tmp[n..]);
        let dtau = num / self.denom;
        for j in 0..n {
            out.x[j] = tmp[j] + dtau * self.x1[j];
        }
        for i in 0..rz.len() {
            out.z[i] = tmp[n + i] + dtau * self.z1[i];
        }
        // ds = -wt - W'W dz
        for (cone, rg) in self.cones.iter().zip(self.ranges) {
            if cone.is_zero() {
                out.s[rg.clone()].fill(0.0);
                continue;
            }
            buf.resize(rg.len(), 0.0);
            cone.mul_w(&out.z[rg.clone()], &mut buf);
            let mut hz = vec![0.0; rg.len()];
            cone.mul_wt(&buf, &mut hz);
            for (q, i) in rg.clone().enumerate() {
                out.s[i] = -wt[i] - hz[q];
            }
        }
        out.tau = dtau;
        out.kappa = -(dkappa + it.kappa * dtau) / it.tau;
    }

    fn step_length(&self, it: &Iterate, d: &Direction, amax: f64) -> f64 {
        let mut a = amax;
        if d.tau < 0.0 {
            a = a.min(-it.tau / d.tau);
        }
        if d.kappa < 0.0 {
            a = a.min(-it.kappa / d.kappa);
        }
        for (cone, rg) in self.cones.iter().zip(self.ranges) {
            a = cone.step_length(
                &it.s[rg.clone()],
                &it.z[rg.clone()],
                &d.s[rg.clone()],
                &d.z[rg.clone()],
                a,
            );
        }
        a.max(0.0)
    }
}

struct Unscaled {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
}

fn unscale(sc: &Scaling, it: &Iterate, divide_tau: bool) -> Unscaled {
    let t = if divide_tau { it.tau } else { 1.0 };
    let zt = if divide_tau { it.tau * sc.cost } else { 1.0 };
    Unscaled {
        x: it.x.iter().zip(&sc.d).map(|(x, d)| x * d / t).collect(),
        s: it.s.iter().zip(&sc.e).map(|(s, e)| s / e / t).collect(),
        z: it.z.iter().zip(&sc.e).map(|(z, e)| z * e / zt).collect(),
    }
}

fn residuals(p: &ConicProgram, u: &Unscaled) -> (f64, f64, f64, f64, f64) {
    let mut r = u.s.clone();
    p.a.gemv(1.0, &u.x, &mut r);
    for i in 0..r.len() {
        r[i] -= p.b[i];
    }
    let mut d = p.c.clone();
    p.a.gemv_t(1.0, &u.z, &mut d);
    let pobj = dot(&p.c, &u.x);
    let dobj = -dot(&p.b, &u.z);
    (norm_inf(&r), norm_inf(&d), pobj, dobj, (pobj - dobj).abs())
}

fn unscaled_iterate(
    p: &ConicProgram,
    sc: &Scaling,
    it: &Iterate,
    status: Status,
    iter: usize,
    start: Instant,
) -> Solution {
    let u = unscale(sc, it, true);
    let (pr, dr, pobj, dobj, gap) = residuals(p, &u);
    Solution {
        status,
        x: u.x,
        s: u.s,
        z: u.z,
        primal_obj: pobj,
        dual_obj: dobj,
        iterations: iter,
        wall_time: start.elapsed().as_secs_f64(),
        primal_residual: pr,
        dual_residual: dr,
        gap,
    }
}

fn check_termination(
    p: &ConicProgram,
    sc: &Scaling,
    it: &Iterate,
    st: &Settings,
    iter: usize,
    start: Instant,
) -> Option<Solution> {
    let u = unscale(sc, it, true);
    let (pr, dr, pobj, dobj, gap) = residuals(p, &u);
    let bnorm = norm_inf(&p.b);
    let cnorm = norm_inf(&p.c);
    if pr <= st.feas_tol * (1.0 + bnorm)
        && dr <= st.feas_tol * (1.0 + cnorm)
        && gap <= st.gap_tol * (1.0 + pobj.abs())
    {
        return Some(Solution {
            status: Status::Optimal,
            x: u.x,
            s: u.s,
            z: u.z,
            primal_obj: pobj,
            dual_obj: dobj,
            iterations: iter,
            wall_time: start.elapsed().as_secs_f64(),
            primal_residual: pr,
            dual_residual: dr,
            gap,
        });
    }
    if it.tau >= it.kappa {
        return None;
    }
    // infeasibility certificates from the unnormalized rays
    let ray = unscale(sc, it, false);
    let bz = dot(&p.b, &ray.z);
    if bz < 0.0 {
        let mut atz = vec![0.0; p.num_vars()];
        p.a.gemv_t(1.0, &ray.z, &mut atz);
        if norm_inf(&atz) <= st.feas_tol * (-bz) {
            let z: Vec<f64> = ray.z.iter().map(|v| v / -bz).collect();
            return Some(Solution::certificate(
                Status::PrimalInfeasible,
                p,
                vec![0.0; p.num_vars()],
                vec![0.0; p.num_rows()],
                z,
                iter,
                start.elapsed().as_secs_f64(),
            ));
        }
    }
    let cx = dot(&p.c, &ray.x);
    if cx < 0.0 {
        let mut axs = ray.s.clone();
        p.a.gemv(1.0, &ray.x, &mut axs);
        if norm_inf(&axs) <= st.feas_tol * (-cx) {
            let x: Vec<f64> = ray.x.iter().map(|v| v / -cx).collect();
            let mut s = vec![0.0; p.num_rows()];
            p.a.gemv(-1.0, &x, &mut s);
            return Some(Solution::certificate(
                Status::DualInfeasible,
                p,
                x,
                s,
                vec![0.0; p.num_rows()],
                iter,
                start.elapsed().as_secs_f64(),
            ));
        }
    }
    None
}
