//! Independent verification of a returned solution or certificate.

use crate::cones::Cone;
use crate::program::ConicProgram;
use crate::solver::{Solution, Status};
use crate::sparse::{dot, norm_inf};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    /// worst cone-membership violation of s and z, scaled like the tolerance
    pub cone_violation: f64,
    pub passed: bool,
}

fn cone_violation(p: &ConicProgram, v: &[f64], zero_free: bool) -> f64 {
    let mut worst = 0.0f64;
    for (spec, rg) in p.cones.iter().zip(p.cone_ranges()) {
        let c = Cone::new(spec);
        let seg = &v[rg];
        let viol = if c.is_zero() {
            if zero_free {
                0.0
            } else {
                norm_inf(seg)
            }
        } else {
            (-c.margin(seg)).max(0.0)
        };
        worst = worst.max(viol);
    }
    worst
}

/// Recomputes residuals on the unscaled data. For `Optimal` the KKT
/// conditions are checked; for infeasible statuses the certificate.
pub fn check_solution(p: &ConicProgram, sol: &Solution, tol: f64) -> CheckReport {
    match sol.status {
        Status::PrimalInfeasible => {
            let mut atz = vec![0.0; p.num_vars()];
            p.a.gemv_t(1.0, &sol.z, &mut atz);
            let bz = dot(&p.b, &sol.z);
            let viol = cone_violation(p, &sol.z, true);
            let r = norm_inf(&atz);
            CheckReport {
                primal_residual: f64::NAN,
                dual_residual: r,
                gap: bz,
                cone_violation: viol,
                passed: bz < 0.0 && r <= tol * bz.abs() && viol <= tol,
            }
        }
        Status::DualInfeasible => {
            let mut ax = vec![0.0; p.num_rows()];
            p.a.gemv(-1.0, &sol.x, &mut ax);
            let cx = dot(&p.c, &sol.x);
            let viol = cone_violation(p, &ax, false);
            CheckReport {
                primal_residual: viol,
                dual_residual: f64::NAN,
                gap: cx,
                cone_violation: viol,
                passed: cx < 0.0 && viol <= tol * cx.abs(),
            }
        }
        _ => {
            let mut r = sol.s.clone();
            p.a.gemv(1.0, &sol.x, &mut r);
            for i in 0..r.len() {
                r[i] -= p.b[i];
            }
            let mut d = p.c.clone();
            p.a.gemv_t(1.0, &sol.z, &mut d);
            let pobj = dot(&p.c, &sol.x);
            let gap = (pobj + dot(&p.b, &sol.z)).abs();
            let pr = norm_inf(&r);
            let dr = norm_inf(&d);
            let viol = cone_violation(p, &sol.s, false).max(cone_violation(p, &sol.z, true));
            let passed = pr <= tol * (1.0 + norm_inf(&p.b))
                && dr <= tol * (1.0 + norm_inf(&p.c))
                && gap <= tol * (1.0 + pobj.abs())
                && viol <= tol * (1.0 + norm_inf(&sol.s).max(norm_inf(&sol.z)));
            CheckReport {
                primal_residual: pr,
                dual_residual: dr,
                gap,
                cone_violation: viol,
                passed,
            }
        }
    }
}
