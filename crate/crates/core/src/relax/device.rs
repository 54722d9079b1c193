//! Injection sets as conic constraints.

use mpopf_conic::{AffExpr, ConeSpec, ProgramBuilder};
use num_complex::Complex64;

use super::model::CExpr;
use crate::error::{Error, Result};
use crate::netmodel::{CVec, DeviceRegion, PhaseSet};

/// Adds the constraints of `region` and returns the bus injection as one
/// expression per phase. Composite regions sum fresh per-part injections.
pub fn device_constraints(
    pb: &mut ProgramBuilder,
    region: &DeviceRegion,
    phases: PhaseSet,
) -> Result<Vec<CExpr>> {
    let k = phases.len();
    let need = |v: &[f64], what: &str| {
        if v.len() == k {
            Ok(())
        } else {
            Err(Error::PhaseMismatch(format!(
                "{} {what} has {} entries for phases {phases}",
                region.kind(),
                v.len()
            )))
        }
    };
    let mut out = vec![CExpr::zero(); k];
    match region {
        DeviceRegion::Capacitor { q_max } => {
            need(q_max, "qmax")?;
            for (o, &qm) in out.iter_mut().zip(q_max) {
                let q = pb.add_var();
                pb.add_nonneg(AffExpr::var(q));
                pb.add_nonneg(AffExpr {
                    terms: vec![(q, -1.0)],
                    constant: qm,
                });
                o.im = AffExpr::var(q);
            }
        }
        DeviceRegion::PvInverter { p, s_max } => {
            need(p, "p")?;
            need(s_max, "smax")?;
            for (o, (&p, &sm)) in out.iter_mut().zip(p.iter().zip(s_max)) {
                let q = pb.add_var();
                pb.add_cone(
                    ConeSpec::Soc(3),
                    &[AffExpr::constant(sm), AffExpr::constant(p), AffExpr::var(q)],
                );
                o.re = AffExpr::constant(p);
                o.im = AffExpr::var(q);
            }
        }
        DeviceRegion::Load { p, q } => {
            need(p, "p")?;
            need(q, "q")?;
            for (o, (&p, &q)) in out.iter_mut().zip(p.iter().zip(q)) {
                *o = CExpr::constant(Complex64::new(-p, -q));
            }
        }
        DeviceRegion::Composite { parts } => {
            if parts.is_empty() {
                return Err(Error::Schema("composite device has no parts".into()));
            }
            for part in parts {
                let s = device_constraints(pb, part, phases)?;
                for (o, e) in out.iter_mut().zip(&s) {
                    o.add_scaled(e, Complex64::new(1.0, 0.0));
                }
            }
        }
    }
    Ok(out)
}

/// Every supported region is {Re s = a, lo <= Im s <= hi} per phase (empty
/// when lo > hi); returns (a, lo, hi) for one phase.
fn phase_interval(region: &DeviceRegion, k: usize) -> (f64, f64, f64) {
    match region {
        DeviceRegion::Capacitor { q_max } => (0.0, 0.0, q_max[k]),
        DeviceRegion::PvInverter { p, s_max } => {
            let r2 = s_max[k] * s_max[k] - p[k] * p[k];
            if r2 < 0.0 {
                (p[k], 1.0, -1.0)
            } else {
                (p[k], -r2.sqrt(), r2.sqrt())
            }
        }
        DeviceRegion::Load { p, q } => (-p[k], -q[k], -q[k]),
        DeviceRegion::Composite { parts } => parts
            .iter()
            .map(|r| phase_interval(r, k))
            .fold((0.0, 0.0, 0.0), |acc, x| {
                (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2)
            }),
    }
}

/// Euclidean distance from `s` to the injection set, worst phase.
/// Infinite if the set is empty.
pub fn device_distance(region: Option<&DeviceRegion>, s: &CVec) -> f64 {
    let mut worst = 0.0f64;
    for (k, sk) in s.iter().enumerate() {
        let (a, lo, hi) = match region {
            Some(r) => phase_interval(r, k),
            None => (0.0, 0.0, 0.0),
        };
        if lo > hi {
            return f64::INFINITY;
        }
        let di = if sk.im < lo {
            lo - sk.im
        } else if sk.im > hi {
            sk.im - hi
        } else {
            0.0
        };
        worst = worst.max((sk.re - a).hypot(di));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use mpopf_conic::{solve, Settings, Status};

    fn status_at(region: &DeviceRegion, s: Complex64) -> Status {
        let mut pb = ProgramBuilder::new();
        let e = device_constraints(&mut pb, region, "a".parse().unwrap()).unwrap();
        let mut re = e[0].re.clone();
        re.constant -= s.re;
        let mut im = e[0].im.clone();
        im.constant -= s.im;
        pb.add_eq(re);
        pb.add_eq(im);
        solve(&pb.build(), &Settings::default()).status
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn capacitor_membership() {
        let cap = DeviceRegion::Capacitor { q_max: vec![0.5] };
        assert_eq!(status_at(&cap, c(0.0, 0.3)), Status::Optimal);
        assert_eq!(status_at(&cap, c(0.1, 0.3)), Status::PrimalInfeasible);
        assert_eq!(
            device_distance(Some(&cap), &CVec::from_element(1, c(0.0, 0.3))),
            0.0
        );
        assert!(
            (device_distance(Some(&cap), &CVec::from_element(1, c(0.1, 0.3))) - 0.1).abs() < 1e-15
        );
    }

    #[test]
    fn pv_membership() {
        let pv = DeviceRegion::PvInverter {
            p: vec![0.3],
            s_max: vec![0.5],
        };
        assert_eq!(status_at(&pv, c(0.3, 0.4)), Status::Optimal);
        assert_eq!(status_at(&pv, c(0.3, 0.41)), Status::PrimalInfeasible);
        assert!(device_distance(Some(&pv), &CVec::from_element(1, c(0.3, 0.4))) < 1e-15);
        assert!(device_distance(Some(&pv), &CVec::from_element(1, c(0.3, 0.41))) > 0.0099);
    }

    #[test]
    fn composite_membership_matches_grid_search() {
        let cap = DeviceRegion::Capacitor { q_max: vec![0.2] };
        let pv = DeviceRegion::PvInverter {
            p: vec![0.1],
            s_max: vec![0.1],
        };
        let comp = DeviceRegion::Composite {
            parts: vec![cap, pv],
        };
        assert_eq!(status_at(&comp, c(0.1, 0.2)), Status::Optimal);
        // grid over part decompositions: q_cap in [0, 0.2], pv fixed at (0.1, 0)
        let target = c(0.1, 0.2);
        let found = (0..=200).any(|k| {
            let qc = 0.2 * k as f64 / 200.0;
            let pv_s = target - c(0.0, qc);
            (pv_s.re - 0.1).abs() < 1e-12 && pv_s.norm() <= 0.1 + 1e-12
        });
        assert!(found);
        assert_eq!(status_at(&comp, c(0.1, 0.25)), Status::PrimalInfeasible);
        assert!(device_distance(Some(&comp), &CVec::from_element(1, target)) < 1e-15);
    }

    #[test]
    fn infeasible_pv_gives_certificate() {
        let pv = DeviceRegion::PvInverter {
            p: vec![0.5],
            s_max: vec![0.1],
        };
        assert_eq!(status_at(&pv, c(0.5, 0.0)), Status::PrimalInfeasible);
        assert_eq!(
            device_distance(Some(&pv), &CVec::from_element(1, c(0.5, 0.0))),
            f64::INFINITY
        );
    }

    #[test]
    fn no_device_means_zero() {
        assert_eq!(
            device_distance(None, &CVec::from_element(1, c(0.0, 0.0))),
            0.0
        );
        assert!((device_distance(None, &CVec::from_element(1, c(0.3, 0.4))) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn phase_count_is_checked() {
        let mut pb = ProgramBuilder::new();
        let cap = DeviceRegion::Capacitor {
            q_max: vec![0.5, 0.5],
        };
        assert!(device_constraints(&mut pb, &cap, "a".parse().unwrap()).is_err());
    }
}
