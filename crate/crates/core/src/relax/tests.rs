use mpopf_conic::Status;
use num_complex::Complex64;

use super::*;
use crate::netmodel::{DeviceRegion, PhaseSet};
use crate::powerflow::{fbs_solve, max_bim_residual};
use crate::testing::{bus, chain, line, star};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn max_abs_diff(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| max_abs(&(x - y)))
        .fold(0.0, f64::max)
}

fn loaded(mut net: Network, load: (f64, f64)) -> Network {
    for b in net.buses.iter_mut().skip(1) {
        let k = b.phases.len();
        b.devices.push(DeviceRegion::Load {
            p: vec![load.0; k],
            q: vec![load.1; k],
        });
    }
    net
}

fn three_phase_pair() -> Network {
    let abc = PhaseSet::ABC;
    let buses = vec![bus(0, abc), bus(1, abc)];
    let lines = vec![line(0, 1, abc)];
    let net = Network::new(buses, lines, 1.0, 1.0).unwrap();
    loaded(net, (0.1, 0.05))
}

/// Two buses, one load plus a PV inverter at the far end.
fn pv_pair() -> Network {
    let mut net = chain(2);
    net.buses[1].devices = vec![
        DeviceRegion::Load {
            p: vec![0.5],
            q: vec![0.2],
        },
        DeviceRegion::PvInverter {
            p: vec![0.3],
            s_max: vec![0.35],
        },
    ];
    net
}

fn fbs_loss(net: &Network, s1: Complex64) -> f64 {
    let st = fbs_solve(net, &[CVec::zeros(1), CVec::from_element(1, s1)]).unwrap();
    loss_value(&st.s)
}

#[test]
fn model_names_round_trip() {
    for m in [Model::Bim, Model::Bfm] {
        assert_eq!(m.to_string().parse::<Model>().unwrap(), m);
    }
    assert_eq!("BFM".parse::<Model>().unwrap(), Model::Bfm);
    assert!("dist".parse::<Model>().is_err());
}

#[test]
fn single_bus_has_zero_loss() {
    let net = chain(1);
    for m in [Model::Bim, Model::Bfm] {
        let r = solve_opf(&net, m, &OpfOptions::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!(r.objective.unwrap().abs() < 1e-8);
        assert_eq!(r.recovery.unwrap().v[0], *net.v_ref());
    }
}

#[test]
fn three_phase_line_has_one_psd_block_of_side_twelve() {
    let net = three_phase_pair();
    for prog in [
        build_bim_sdp(&net).unwrap().0,
        build_bfm_sdp(&net).unwrap().0,
    ] {
        let psd: Vec<_> = prog
            .cones
            .iter()
            .filter(|c| matches!(c, mpopf_conic::ConeSpec::Psd(_)))
            .collect();
        assert_eq!(psd, vec![&mpopf_conic::ConeSpec::Psd(12)]);
    }
}

#[test]
fn pv_pair_matches_power_flow_oracle() {
    let net = pv_pair();
    // golden-section search of the exact loss over the feasible reactive range
    let qmax = (0.35f64 * 0.35 - 0.3 * 0.3).sqrt();
    let f = |q: f64| fbs_loss(&net, c(-0.2, q - 0.2));
    let (mut a, mut b) = (-qmax, qmax);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if f(x1) < f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let oracle = f(0.5 * (a + b));

    let opts = OpfOptions::default();
    let bim = solve_opf(&net, Model::Bim, &opts).unwrap();
    let bfm = solve_opf(&net, Model::Bfm, &opts).unwrap();
    assert_eq!(bim.status, Status::Optimal, "{:?}", bim.solution);
    assert_eq!(bfm.status, Status::Optimal);
    let (ob, of) = (bim.objective.unwrap(), bfm.objective.unwrap());
    assert!((ob - oracle).abs() < 1e-4, "bim {ob} vs oracle {oracle}");
    assert!((of - oracle).abs() < 1e-4, "bfm {of} vs oracle {oracle}");
    assert!((ob - of).abs() < 1e-6, "bim {ob} vs bfm {of}");
    assert!(bim.exactness.as_ref().unwrap().exact);
    assert!(bfm.exactness.as_ref().unwrap().exact);

    // the recovered voltages solve the power flow at the optimal injections
    for r in [&bim, &bfm] {
        let rec = r.recovery.as_ref().unwrap();
        let s = r.point.as_ref().unwrap().injections();
        assert!(max_bim_residual(&net, &rec.v, s).unwrap() < 1e-5);
    }
}

#[test]
fn maps_invert_each_other_on_rank_one_points() {
    let net = loaded(star(3), (0.2, 0.1));
    let st = fbs_solve(&net, &net.nominal_injections()).unwrap();
    let bim = bim_point_from_voltages(&net, &st.v).unwrap();
    let bfm = bfm_point_from_state(&st);
    let f = map_f(&bim, &net).unwrap();
    assert!(max_abs_diff(&f.flow, &bfm.flow) < 1e-10);
    assert!(max_abs_diff(&f.ell, &bfm.ell) < 1e-8);
    let back = map_g(&f, &net).unwrap();
    assert!(max_abs_diff(&back.w, &bim.w) < 1e-12);
    let fwd = map_f(&map_g(&bfm, &net).unwrap(), &net).unwrap();
    assert!(max_abs_diff(&fwd.flow, &bfm.flow) < 1e-10);

    assert!(bim_point_residual(&net, &bim).unwrap().max() < 1e-9);
    assert!(bfm_point_residual(&net, &bfm).unwrap().max() < 1e-9);
    assert!(bfm_point_residual(&net, &f).unwrap().max() < 1e-8);
}

#[test]
fn flat_point_carries_no_flow() {
    let net = chain(3);
    let v: Vec<CVec> = (0..3).map(|_| net.v_ref().clone()).collect();
    let p = bim_point_from_voltages(&net, &v).unwrap();
    let f = map_f(&p, &net).unwrap();
    assert!(f.flow.iter().chain(&f.ell).all(|m| max_abs(m) < 1e-12));
    assert!(p.s.iter().all(|s| vec_inf(s) < 1e-12));
}

#[test]
fn recovery_reproduces_voltages() {
    let mut net = loaded(chain(4), (0.15, 0.05));
    net.buses[2]
        .devices
        .push(DeviceRegion::Capacitor { q_max: vec![0.1] });
    let mut s = net.nominal_injections();
    s[2][0] = c(-0.15, 0.02);
    let st = fbs_solve(&net, &s).unwrap();
    let bim = bim_point_from_voltages(&net, &st.v).unwrap();
    let bfm = bfm_point_from_state(&st);
    let r1 = recover_voltages_alg1(&bim, &net, DEFAULT_THRESHOLD, false).unwrap();
    let r2 = recover_voltages_alg2(&bfm, &net, DEFAULT_THRESHOLD, false).unwrap();
    for (a, b) in r1.v.iter().zip(&st.v) {
        assert!(vec_inf(&(a - b)) < 1e-12);
    }
    for (a, b) in r2.v.iter().zip(&st.v) {
        assert!(vec_inf(&(a - b)) < 1e-12);
    }
    for (a, b) in r2.i.unwrap().iter().zip(&st.i) {
        assert!(vec_inf(&(a - b)) < 1e-12);
    }
    assert!(!r1.approximate && !r2.approximate);
}

#[test]
fn identity_block_is_not_exact() {
    let net = chain(2);
    let p = BimSdpPoint {
        s: vec![CVec::zeros(1), CVec::zeros(1)],
        v: vec![net.v0(), CMat::identity(1, 1)],
        w: vec![CMat::zeros(1, 1)],
    };
    let rep = exactness_report(&RelaxPoint::Bim(p.clone()), &net, DEFAULT_THRESHOLD).unwrap();
    assert!((rep.max_ratio - 1.0).abs() < 1e-12);
    assert!(!rep.exact);
    assert_eq!(rep.worst_line(), Some(0));
    match recover_voltages_alg1(&p, &net, DEFAULT_THRESHOLD, false) {
        Err(Error::NotExact { line: 0, .. }) => {}
        other => panic!("expected NotExact, got {other:?}"),
    }
    let forced = recover_voltages_alg1(&p, &net, DEFAULT_THRESHOLD, true).unwrap();
    assert!(forced.approximate);
    // degenerate spectrum: any unit factor will do
    assert!(forced.v[1][0].norm() <= 1.0 + 1e-12);
}

#[test]
fn zero_trace_is_reported() {
    let net = chain(3);
    let p = BimSdpPoint {
        s: vec![CVec::zeros(1); 3],
        v: vec![net.v0(), CMat::zeros(1, 1), CMat::zeros(1, 1)],
        w: vec![CMat::zeros(1, 1); 2],
    };
    // line 0 is rank one ([[1, 0], [0, 0]]), line 1 is the zero block
    let rep = exactness_report(&RelaxPoint::Bim(p.clone()), &net, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(rep.ratios[1], None);
    assert!(matches!(
        recover_voltages_alg1(&p, &net, DEFAULT_THRESHOLD, false),
        Err(Error::ZeroTrace(1))
    ));
}

#[test]
fn tight_band_is_infeasible() {
    let net = loaded(chain(3), (0.5, 0.2)).with_voltage_band(0.001);
    for m in [Model::Bim, Model::Bfm] {
        let r = solve_opf(&net, m, &OpfOptions::default()).unwrap();
        assert_eq!(r.status, Status::PrimalInfeasible, "{m}");
        assert!(r.point.is_none());
    }
}
