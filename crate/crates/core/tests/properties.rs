use mpopf_core::linalg::{
    hermitian_eigendecompose, hermitian_to_real_embedding, pseudo_inverse, rank_ratio,
};
use mpopf_core::netmodel::{
    downstream_set, embed_vec, parse_network, path_to_root, project_vec, serialize_network, CMat,
    CVec, Network,
};
use mpopf_core::powerflow::{fbs_solve, total_line_loss};
use mpopf_core::relax::{
    bfm_point_from_voltages, bfm_point_residual, bim_point_from_voltages, bim_point_residual,
    exactness_report, loss_value, map_f, map_g, recover_voltages_alg1, recover_voltages_alg2,
    BfmSdpPoint, RelaxPoint,
};
use mpopf_core::synth::{
    feeder_from_seed, pin_to_point, random_feasible_bim_point, random_injections, random_voltages,
    rng_from_seed, SynthConfig,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn max_diff(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| (x - y).iter().map(|e| e.norm()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}

fn max_vdiff(a: &[CVec], b: &[CVec]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| (x - y).iter().map(|e| e.norm()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}

fn random_hermitian(seed: u64, n: usize) -> CMat {
    let mut rng = rng_from_seed(seed);
    let a = CMat::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    (&a + a.adjoint()).scale(0.5)
}

/// Convex combination of rank-one branch flow points, with the network
/// pinned so the combination is feasible.
fn random_feasible_bfm_point(seed: u64) -> (Network, BfmSdpPoint) {
    let net = feeder_from_seed(seed, &SynthConfig::default());
    let mut rng = rng_from_seed(seed ^ 0x5eed);
    let terms = rng.gen_range(1..4);
    let weights: Vec<f64> = (0..terms).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc: Option<BfmSdpPoint> = None;
    for w in weights {
        let v = random_voltages(&mut rng, &net, 0.05).unwrap();
        let p = bfm_point_from_voltages(&net, &v).unwrap();
        let t = Complex64::new(w / total, 0.0);
        let scaled = BfmSdpPoint {
            s: p.s.iter().map(|x| x * t).collect(),
            v: p.v.iter().map(|x| x * t).collect(),
            flow: p.flow.iter().map(|x| x * t).collect(),
            ell: p.ell.iter().map(|x| x * t).collect(),
        };
        acc = Some(match acc {
            None => scaled,
            Some(mut a) => {
                a.s.iter_mut().zip(&scaled.s).for_each(|(x, y)| *x += y);
                a.v.iter_mut().zip(&scaled.v).for_each(|(x, y)| *x += y);
                a.flow
                    .iter_mut()
                    .zip(&scaled.flow)
                    .for_each(|(x, y)| *x += y);
                a.ell.iter_mut().zip(&scaled.ell).for_each(|(x, y)| *x += y);
                a
            }
        });
    }
    let mut p = acc.unwrap();
    p.v[0] = net.v0();
    (pin_to_point(&net, &p.s, &p.v), p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), n in 1usize..7) {
        let m = random_hermitian(seed, n);
        let (spec, vecs) = hermitian_eigendecompose(&m).unwrap();
        let d = CMat::from_diagonal(&CVec::from_iterator(n, spec.eigenvalues.iter().map(|x| Complex64::new(*x, 0.0))));
        let back = &vecs * d * vecs.adjoint();
        prop_assert!((&back - &m).iter().all(|x| x.norm() < 1e-10));
        prop_assert!((vecs.adjoint() * &vecs - CMat::identity(n, n)).iter().all(|x| x.norm() < 1e-10));
    }

    #[test]
    fn embedding_doubles_the_spectrum(seed in any::<u64>(), n in 1usize..6) {
        let m = random_hermitian(seed, n);
        let (spec, _) = hermitian_eigendecompose(&m).unwrap();
        let e: DMatrix<f64> = hermitian_to_real_embedding(&m).unwrap();
        let mut real = e.symmetric_eigen().eigenvalues.as_slice().to_vec();
        real.sort_by(f64::total_cmp);
        let mut doubled: Vec<f64> = spec.eigenvalues.iter().flat_map(|x| [*x, *x]).collect();
        doubled.sort_by(f64::total_cmp);
        for (a, b) in real.iter().zip(&doubled) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn pseudo_inverse_satisfies_penrose(seed in any::<u64>(), n in 1usize..5, rank in 0usize..5) {
        let mut rng = rng_from_seed(seed);
        let rank = rank.min(n);
        let mut m = CMat::zeros(n, n);
        for _ in 0..rank {
            let u = CVec::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            m += &u * u.adjoint();
        }
        let p = pseudo_inverse(&m).unwrap();
        let ok = |a: CMat, b: &CMat| (a - b).iter().all(|x| x.norm() < 1e-8);
        prop_assert!(ok(&m * &p * &m, &m));
        prop_assert!(ok(&p * &m * &p, &p));
        prop_assert!(ok((&m * &p).adjoint(), &(&m * &p)));
        prop_assert!(ok((&p * &m).adjoint(), &(&p * &m)));
    }

    #[test]
    fn tree_structure(seed in any::<u64>()) {
        let net = feeder_from_seed(seed, &SynthConfig::default());
        for j in 1..net.num_buses() {
            let path = path_to_root(&net, j).unwrap();
            prop_assert!(!path.is_empty());
            prop_assert_eq!(net.lines[path[0]].from, 0);
            for w in path.windows(2) {
                prop_assert_eq!(net.lines[w[0]].to, net.lines[w[1]].from);
            }
            prop_assert_eq!(net.lines[*path.last().unwrap()].to, j);
        }
        for i in 0..net.num_buses() {
            let kids: Vec<usize> = net.child_lines(i).iter().map(|&k| net.lines[k].to).collect();
            for (a, &x) in kids.iter().enumerate() {
                for &y in &kids[a + 1..] {
                    let dx = downstream_set(&net, x).unwrap();
                    let dy = downstream_set(&net, y).unwrap();
                    prop_assert!(dx.iter().all(|b| !dy.contains(b)));
                }
            }
        }
    }

    #[test]
    fn network_files_round_trip(seed in any::<u64>()) {
        let net = feeder_from_seed(seed, &SynthConfig::default());
        let text = serialize_network(&net);
        let back = parse_network(&text).unwrap();
        prop_assert_eq!(serialize_network(&back), text);
        prop_assert_eq!(back.num_buses(), net.num_buses());
    }

    #[test]
    fn phase_embedding_round_trips(seed in any::<u64>()) {
        let net = feeder_from_seed(seed, &SynthConfig::default());
        let mut rng = rng_from_seed(seed);
        for l in &net.lines {
            let x = CVec::from_fn(l.phases.len(), |_, _| Complex64::new(rng.gen(), rng.gen()));
            let up = net.phases(l.from);
            let e = embed_vec(&x, l.phases, up).unwrap();
            prop_assert_eq!(project_vec(&e, up, l.phases).unwrap(), x);
        }
    }

    #[test]
    fn maps_round_trip_and_keep_bim_points_feasible(seed in any::<u64>(), terms in 1usize..4) {
        let base = feeder_from_seed(seed, &SynthConfig::default());
        let mut rng = rng_from_seed(seed);
        let (net, x) = random_feasible_bim_point(&mut rng, &base, terms, 0.05).unwrap();
        prop_assert!(bim_point_residual(&net, &x).unwrap().max() <= 1e-8);
        let y = map_f(&x, &net).unwrap();
        prop_assert!(bfm_point_residual(&net, &y).unwrap().max() <= 1e-8);
        let back = map_g(&y, &net).unwrap();
        prop_assert!(max_diff(&back.w, &x.w) <= 1e-12);
        prop_assert!(max_diff(&back.v, &x.v) <= 1e-12);
        prop_assert!(max_vdiff(&back.s, &x.s) <= 1e-12);
    }

    #[test]
    fn maps_round_trip_and_keep_bfm_points_feasible(seed in any::<u64>()) {
        let (net, y) = random_feasible_bfm_point(seed);
        prop_assert!(bfm_point_residual(&net, &y).unwrap().max() <= 1e-8);
        let x = map_g(&y, &net).unwrap();
        prop_assert!(bim_point_residual(&net, &x).unwrap().max() <= 1e-8);
        let back = map_f(&x, &net).unwrap();
        prop_assert!(max_diff(&back.flow, &y.flow) <= 1e-12);
        prop_assert!(max_diff(&back.ell, &y.ell) <= 1e-12);
        prop_assert!(max_diff(&back.v, &y.v) <= 1e-12);
    }

    #[test]
    fn rank_one_points_recover_their_voltages(seed in any::<u64>()) {
        let cfg = SynthConfig { max_buses: 6, ..Default::default() };
        let net = feeder_from_seed(seed, &cfg);
        let mut rng = rng_from_seed(seed);
        let v = random_voltages(&mut rng, &net, 0.08).unwrap();
        let bim = bim_point_from_voltages(&net, &v).unwrap();
        let bfm = bfm_point_from_voltages(&net, &v).unwrap();
        let r1 = recover_voltages_alg1(&bim, &net, 1e-8, false).unwrap();
        let r2 = recover_voltages_alg2(&bfm, &net, 1e-8, false).unwrap();
        prop_assert!(max_vdiff(&r1.v, &v) <= 1e-10);
        prop_assert!(max_vdiff(&r2.v, &v) <= 1e-10);
        // the images under f and g are rank one as well
        let fb = map_f(&bim, &net).unwrap();
        let gb = map_g(&bfm, &net).unwrap();
        for p in [RelaxPoint::Bim(bim), RelaxPoint::Bfm(fb), RelaxPoint::Bfm(bfm), RelaxPoint::Bim(gb)] {
            prop_assert!(exactness_report(&p, &net, 1e-8).unwrap().max_ratio <= 1e-8);
        }
    }

    #[test]
    fn loss_objective_telescopes(seed in any::<u64>()) {
        let net = feeder_from_seed(seed, &SynthConfig::default());
        let mut rng = rng_from_seed(seed);
        let s = random_injections(&mut rng, &net);
        if let Ok(st) = fbs_solve(&net, &s) {
            let direct: f64 = net.lines.iter().zip(&st.ell).map(|(l, e)| (&l.z * e).trace().re).sum();
            prop_assert!((loss_value(&st.s) - direct).abs() <= 1e-8);
            prop_assert!((total_line_loss(&net, &st) - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn power_flow_is_deterministic(seed in any::<u64>()) {
        let net = feeder_from_seed(seed, &SynthConfig::default());
        let s = random_injections(&mut rng_from_seed(seed), &net);
        let a = fbs_solve(&net, &s);
        let b = fbs_solve(&net, &s);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "one run converged and the other did not"),
        }
    }
}

#[test]
fn rank_ratio_of_embedded_rank_one_block() {
    let u = CVec::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, -0.5)]);
    let m = &u * u.adjoint();
    assert!(rank_ratio(&m).unwrap() < 1e-15);
}
