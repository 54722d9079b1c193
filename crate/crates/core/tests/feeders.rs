use std::path::PathBuf;

use mpopf_core::lpf::{lpf_error_report, lpf_residuals, lpf_solve};
use mpopf_core::netmodel::{errors_only, parse_network, validate_network, Network};
use mpopf_core::powerflow::{bfm_from_voltages, bfm_residual, fbs_solve, max_bim_residual};
use mpopf_core::synth::{feeder_from_seed, random_injections, rng_from_seed, SynthConfig};

const FEEDERS: [&str; 4] = ["ieee13", "ieee34", "ieee37", "ieee123"];

fn load(name: &str) -> Network {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/feeders")
        .join(format!("{name}.json"));
    parse_network(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bundled_feeders_validate() {
    for name in FEEDERS {
        let net = load(name);
        let errs = errors_only(&validate_network(&net));
        assert!(errs.is_empty(), "{name}: {errs:?}");
    }
}

#[test]
fn power_flow_satisfies_both_models_on_bundled_feeders() {
    for name in FEEDERS {
        let net = load(name);
        let s = net.nominal_injections();
        let st = fbs_solve(&net, &s).unwrap();
        let bim = max_bim_residual(&net, &st.v, &st.s).unwrap();
        assert!(bim <= 1e-8, "{name}: bim residual {bim}");
        let back = bfm_from_voltages(&net, &st.v).unwrap();
        let r = bfm_residual(&net, &back).unwrap().max();
        assert!(r <= 1e-8, "{name}: bfm residual {r}");
    }
}

#[test]
fn linear_model_equations_hold_on_bundled_feeders() {
    for name in FEEDERS {
        let net = load(name);
        let s = net.nominal_injections();
        let sol = lpf_solve(&net, &s).unwrap();
        let (bal, volt) = lpf_residuals(&net, &sol, &s).unwrap();
        assert!(bal <= 1e-12 && volt <= 1e-12, "{name}: {bal} {volt}");
    }
}

fn scaled(net: &Network, f: f64) -> Network {
    let mut out = net.clone();
    for l in &mut out.lines {
        l.z *= num_complex::Complex64::new(f, 0.0);
    }
    out
}

#[test]
fn doubling_impedance_does_not_improve_the_linear_model() {
    let cfg = SynthConfig::light();
    let mut violations = 0;
    let mut compared = 0;
    for seed in 0..30 {
        let net = feeder_from_seed(seed, &cfg);
        let s = random_injections(&mut rng_from_seed(seed), &net);
        let twice = scaled(&net, 2.0);
        let (Ok(a), Ok(b)) = (fbs_solve(&net, &s), fbs_solve(&twice, &s)) else {
            continue;
        };
        let ea = lpf_error_report(&net, &lpf_solve(&net, &s).unwrap(), &a)
            .unwrap()
            .voltage_error_pu;
        let eb = lpf_error_report(&twice, &lpf_solve(&twice, &s).unwrap(), &b)
            .unwrap()
            .voltage_error_pu;
        if eb < ea {
            violations += 1;
        }
        compared += 1;
    }
    assert!(compared >= 20, "only {compared} feeders converged");
    assert!(violations <= 1, "{violations} of {compared} got better");
}

#[test]
fn linear_model_is_accurate_under_light_load() {
    let cfg = SynthConfig::light();
    let mut worst = 0.0f64;
    for seed in 0..40 {
        let net = feeder_from_seed(seed, &cfg);
        let s = random_injections(&mut rng_from_seed(seed), &net);
        let st = fbs_solve(&net, &s).unwrap();
        let e = lpf_error_report(&net, &lpf_solve(&net, &s).unwrap(), &st)
            .unwrap()
            .voltage_error_pu;
        worst = worst.max(e);
    }
    assert!(worst <= 1e-3, "worst voltage error {worst}");
}
