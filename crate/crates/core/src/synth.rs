//! Seeded random feeders and forward-constructed operating points for
//! property tests.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::netmodel::{
    project_mat, project_vec, Bus, CMat, CVec, DeviceRegion, Line, Network, Phase, PhaseSet,
};
use crate::powerflow::{InjectionProfile, VoltageProfile};
use crate::relax::{bim_point_from_voltages, BimSdpPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub min_buses: usize,
    pub max_buses: usize,
    /// loads <= 0.05 p.u. per phase and |z| <= 0.02 p.u.
    pub light: bool,
    /// branch buses get bounds [1 - band, 1 + band]
    pub band: f64,
    /// probability that a branch bus carries a capacitor / a PV inverter
    pub p_capacitor: f64,
    pub p_pv: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            min_buses: 2,
            max_buses: 8,
            light: false,
            band: 0.1,
            p_capacitor: 0.4,
            p_pv: 0.4,
        }
    }
}

impl SynthConfig {
    pub fn light() -> Self {
        SynthConfig {
            light: true,
            ..Default::default()
        }
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Balanced positive-sequence reference on the given phases.
pub fn balanced_ref(phases: PhaseSet) -> CVec {
    CVec::from_iterator(
        phases.len(),
        phases
            .iter()
            .map(|p| Complex64::from_polar(1.0, -2.0 * PI / 3.0 * p as usize as f64)),
    )
}

/// Non-empty random subset of `parent`; keeps every phase half of the time.
fn child_phases<R: Rng + ?Sized>(rng: &mut R, parent: PhaseSet) -> PhaseSet {
    if rng.gen_bool(0.5) {
        return parent;
    }
    let all: Vec<Phase> = parent.iter().collect();
    let k = rng.gen_range(1..=all.len());
    let mut pick: Vec<Phase> = all.choose_multiple(rng, k).cloned().collect();
    pick.sort();
    PhaseSet::new(&pick).expect("non-empty phase subset")
}

/// Symmetric 3x3 phase impedance with a dominant diagonal, projected onto
/// the line phases.
fn impedance<R: Rng + ?Sized>(rng: &mut R, phases: PhaseSet, light: bool) -> CMat {
    let scale = if light { 0.4 } else { 1.0 };
    let mut z = CMat::zeros(3, 3);
    for i in 0..3 {
        z[(i, i)] = Complex64::new(rng.gen_range(0.005..0.015), rng.gen_range(0.01..0.03)) * scale;
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let f = rng.gen_range(0.2..0.4);
            let m = (z[(i, i)] + z[(j, j)]) * (0.5 * f);
            z[(i, j)] = m;
            z[(j, i)] = m;
        }
    }
    project_mat(&z, PhaseSet::ABC, phases).expect("subset of abc")
}

fn devices<R: Rng + ?Sized>(rng: &mut R, k: usize, cfg: &SynthConfig) -> Vec<DeviceRegion> {
    let pmax = if cfg.light { 0.05 } else { 0.1 };
    let mut out = vec![DeviceRegion::Load {
        p: (0..k).map(|_| rng.gen_range(0.2 * pmax..pmax)).collect(),
        q: (0..k).map(|_| rng.gen_range(0.0..0.5 * pmax)).collect(),
    }];
    if rng.gen_bool(cfg.p_capacitor) {
        out.push(DeviceRegion::Capacitor {
            q_max: (0..k).map(|_| rng.gen_range(0.0..0.5 * pmax)).collect(),
        });
    }
    if rng.gen_bool(cfg.p_pv) {
        let p: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..0.8 * pmax)).collect();
        let s_max = p
            .iter()
            .map(|p| p * rng.gen_range(1.0..1.3) + 1e-3)
            .collect();
        out.push(DeviceRegion::PvInverter { p, s_max });
    }
    out
}

/// Random radial feeder: three-phase substation, each new bus hangs off a
/// uniformly chosen earlier bus and carries a subset of its phases.
pub fn random_feeder<R: Rng + ?Sized>(rng: &mut R, cfg: &SynthConfig) -> Network {
    let n = rng.gen_range(cfg.min_buses..=cfg.max_buses.max(cfg.min_buses));
    let abc = PhaseSet::ABC;
    let mut buses = vec![Bus {
        id: 0,
        name: None,
        phases: abc,
        v_min: vec![1.0; 3],
        v_max: vec![1.0; 3],
        devices: Vec::new(),
        v_ref: Some(balanced_ref(abc)),
    }];
    let mut lines = Vec::with_capacity(n.saturating_sub(1));
    for j in 1..n {
        let i = rng.gen_range(0..j);
        let phases = child_phases(rng, buses[i].phases);
        let k = phases.len();
        buses.push(Bus {
            id: j,
            name: None,
            phases,
            v_min: vec![1.0 - cfg.band; k],
            v_max: vec![1.0 + cfg.band; k],
            devices: devices(rng, k, cfg),
            v_ref: None,
        });
        lines.push(Line {
            from: i,
            to: j,
            name: None,
            phases,
            z: impedance(rng, phases, cfg.light),
        });
    }
    Network::new(buses, lines, 1.0, 1.0).expect("generated tree is radial")
}

pub fn feeder_from_seed(seed: u64, cfg: &SynthConfig) -> Network {
    random_feeder(&mut rng_from_seed(seed), cfg)
}

/// Voltage profile built outward from v_ref: every phase of V_j is the
/// parent's value times a random factor within `spread` of 1.
pub fn random_voltages<R: Rng + ?Sized>(
    rng: &mut R,
    net: &Network,
    spread: f64,
) -> Result<VoltageProfile> {
    let mut v: Vec<CVec> = net
        .buses
        .iter()
        .map(|b| CVec::zeros(b.phases.len()))
        .collect();
    v[0] = net.v_ref().clone();
    for &j in net.bfs_order().iter().skip(1) {
        let l = &net.lines[net.parent_line(j).expect("branch bus has a parent")];
        let vi = project_vec(&v[l.from], net.phases(l.from), l.phases)?;
        v[j] = vi.map(|x| {
            let r = 1.0 - rng.gen_range(0.0..spread);
            let a = rng.gen_range(-spread..spread);
            x * Complex64::from_polar(r, a)
        });
    }
    Ok(v)
}

/// Copy of `net` whose branch buses have Load regions pinned at `s` and
/// bounds widened to contain `sqrt(diag v)`, so a point with these
/// injections and voltages satisfies every device and bound constraint.
pub fn pin_to_point(net: &Network, s: &[CVec], v: &[CMat]) -> Network {
    let mut out = net.clone();
    for b in out.buses.iter_mut().skip(1) {
        let si = &s[b.id];
        b.devices = vec![DeviceRegion::Load {
            p: si.iter().map(|x| -x.re).collect(),
            q: si.iter().map(|x| -x.im).collect(),
        }];
        for k in 0..b.phases.len() {
            let m = v[b.id][(k, k)].re.max(0.0).sqrt();
            b.v_min[k] = b.v_min[k].min(0.99 * m);
            b.v_max[k] = b.v_max[k].max(1.01 * m);
        }
    }
    out
}

/// Random BIM-SDP point: a convex combination of `count` rank-one points
/// built from random voltage profiles (all anchored at v_ref). Returns the
/// network pinned to that point together with the point.
pub fn random_feasible_bim_point<R: Rng + ?Sized>(
    rng: &mut R,
    net: &Network,
    count: usize,
    spread: f64,
) -> Result<(Network, BimSdpPoint)> {
    let mut weights: Vec<f64> = (0..count.max(1)).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut acc: Option<BimSdpPoint> = None;
    for &t in &weights {
        let v = random_voltages(rng, net, spread)?;
        let p = bim_point_from_voltages(net, &v)?;
        let tc = Complex64::new(t, 0.0);
        acc = Some(match acc {
            None => BimSdpPoint {
                s: p.s.iter().map(|x| x * tc).collect(),
                v: p.v.iter().map(|x| x * tc).collect(),
                w: p.w.iter().map(|x| x * tc).collect(),
            },
            Some(mut a) => {
                for (x, y) in a.s.iter_mut().zip(&p.s) {
                    *x += y * tc;
                }
                for (x, y) in a.v.iter_mut().zip(&p.v) {
                    *x += y * tc;
                }
                for (x, y) in a.w.iter_mut().zip(&p.w) {
                    *x += y * tc;
                }
                a
            }
        });
    }
    let mut p = acc.expect("at least one term");
    // every term carries v_ref v_ref^H; restore it exactly
    p.v[0] = net.v0();
    Ok((pin_to_point(net, &p.s, &p.v), p))
}

/// Device-feasible injections: loads at value, capacitors at a random
/// fraction of q_max, PV at (p, q) with |q| within the rating.
pub fn random_injections<R: Rng + ?Sized>(rng: &mut R, net: &Network) -> InjectionProfile {
    net.buses
        .iter()
        .map(|b| {
            let k = b.phases.len();
            let mut s = CVec::zeros(k);
            if b.is_substation() {
                return s;
            }
            for d in &b.devices {
                add_point(rng, d, &mut s);
            }
            s
        })
        .collect()
}

fn add_point<R: Rng + ?Sized>(rng: &mut R, d: &DeviceRegion, s: &mut CVec) {
    match d {
        DeviceRegion::Load { p, q } => {
            for (k, (p, q)) in p.iter().zip(q).enumerate() {
                s[k] -= Complex64::new(*p, *q);
            }
        }
        DeviceRegion::Capacitor { q_max } => {
            for (k, q) in q_max.iter().enumerate() {
                s[k] += Complex64::new(0.0, q * rng.gen_range(0.0..=1.0));
            }
        }
        DeviceRegion::PvInverter { p, s_max } => {
            for (k, (p, sm)) in p.iter().zip(s_max).enumerate() {
                let qm = (sm * sm - p * p).max(0.0).sqrt();
                s[k] += Complex64::new(*p, qm * rng.gen_range(-1.0..=1.0));
            }
        }
        DeviceRegion::Composite { parts } => {
            for part in parts {
                add_point(rng, part, s);
            }
        }
    }
}
