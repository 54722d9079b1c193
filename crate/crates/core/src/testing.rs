//! Small hand-built feeders shared by unit tests.

use num_complex::Complex64;

use crate::netmodel::{Bus, CMat, CVec, Line, Network, PhaseSet};

pub fn bus(id: usize, phases: PhaseSet) -> Bus {
    let k = phases.len();
    let v_ref = (id == 0).then(|| {
        let a = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI / 3.0);
        let all = [Complex64::new(1.0, 0.0), a, a * a];
        CVec::from_iterator(k, phases.iter().map(|p| all[p as usize]))
    });
    let (lo, hi) = if id == 0 { (1.0, 1.0) } else { (0.9, 1.1) };
    Bus {
        id,
        name: None,
        phases,
        v_min: vec![lo; k],
        v_max: vec![hi; k],
        devices: Vec::new(),
        v_ref,
    }
}

pub fn line(from: usize, to: usize, phases: PhaseSet) -> Line {
    let k = phases.len();
    let z = CMat::from_fn(k, k, |i, j| {
        if i == j {
            Complex64::new(0.01, 0.02)
        } else {
            Complex64::new(0.003, 0.006)
        }
    });
    Line {
        from,
        to,
        name: None,
        phases,
        z,
    }
}

fn single() -> PhaseSet {
    "a".parse().unwrap()
}

/// Single-phase chain 0 -> 1 -> ... -> n-1.
pub fn chain(n: usize) -> Network {
    let buses = (0..n).map(|i| bus(i, single())).collect();
    let lines = (1..n).map(|j| line(j - 1, j, single())).collect();
    Network::new(buses, lines, 1.0, 1.0).unwrap()
}

/// Single-phase star 0 -> {1..=n}.
pub fn star(n: usize) -> Network {
    let buses = (0..=n).map(|i| bus(i, single())).collect();
    let lines = (1..=n).map(|j| line(0, j, single())).collect();
    Network::new(buses, lines, 1.0, 1.0).unwrap()
}
