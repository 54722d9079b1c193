//! Radial multiphase network model: buses, lines, devices, tree queries and
//! phase projection.

mod phase;
mod schema;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use phase::{
    diag, embed_mat, embed_vec, project_mat, project_vec, CMat, CVec, HermitianBlock, Phase,
    PhaseBlock, PhaseSet, PhaseVec, Unit,
};
pub use schema::{
    parse_injections, parse_network, parse_network_unchecked, serialize_injections,
    serialize_network,
};

/// Injection set of a device, in p.u. per phase of the owning bus.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviceRegion {
    /// Re(s) = 0, 0 <= Im(s) <= q_max
    Capacitor { q_max: Vec<f64> },
    /// Re(s) = p, |s| <= s_max
    PvInverter { p: Vec<f64>, s_max: Vec<f64> },
    /// Fixed consumption: s = -(p + j q)
    Load { p: Vec<f64>, q: Vec<f64> },
    /// Minkowski sum of the parts
    Composite { parts: Vec<DeviceRegion> },
}

impl DeviceRegion {
    pub fn kind(&self) -> &'static str {
        match self {
            DeviceRegion::Capacitor { .. } => "capacitor",
            DeviceRegion::PvInverter { .. } => "pv",
            DeviceRegion::Load { .. } => "load",
            DeviceRegion::Composite { .. } => "composite",
        }
    }

    /// A representative point of the set: loads at their value, capacitors
    /// fully switched in, PV at (p, 0).
    pub fn nominal(&self, k: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); k];
        match self {
            DeviceRegion::Capacitor { q_max } => {
                for (o, q) in out.iter_mut().zip(q_max) {
                    *o = Complex64::new(0.0, *q);
                }
            }
            DeviceRegion::PvInverter { p, .. } => {
                for (o, p) in out.iter_mut().zip(p) {
                    *o = Complex64::new(*p, 0.0);
                }
            }
            DeviceRegion::Load { p, q } => {
                for (o, (p, q)) in out.iter_mut().zip(p.iter().zip(q)) {
                    *o = Complex64::new(-p, -q);
                }
            }
            DeviceRegion::Composite { parts } => {
                for part in parts {
                    for (o, v) in out.iter_mut().zip(part.nominal(k)) {
                        *o += v;
                    }
                }
            }
        }
        out
    }

    fn check(&self, k: usize, who: &str, out: &mut Vec<Violation>) {
        let bad_len = |name: &str, v: &[f64], out: &mut Vec<Violation>| {
            if v.len() != k {
                out.push(Violation::error(
                    who,
                    None,
                    format!(
                        "{} {name} has {} entries for {k} phases",
                        self.kind(),
                        v.len()
                    ),
                ));
                true
            } else {
                false
            }
        };
        match self {
            DeviceRegion::Capacitor { q_max } => {
                if !bad_len("qmax", q_max, out) && q_max.iter().any(|q| !(*q >= 0.0)) {
                    out.push(Violation::error(
                        who,
                        None,
                        "capacitor qmax must be >= 0".into(),
                    ));
                }
            }
            DeviceRegion::PvInverter { p, s_max } => {
                let bp = bad_len("p", p, out);
                let bs = bad_len("smax", s_max, out);
                if !bs && s_max.iter().any(|s| !(*s >= 0.0)) {
                    out.push(Violation::error(who, None, "pv smax must be >= 0".into()));
                }
                if !bp && !bs && p.iter().zip(s_max).any(|(p, s)| s < &p.abs()) {
                    out.push(Violation::warning(
                        who,
                        "pv smax < |p|: injection set is empty".into(),
                    ));
                }
            }
            DeviceRegion::Load { p, q } => {
                bad_len("p", p, out);
                bad_len("q", q, out);
            }
            DeviceRegion::Composite { parts } => {
                if parts.is_empty() {
                    out.push(Violation::error(
                        who,
                        None,
                        "composite device has no parts".into(),
                    ));
                }
                for part in parts {
                    part.check(k, who, out);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub name: Option<String>,
    pub phases: PhaseSet,
    pub v_min: Vec<f64>,
    pub v_max: Vec<f64>,
    pub devices: Vec<DeviceRegion>,
    /// Substation reference voltage (bus 0 only).
    pub v_ref: Option<CVec>,
}

impl Bus {
    pub fn is_substation(&self) -> bool {
        self.id == 0
    }

    /// Devices attached to this bus viewed as one region (None if no devices).
    pub fn region(&self) -> Option<DeviceRegion> {
        match self.devices.len() {
            0 => None,
            1 => Some(self.devices[0].clone()),
            _ => Some(DeviceRegion::Composite {
                parts: self.devices.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub name: Option<String>,
    pub phases: PhaseSet,
    /// Phase impedance matrix, p.u.
    pub z: CMat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A broken modeling assumption, naming the entity involved.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub entity: String,
    pub assumption: Option<u8>,
    pub severity: Severity,
    pub message: String,
}

impl Violation {
    fn error(entity: &str, assumption: Option<u8>, message: String) -> Self {
        Violation {
            entity: entity.to_string(),
            assumption,
            severity: Severity::Error,
            message,
        }
    }

    fn warning(entity: &str, message: String) -> Self {
        Violation {
            entity: entity.to_string(),
            assumption: None,
            severity: Severity::Warning,
            message,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}: {}", self.entity, self.message)?;
        if let Some(a) = self.assumption {
            let what = match a {
                1 => "network is connected and radial",
                2 => "voltage lower bounds are strictly positive",
                _ => "bus and line phases satisfy Phi_i contains Phi_ij = Phi_j",
            };
            write!(f, " (assumption {a}: {what})")?;
        }
        Ok(())
    }
}

/// Rooted-tree structure derived from the line list.
#[derive(Debug, Clone, PartialEq)]
struct Topology {
    parent_line: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    /// VA per phase
    pub base_power: f64,
    /// line-to-neutral volts
    pub base_voltage: f64,
    topo: Topology,
}

impl Network {
    /// Builds the network and orients every line away from bus 0 with a
    /// breadth-first traversal that visits children in ascending id order.
    /// Fails only on structural problems; modeling assumptions are checked
    /// by [`validate_network`].
    pub fn new(
        buses: Vec<Bus>,
        mut lines: Vec<Line>,
        base_power: f64,
        base_voltage: f64,
    ) -> Result<Network> {
        let n = buses.len();
        if n == 0 {
            return Err(Error::Schema("network has no buses".into()));
        }
        for (k, b) in buses.iter().enumerate() {
            if b.id != k {
                return Err(Error::Schema(format!(
                    "bus ids must be 0..{n} in order; found {} at position {k}",
                    b.id
                )));
            }
        }
        for l in &lines {
            if l.from >= n || l.to >= n {
                return Err(Error::UnknownBus(l.from.max(l.to)));
            }
            if l.from == l.to {
                return Err(Error::NotRadial(format!(
                    "line ({}, {}) is a self loop",
                    l.from, l.to
                )));
            }
        }
        if lines.len() != n - 1 {
            return Err(Error::NotRadial(format!(
                "{} lines for {} buses (a tree needs {})",
                lines.len(),
                n,
                n - 1
            )));
        }
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, l) in lines.iter().enumerate() {
            adj[l.from].push((l.to, k));
            adj[l.to].push((l.from, k));
        }
        for a in &mut adj {
            a.sort();
        }
        let mut parent_line = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &(j, k) in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    parent_line[j] = Some(k);
                    if lines[k].from != i {
                        let l = &mut lines[k];
                        std::mem::swap(&mut l.from, &mut l.to);
                    }
                    queue.push_back(j);
                }
            }
        }
        if order.len() != n {
            let missing = (0..n).find(|&i| !seen[i]).unwrap();
            return Err(Error::NotRadial(format!(
                "bus {missing} is not connected to bus 0"
            )));
        }
        let mut children = vec![Vec::new(); n];
        for &j in &order[1..] {
            let k = parent_line[j].unwrap();
            children[lines[k].from].push(k);
        }
        Ok(Network {
            buses,
            lines,
            base_power,
            base_voltage,
            topo: Topology {
                parent_line,
                children,
                order,
            },
        })
    }

    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    /// Line feeding bus j (None for the substation).
    pub fn parent_line(&self, j: usize) -> Option<usize> {
        self.topo.parent_line[j]
    }

    /// Lines leaving bus i, ordered by child id.
    pub fn child_lines(&self, i: usize) -> &[usize] {
        &self.topo.children[i]
    }

    /// Buses in breadth-first order from bus 0.
    pub fn bfs_order(&self) -> &[usize] {
        &self.topo.order
    }

    pub fn phases(&self, i: usize) -> PhaseSet {
        self.buses[i].phases
    }

    pub fn v_ref(&self) -> &CVec {
        self.buses[0]
            .v_ref
            .as_ref()
            .expect("substation carries v_ref")
    }

    /// v0 = v_ref v_ref^H
    pub fn v0(&self) -> CMat {
        let v = self.v_ref();
        v * v.adjoint()
    }

    /// Admittance y = z^-1 of a line.
    pub fn admittance(&self, k: usize) -> Option<CMat> {
        self.lines[k].z.clone().try_inverse()
    }

    /// Copy with every branch bus's bounds replaced by [1 - band, 1 + band].
    pub fn with_voltage_band(&self, band: f64) -> Network {
        let mut net = self.clone();
        for b in net.buses.iter_mut().skip(1) {
            let k = b.phases.len();
            b.v_min = vec![1.0 - band; k];
            b.v_max = vec![1.0 + band; k];
        }
        net
    }

    /// Nominal injections (bus 0 entry is zero).
    pub fn nominal_injections(&self) -> Vec<CVec> {
        self.buses
            .iter()
            .map(|b| {
                let k = b.phases.len();
                match (b.is_substation(), b.region()) {
                    (false, Some(r)) => CVec::from_vec(r.nominal(k)),
                    _ => CVec::zeros(k),
                }
            })
            .collect()
    }
}

/// Lines of the path from bus 0 to bus j, ordered outward.
pub fn path_to_root(net: &Network, j: usize) -> Result<Vec<usize>> {
    if j >= net.num_buses() {
        return Err(Error::UnknownBus(j));
    }
    let mut path = Vec::new();
    let mut cur = j;
    while let Some(k) = net.parent_line(cur) {
        path.push(k);
        cur = net.lines[k].from;
    }
    path.reverse();
    Ok(path)
}

/// Bus j together with all of its descendants.
pub fn downstream_set(net: &Network, j: usize) -> Result<BTreeSet<usize>> {
    if j >= net.num_buses() {
        return Err(Error::UnknownBus(j));
    }
    let mut out = BTreeSet::new();
    let mut stack = vec![j];
    while let Some(i) = stack.pop() {
        out.insert(i);
        for &k in net.child_lines(i) {
            stack.push(net.lines[k].to);
        }
    }
    Ok(out)
}

pub fn phase_project(block: &PhaseBlock, target: PhaseSet) -> Result<PhaseBlock> {
    block.project(target)
}

pub fn phase_embed(block: &PhaseBlock, target: PhaseSet) -> Result<PhaseBlock> {
    block.embed(target)
}

/// Checks the modeling assumptions; an empty list means the network is valid.
pub fn validate_network(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    for b in &net.buses {
        let who = match &b.name {
            Some(nm) => format!("bus {} ({nm})", b.id),
            None => format!("bus {}", b.id),
        };
        let k = b.phases.len();
        if b.v_min.len() != k || b.v_max.len() != k {
            out.push(Violation::error(
                &who,
                None,
                format!("vmin/vmax need {k} entries for phases {}", b.phases),
            ));
            continue;
        }
        if b.is_substation() {
            match &b.v_ref {
                None => out.push(Violation::error(&who, None, "substation needs vref".into())),
                Some(v) if v.len() != k => out.push(Violation::error(
                    &who,
                    None,
                    format!("vref has {} entries for phases {}", v.len(), b.phases),
                )),
                Some(v) if v.iter().any(|x| x.norm() == 0.0) => out.push(Violation::error(
                    &who,
                    None,
                    "vref entries must be nonzero".into(),
                )),
                _ => {}
            }
            if !b.devices.is_empty() {
                out.push(Violation::error(
                    &who,
                    None,
                    "devices are not allowed at the substation (its injection is free)".into(),
                ));
            }
        } else {
            if b.v_ref.is_some() {
                out.push(Violation::error(
                    &who,
                    None,
                    "only the substation may carry vref".into(),
                ));
            }
            if b.v_min.iter().any(|v| !(*v > 0.0)) {
                out.push(Violation::error(&who, Some(2), "vmin must be > 0".into()));
            }
        }
        if b.v_min.iter().zip(&b.v_max).any(|(lo, hi)| lo > hi) {
            out.push(Violation::error(&who, None, "vmin exceeds vmax".into()));
        }
        for d in &b.devices {
            d.check(k, &who, &mut out);
        }
    }
    for (idx, l) in net.lines.iter().enumerate() {
        let who = match &l.name {
            Some(nm) => format!("line {idx} ({}->{}, {nm})", l.from, l.to),
            None => format!("line {idx} ({}->{})", l.from, l.to),
        };
        let pi = net.buses[l.from].phases;
        let pj = net.buses[l.to].phases;
        if !l.phases.is_subset(pi) || l.phases != pj {
            out.push(Violation::error(
                &who,
                Some(3),
                format!(
                    "line phases {} vs upstream bus {} and downstream bus {}",
                    l.phases, pi, pj
                ),
            ));
        }
        let k = l.phases.len();
        if l.z.nrows() != k || l.z.ncols() != k {
            out.push(Violation::error(
                &who,
                None,
                format!(
                    "z is {}x{} for phases {}",
                    l.z.nrows(),
                    l.z.ncols(),
                    l.phases
                ),
            ));
        } else if !z_full_rank(&l.z) {
            out.push(Violation::error(
                &who,
                None,
                "impedance matrix is singular".into(),
            ));
        }
    }
    out
}

fn z_full_rank(z: &CMat) -> bool {
    let svd = z.clone().svd(false, false);
    let s = &svd.singular_values;
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > 1e-12 * max
}

/// Only the blocking violations.
pub fn errors_only(v: &[Violation]) -> Vec<Violation> {
    v.iter()
        .filter(|x| x.severity == Severity::Error)
        .cloned()
        .collect()
}
