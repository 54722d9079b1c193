//! JSON network and injection files.
//!
//! Unless `per_unit` is set, line impedances are in ohms and device powers in
//! VA per phase; they are divided by `z_base = V^2 / S` and `S` on load.
//! Voltage bounds and `vref` are always per unit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    errors_only, validate_network, Bus, CMat, CVec, DeviceRegion, Line, Network, PhaseSet,
};
use crate::error::{Error, Result};

type Pair = [f64; 2];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    base_power_va: f64,
    base_voltage_v: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    per_unit: bool,
    buses: Vec<BusDoc>,
    lines: Vec<LineDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusDoc {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    phases: String,
    vmin: Vec<f64>,
    vmax: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vref: Option<Vec<Pair>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    devices: Vec<DeviceDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineDoc {
    from: usize,
    to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    phases: String,
    z: Vec<Vec<Pair>>,
    /// voltage base for this line's impedance (e.g. a transformer secondary)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_voltage_v: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum DeviceDoc {
    Capacitor { qmax: Vec<f64> },
    Pv { p: Vec<f64>, smax: Vec<f64> },
    Load { p: Vec<f64>, q: Vec<f64> },
    Composite { parts: Vec<DeviceDoc> },
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn cplx(p: &Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn pair(c: &Complex64) -> Pair {
    [c.re, c.im]
}

impl DeviceDoc {
    fn into_region(self, scale: f64) -> DeviceRegion {
        let sc = |v: Vec<f64>| v.into_iter().map(|x| x * scale).collect();
        match self {
            DeviceDoc::Capacitor { qmax } => DeviceRegion::Capacitor { q_max: sc(qmax) },
            DeviceDoc::Pv { p, smax } => DeviceRegion::PvInverter {
                p: sc(p),
                s_max: sc(smax),
            },
            DeviceDoc::Load { p, q } => DeviceRegion::Load { p: sc(p), q: sc(q) },
            DeviceDoc::Composite { parts } => DeviceRegion::Composite {
                parts: parts.into_iter().map(|d| d.into_region(scale)).collect(),
            },
        }
    }

    fn from_region(r: &DeviceRegion) -> DeviceDoc {
        match r {
            DeviceRegion::Capacitor { q_max } => DeviceDoc::Capacitor {
                qmax: q_max.clone(),
            },
            DeviceRegion::PvInverter { p, s_max } => DeviceDoc::Pv {
                p: p.clone(),
                smax: s_max.clone(),
            },
            DeviceRegion::Load { p, q } => DeviceDoc::Load {
                p: p.clone(),
                q: q.clone(),
            },
            DeviceRegion::Composite { parts } => DeviceDoc::Composite {
                parts: parts.iter().map(DeviceDoc::from_region).collect(),
            },
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Schema(format!("{name} must be positive, got {v}")))
    }
}

fn build(doc: NetworkDoc) -> Result<Network> {
    let s_base = positive("base_power_va", doc.base_power_va)?;
    let v_base = positive("base_voltage_v", doc.base_voltage_v)?;
    let p_scale = if doc.per_unit { 1.0 } else { 1.0 / s_base };
    let mut buses = Vec::with_capacity(doc.buses.len());
    let mut docs = doc.buses;
    docs.sort_by_key(|b| b.id);
    for b in docs {
        let phases: PhaseSet = b.phases.parse()?;
        let v_ref = b
            .vref
            .map(|v| CVec::from_iterator(v.len(), v.iter().map(cplx)));
        buses.push(Bus {
            id: b.id,
            name: b.name,
            phases,
            v_min: b.vmin,
            v_max: b.vmax,
            devices: b
                .devices
                .into_iter()
                .map(|d| d.into_region(p_scale))
                .collect(),
            v_ref,
        });
    }
    let mut lines = Vec::with_capacity(doc.lines.len());
    for (k, l) in doc.lines.into_iter().enumerate() {
        let phases: PhaseSet = l.phases.parse()?;
        let n = l.z.len();
        if l.z.iter().any(|r| r.len() != n) {
            return Err(Error::Schema(format!("line {k}: z must be square")));
        }
        let z_scale = if doc.per_unit {
            1.0
        } else {
            let v = match l.base_voltage_v {
                Some(v) => positive("line base_voltage_v", v)?,
                None => v_base,
            };
            s_base / (v * v)
        };
        let z = CMat::from_fn(n, n, |i, j| cplx(&l.z[i][j]) * z_scale);
        lines.push(Line {
            from: l.from,
            to: l.to,
            name: l.name,
            phases,
            z,
        });
    }
    Network::new(buses, lines, s_base, v_base)
}

/// Parses and per-unit normalizes a network document without checking the
/// modeling assumptions (structure is still checked).
pub fn parse_network_unchecked(text: &str) -> Result<Network> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    build(doc)
}

/// Parses, normalizes and validates a network document. Warnings are logged.
pub fn parse_network(text: &str) -> Result<Network> {
    let net = parse_network_unchecked(text)?;
    let v = validate_network(&net);
    let errs = errors_only(&v);
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    for w in &v {
        log::warn!("{w}");
    }
    Ok(net)
}

/// Canonical per-unit document; `parse_network` inverts it bit for bit.
pub fn serialize_network(net: &Network) -> String {
    let buses = net
        .buses
        .iter()
        .map(|b| BusDoc {
            id: b.id,
            name: b.name.clone(),
            phases: b.phases.to_string(),
            vmin: b.v_min.clone(),
            vmax: b.v_max.clone(),
            vref: b.v_ref.as_ref().map(|v| v.iter().map(pair).collect()),
            devices: b.devices.iter().map(DeviceDoc::from_region).collect(),
        })
        .collect();
    let lines = net
        .lines
        .iter()
        .map(|l| LineDoc {
            from: l.from,
            to: l.to,
            name: l.name.clone(),
            phases: l.phases.to_string(),
            z: l.z
                .row_iter()
                .map(|r| r.iter().map(pair).collect())
                .collect(),
            base_voltage_v: None,
        })
        .collect();
    let doc = NetworkDoc {
        base_power_va: net.base_power,
        base_voltage_v: net.base_voltage,
        per_unit: true,
        buses,
        lines,
    };
    serde_json::to_string_pretty(&doc).expect("network document serializes")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InjectionDoc {
    injections: Vec<InjectionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InjectionEntry {
    bus: usize,
    s: Vec<Pair>,
}

/// Reads per-bus injections (p.u.). Buses that are not listed inject zero;
/// an entry for the substation is rejected since its injection is an output.
pub fn parse_injections(net: &Network, text: &str) -> Result<Vec<CVec>> {
    let doc: InjectionDoc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let mut out: Vec<CVec> = net
        .buses
        .iter()
        .map(|b| CVec::zeros(b.phases.len()))
        .collect();
    let mut seen = vec![false; out.len()];
    for e in doc.injections {
        if e.bus >= out.len() {
            return Err(Error::UnknownBus(e.bus));
        }
        if e.bus == 0 {
            return Err(Error::Schema(
                "injection file must not set the substation".into(),
            ));
        }
        if std::mem::replace(&mut seen[e.bus], true) {
            return Err(Error::Schema(format!("bus {} listed twice", e.bus)));
        }
        let k = net.buses[e.bus].phases.len();
        if e.s.len() != k {
            return Err(Error::PhaseMismatch(format!(
                "bus {}: {} values for {} phases",
                e.bus,
                e.s.len(),
                k
            )));
        }
        out[e.bus] = CVec::from_iterator(k, e.s.iter().map(cplx));
    }
    Ok(out)
}

pub fn serialize_injections(s: &[CVec]) -> String {
    let injections = s
        .iter()
        .enumerate()
        .skip(1)
        .map(|(bus, v)| InjectionEntry {
            bus,
            s: v.iter().map(pair).collect(),
        })
        .collect();
    serde_json::to_string_pretty(&InjectionDoc { injections }).expect("injections serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Phase, Severity};

    const ONE_BUS: &str = r#"{
        "base_power_va": 1e6, "base_voltage_v": 2400, "per_unit": true,
        "buses": [{"id": 0, "phases": "abc", "vmin": [1,1,1], "vmax": [1,1,1],
                   "vref": [[1,0],[-0.5,-0.8660254037844386],[-0.5,0.8660254037844386]]}],
        "lines": []
    }"#;

    const TWO_BUS: &str = r#"{
        "base_power_va": 1, "base_voltage_v": 1, "per_unit": true,
        "buses": [{"id": 0, "phases": "a", "vmin": [1], "vmax": [1], "vref": [[1,0]]},
                  {"id": 1, "phases": "a", "vmin": [0.9], "vmax": [1.1],
                   "devices": [{"type": "pv", "p": [0.3], "smax": [0.5]}]}],
        "lines": [{"from": 0, "to": 1, "phases": "a", "z": [[[0.01, 0.02]]]}]
    }"#;

    #[test]
    fn one_bus_feeder() {
        let net = parse_network(ONE_BUS).unwrap();
        assert_eq!(net.num_buses(), 1);
        assert!(net.lines.is_empty());
        assert_eq!(net.v_ref().len(), 3);
    }

    #[test]
    fn two_bus_pass_through() {
        let net = parse_network(TWO_BUS).unwrap();
        assert_eq!(net.lines.len(), 1);
        assert_eq!(net.lines[0].z[(0, 0)], Complex64::new(0.01, 0.02));
        assert_eq!(net.buses[1].phases, PhaseSet::single(Phase::A));
    }

    #[test]
    fn ohms_are_normalized() {
        let doc = TWO_BUS
            .replace("\"per_unit\": true,", "")
            .replace("\"base_power_va\": 1", "\"base_power_va\": 1000000")
            .replace("\"base_voltage_v\": 1,", "\"base_voltage_v\": 2000,");
        let net = parse_network(&doc).unwrap();
        // z_base = 4e6 / 1e6 = 4 ohm
        assert!((net.lines[0].z[(0, 0)] - Complex64::new(0.0025, 0.005)).norm() < 1e-18);
        match &net.buses[1].devices[0] {
            DeviceRegion::PvInverter { p, .. } => assert_eq!(p[0], 3e-7),
            d => panic!("unexpected {d:?}"),
        }
    }

    #[test]
    fn cycle_is_rejected() {
        let doc = r#"{
            "base_power_va": 1, "base_voltage_v": 1, "per_unit": true,
            "buses": [{"id": 0, "phases": "a", "vmin": [1], "vmax": [1], "vref": [[1,0]]},
                      {"id": 1, "phases": "a", "vmin": [0.9], "vmax": [1.1]},
                      {"id": 2, "phases": "a", "vmin": [0.9], "vmax": [1.1]}],
            "lines": [{"from": 0, "to": 1, "phases": "a", "z": [[[0.01, 0.02]]]},
                      {"from": 1, "to": 2, "phases": "a", "z": [[[0.01, 0.02]]]},
                      {"from": 2, "to": 0, "phases": "a", "z": [[[0.01, 0.02]]]}]
        }"#;
        let e = parse_network(doc).unwrap_err();
        assert!(matches!(e, Error::NotRadial(_)));
        assert!(e.to_string().contains("not radial"));
    }

    #[test]
    fn unknown_field_is_a_schema_error() {
        let doc = TWO_BUS.replace(
            "\"phases\": \"a\", \"z\"",
            "\"phases\": \"a\", \"r\": 1, \"z\"",
        );
        assert!(matches!(parse_network(&doc), Err(Error::Schema(_))));
        assert!(matches!(parse_network("{"), Err(Error::Schema(_))));
    }

    #[test]
    fn validation_failure_surfaces() {
        let doc = TWO_BUS.replace("\"vmin\": [0.9]", "\"vmin\": [0]");
        match parse_network(&doc) {
            Err(Error::Validation(v)) => assert_eq!(v[0].assumption, Some(2)),
            other => panic!("unexpected {other:?}"),
        }
        let net = parse_network_unchecked(&doc).unwrap();
        assert_eq!(validate_network(&net)[0].severity, Severity::Error);
    }

    #[test]
    fn serialize_round_trip_is_exact() {
        let doc = TWO_BUS
            .replace("\"per_unit\": true,", "")
            .replace("\"base_voltage_v\": 1,", "\"base_voltage_v\": 3.0,");
        let net = parse_network(&doc).unwrap();
        let text = serialize_network(&net);
        let back = parse_network(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(serialize_network(&back), text);
    }

    #[test]
    fn injections_round_trip() {
        let net = parse_network(TWO_BUS).unwrap();
        let s = parse_injections(
            &net,
            r#"{"injections": [{"bus": 1, "s": [[-0.1, -0.05]]}]}"#,
        )
        .unwrap();
        assert_eq!(s[1][0], Complex64::new(-0.1, -0.05));
        assert_eq!(s[0].len(), 1);
        assert_eq!(
            parse_injections(&net, &serialize_injections(&s)).unwrap(),
            s
        );
        assert!(parse_injections(&net, r#"{"injections": [{"bus": 0, "s": [[1, 0]]}]}"#).is_err());
        assert!(parse_injections(
            &net,
            r#"{"injections": [{"bus": 1, "s": [[1, 0], [0, 0]]}]}"#
        )
        .is_err());
    }
}
