//! CSV tables written by the commands, with a fixed header and 12
//! significant digits per float.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{CliError, Result};

pub trait Table: Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
}

pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        // keep the sign of -0.0 out of the files
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    format!("{x:.11e}")
}

fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&sig12(*x))
}

fn ser_opt<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_str(&sig12(*v)),
        None => s.serialize_str(""),
    }
}

/// Bus voltage in polar form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageRow {
    pub bus: usize,
    pub name: String,
    pub phase: char,
    #[serde(serialize_with = "ser_f64")]
    pub vmag: f64,
    #[serde(serialize_with = "ser_f64")]
    pub vang_deg: f64,
}

impl Table for VoltageRow {
    const HEADER: &'static [&'static str] = &["bus", "name", "phase", "vmag", "vang_deg"];
}

/// Voltage magnitude only (the linear model carries no angles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeRow {
    pub bus: usize,
    pub name: String,
    pub phase: char,
    #[serde(serialize_with = "ser_f64")]
    pub vmag: f64,
}

impl Table for MagnitudeRow {
    const HEADER: &'static [&'static str] = &["bus", "name", "phase", "vmag"];
}

/// Per-phase sending-end power on a line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub line: usize,
    pub from: usize,
    pub to: usize,
    pub phase: char,
    #[serde(serialize_with = "ser_f64")]
    pub p: f64,
    #[serde(serialize_with = "ser_f64")]
    pub q: f64,
}

impl Table for FlowRow {
    const HEADER: &'static [&'static str] = &["line", "from", "to", "phase", "p", "q"];
}

/// One row of a run summary. `vmin`/`vmax` are empty when the file bounds
/// were used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub key: String,
    pub command: String,
    pub network: String,
    #[serde(serialize_with = "ser_opt")]
    pub vmin: Option<f64>,
    #[serde(serialize_with = "ser_opt")]
    pub vmax: Option<f64>,
    pub model: String,
    pub status: String,
    #[serde(serialize_with = "ser_opt")]
    pub value_kw: Option<f64>,
    #[serde(serialize_with = "ser_f64")]
    pub time_s: f64,
    #[serde(serialize_with = "ser_opt")]
    pub ratio: Option<f64>,
    #[serde(serialize_with = "ser_opt")]
    pub fbs_time_s: Option<f64>,
    #[serde(serialize_with = "ser_opt")]
    pub lpf_time_s: Option<f64>,
    #[serde(serialize_with = "ser_opt")]
    pub v_error_pu: Option<f64>,
    #[serde(serialize_with = "ser_opt")]
    pub s_error_pct: Option<f64>,
}

impl Table for RunRecord {
    const HEADER: &'static [&'static str] = &[
        "key",
        "command",
        "network",
        "vmin",
        "vmax",
        "model",
        "status",
        "value_kw",
        "time_s",
        "ratio",
        "fbs_time_s",
        "lpf_time_s",
        "v_error_pu",
        "s_error_pct",
    ];
}

impl RunRecord {
    pub fn new(command: &str, network: &str) -> Self {
        RunRecord {
            key: String::new(),
            command: command.into(),
            network: network.into(),
            vmin: None,
            vmax: None,
            model: String::new(),
            status: String::new(),
            value_kw: None,
            time_s: 0.0,
            ratio: None,
            fbs_time_s: None,
            lpf_time_s: None,
            v_error_pu: None,
            s_error_pct: None,
        }
    }
}

/// p.u. loss to kW given the per-phase base power in VA.
pub fn to_kw(pu: f64, base_power_va: f64) -> f64 {
    pu * base_power_va / 1000.0
}

pub fn write_table<T: Table, W: Write>(out: W, rows: &[T]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(T::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_file<T: Table>(path: &Path, rows: &[T]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_table(std::io::BufWriter::new(f), rows).map_err(|source| CliError::Csv {
        path: path.into(),
        source,
    })
}

pub fn read_table<T: Table, R: std::io::Read>(input: R) -> std::result::Result<Vec<T>, String> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    if !header.iter().eq(T::HEADER.iter().copied()) {
        return Err(format!(
            "unexpected header {:?}, expected {:?}",
            header.iter().collect::<Vec<_>>(),
            T::HEADER
        ));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| e.to_string()))
        .collect()
}

pub fn read_file<T: Table>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_table(f).map_err(|msg| CliError::Table {
        path: path.into(),
        msg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(1.0), "1.00000000000e0");
        assert_eq!(sig12(-0.000123456789012345), "-1.23456789012e-4");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(-0.0), "0");
        let x = 2.0f64.sqrt();
        let back: f64 = sig12(x).parse().unwrap();
        assert!((back - x).abs() <= 1e-11 * x);
    }

    #[test]
    fn empty_table_keeps_header() {
        let mut buf = Vec::new();
        write_table::<FlowRow, _>(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "line,from,to,phase,p,q\n"
        );
        assert!(read_table::<FlowRow, _>(&buf[..]).unwrap().is_empty());
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = "bus,name,phase,vmag\n1,x,a,1.0\n";
        assert!(read_table::<VoltageRow, _>(text.as_bytes()).is_err());
        assert_eq!(
            read_table::<MagnitudeRow, _>(text.as_bytes()).unwrap()[0].vmag,
            1.0
        );
    }

    #[test]
    fn run_record_round_trips_with_missing_fields() {
        let mut r = RunRecord::new("opf", "feeder.json");
        r.key = "k".into();
        r.vmin = Some(0.9);
        r.vmax = Some(1.1);
        r.value_kw = Some(152.7);
        r.status = "optimal".into();
        let mut buf = Vec::new();
        write_table(&mut buf, &[r.clone()]).unwrap();
        let back: Vec<RunRecord> = read_table(&buf[..]).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn kilowatt_conversion() {
        assert_eq!(to_kw(0.125, 1e6), 125.0);
        assert_eq!(to_kw(1.0, 1000.0), 1.0);
    }
}
