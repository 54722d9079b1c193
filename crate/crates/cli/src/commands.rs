use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mpopf_conic::{Settings, Status};
use mpopf_core::lpf::{lpf_solve, LpfSolution};
use mpopf_core::netmodel::{
    parse_injections, parse_network, parse_network_unchecked, serialize_injections,
    validate_network, CVec, Network,
};
use mpopf_core::powerflow::{fbs_solve, max_bim_residual, BranchFlowState};
use mpopf_core::relax::{solve_opf, Model, OpfOptions};
use mpopf_core::synth::{feeder_from_seed, SynthConfig};
use num_complex::Complex64;

use crate::error::{status_code, CliError, Result};
use crate::table::{read_file, to_kw, write_file, FlowRow, MagnitudeRow, RunRecord, VoltageRow};

/// Relative flow errors are taken against at least this many p.u.
pub const FLOW_FLOOR: f64 = 1e-6;

/// Where the network comes from: a file, or a synthetic feeder for `--seed`.
#[derive(Debug, Clone)]
pub enum NetSource {
    File(PathBuf),
    Seed(u64),
}

impl NetSource {
    pub fn resolve(path: Option<PathBuf>, seed: Option<u64>) -> Result<NetSource> {
        match (path, seed) {
            (Some(p), _) => Ok(NetSource::File(p)),
            (None, Some(s)) => Ok(NetSource::Seed(s)),
            (None, None) => Err(CliError::Usage(
                "a network file or --seed is required".into(),
            )),
        }
    }

    pub fn label(&self) -> String {
        match self {
            NetSource::File(p) => p.display().to_string(),
            NetSource::Seed(s) => format!("seed:{s}"),
        }
    }

    pub fn load(&self) -> Result<Network> {
        match self {
            NetSource::File(p) => Ok(parse_network(&read_text(p)?)?),
            NetSource::Seed(s) => Ok(feeder_from_seed(*s, &SynthConfig::default())),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Injections from a file, or the network's nominal profile.
pub fn load_injections(net: &Network, path: Option<&Path>) -> Result<Vec<CVec>> {
    match path {
        Some(p) => Ok(parse_injections(net, &read_text(p)?)?),
        None => Ok(net.nominal_injections()),
    }
}

pub fn solver_settings(gap: Option<f64>, feas: Option<f64>) -> Settings {
    let mut s = Settings::default();
    if let Some(g) = gap {
        s.gap_tol = g;
    }
    if let Some(f) = feas {
        s.feas_tol = f;
    }
    s
}

/// What a command produced: a summary row, its exit code and a few lines
/// for the terminal.
#[derive(Debug, Clone)]
pub struct Report {
    pub record: RunRecord,
    pub code: u8,
    pub notes: Vec<String>,
}

fn bus_name(net: &Network, j: usize) -> String {
    net.buses[j].name.clone().unwrap_or_default()
}

pub fn voltage_rows(net: &Network, v: &[CVec]) -> Vec<VoltageRow> {
    let mut rows = Vec::new();
    for (j, vj) in v.iter().enumerate() {
        for (ph, x) in net.phases(j).iter().zip(vj.iter()) {
            rows.push(VoltageRow {
                bus: j,
                name: bus_name(net, j),
                phase: ph.letter(),
                vmag: x.norm(),
                vang_deg: x.arg().to_degrees(),
            });
        }
    }
    rows
}

fn flow_rows(net: &Network, diag: impl Fn(usize) -> Vec<Complex64>) -> Vec<FlowRow> {
    let mut rows = Vec::new();
    for (k, ln) in net.lines.iter().enumerate() {
        for (ph, s) in ln.phases.iter().zip(diag(k)) {
            rows.push(FlowRow {
                line: k,
                from: ln.from,
                to: ln.to,
                phase: ph.letter(),
                p: s.re,
                q: s.im,
            });
        }
    }
    rows
}

pub fn pf_tables(net: &Network, st: &BranchFlowState) -> (Vec<VoltageRow>, Vec<FlowRow>) {
    (
        voltage_rows(net, &st.v),
        flow_rows(net, |k| st.flow[k].diagonal().iter().copied().collect()),
    )
}

pub fn lpf_tables(net: &Network, sol: &LpfSolution) -> (Vec<MagnitudeRow>, Vec<FlowRow>) {
    let mut mags = Vec::new();
    for (j, m) in sol.magnitudes().into_iter().enumerate() {
        for (ph, x) in net.phases(j).iter().zip(m) {
            mags.push(MagnitudeRow {
                bus: j,
                name: bus_name(net, j),
                phase: ph.letter(),
                vmag: x,
            });
        }
    }
    (
        mags,
        flow_rows(net, |k| sol.lambda[k].iter().copied().collect()),
    )
}

/// Worst voltage magnitude error (p.u.) and worst relative per-phase flow
/// error (%) between LPF and power flow tables.
pub fn table_errors(
    pf_v: &[VoltageRow],
    pf_f: &[FlowRow],
    lpf_v: &[MagnitudeRow],
    lpf_f: &[FlowRow],
) -> std::result::Result<(f64, f64), String> {
    let exact_v: HashMap<(usize, char), f64> =
        pf_v.iter().map(|r| ((r.bus, r.phase), r.vmag)).collect();
    let exact_f: HashMap<(usize, char), Complex64> = pf_f
        .iter()
        .map(|r| ((r.line, r.phase), Complex64::new(r.p, r.q)))
        .collect();
    if exact_v.len() != lpf_v.len() || exact_f.len() != lpf_f.len() {
        return Err("tables cover different buses or lines".into());
    }
    let mut verr = 0.0f64;
    for r in lpf_v {
        let x = exact_v
            .get(&(r.bus, r.phase))
            .ok_or(format!("bus {} phase {} missing", r.bus, r.phase))?;
        verr = verr.max((r.vmag - x).abs());
    }
    let mut ferr = 0.0f64;
    for r in lpf_f {
        let s = exact_f
            .get(&(r.line, r.phase))
            .ok_or(format!("line {} phase {} missing", r.line, r.phase))?;
        ferr = ferr.max((Complex64::new(r.p, r.q) - s).norm() / s.norm().max(FLOW_FLOOR));
    }
    Ok((verr, 100.0 * ferr))
}

pub fn cmd_pf(src: &NetSource, injections: Option<&Path>, out: &Path) -> Result<Report> {
    let net = src.load()?;
    let s = load_injections(&net, injections)?;
    let t = Instant::now();
    let st = fbs_solve(&net, &s)?;
    let elapsed = t.elapsed().as_secs_f64();
    let res = max_bim_residual(&net, &st.v, &st.s)?;
    ensure_dir(out)?;
    let (v, f) = pf_tables(&net, &st);
    write_file(&out.join("pf_buses.csv"), &v)?;
    write_file(&out.join("pf_lines.csv"), &f)?;
    let mut record = RunRecord::new("pf", &src.label());
    record.status = "converged".into();
    record.time_s = elapsed;
    record.fbs_time_s = Some(elapsed);
    Ok(Report {
        record,
        code: 0,
        notes: vec![format!("max BIM residual {res:.3e} p.u.")],
    })
}

pub fn cmd_lpf(src: &NetSource, injections: Option<&Path>, out: &Path) -> Result<Report> {
    let net = src.load()?;
    let s = load_injections(&net, injections)?;
    let t = Instant::now();
    let sol = lpf_solve(&net, &s)?;
    let elapsed = t.elapsed().as_secs_f64();
    ensure_dir(out)?;
    let (v, f) = lpf_tables(&net, &sol);
    write_file(&out.join("lpf_buses.csv"), &v)?;
    write_file(&out.join("lpf_lines.csv"), &f)?;
    let mut record = RunRecord::new("lpf", &src.label());
    record.status = "solved".into();
    record.time_s = elapsed;
    record.lpf_time_s = Some(elapsed);
    Ok(Report {
        record,
        code: 0,
        notes: Vec::new(),
    })
}

pub fn cmd_compare(src: &NetSource, injections: Option<&Path>, out: &Path) -> Result<Report> {
    let net = src.load()?;
    let s = load_injections(&net, injections)?;
    let t = Instant::now();
    let st = fbs_solve(&net, &s)?;
    let fbs_time = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let sol = lpf_solve(&net, &s)?;
    let lpf_time = t.elapsed().as_secs_f64();

    ensure_dir(out)?;
    let paths = [
        "pf_buses.csv",
        "pf_lines.csv",
        "lpf_buses.csv",
        "lpf_lines.csv",
    ]
    .map(|n| out.join(n));
    let (pv, pf) = pf_tables(&net, &st);
    let (lv, lf) = lpf_tables(&net, &sol);
    write_file(&paths[0], &pv)?;
    write_file(&paths[1], &pf)?;
    write_file(&paths[2], &lv)?;
    write_file(&paths[3], &lf)?;
    // errors are taken from the files as written
    let (verr, serr) = table_errors(
        &read_file::<VoltageRow>(&paths[0])?,
        &read_file::<FlowRow>(&paths[1])?,
        &read_file::<MagnitudeRow>(&paths[2])?,
        &read_file::<FlowRow>(&paths[3])?,
    )
    .map_err(|msg| CliError::Table {
        path: out.into(),
        msg,
    })?;

    let mut record = RunRecord::new("compare", &src.label());
    record.status = "converged".into();
    record.time_s = fbs_time + lpf_time;
    record.fbs_time_s = Some(fbs_time);
    record.lpf_time_s = Some(lpf_time);
    record.v_error_pu = Some(verr);
    record.s_error_pct = Some(serr);
    write_file(&out.join("compare_run.csv"), std::slice::from_ref(&record))?;
    Ok(Report {
        record,
        code: 0,
        notes: Vec::new(),
    })
}

#[derive(Debug, Clone)]
pub struct OpfArgs {
    pub model: Model,
    pub vband: Option<f64>,
    pub threshold: f64,
    pub force_recover: bool,
    pub settings: Settings,
}

pub fn cmd_opf(src: &NetSource, args: &OpfArgs, out: &Path) -> Result<Report> {
    let mut net = src.load()?;
    if let Some(b) = args.vband {
        if !(0.0..1.0).contains(&b) {
            return Err(CliError::Usage(format!(
                "--vband must lie in [0, 1), got {b}"
            )));
        }
        net = net.with_voltage_band(b);
    }
    let opts = OpfOptions {
        settings: args.settings.clone(),
        threshold: args.threshold,
        force_recover: args.force_recover,
    };
    let t = Instant::now();
    let r = solve_opf(&net, args.model, &opts)?;
    let elapsed = t.elapsed().as_secs_f64();

    let mut record = RunRecord::new("opf", &src.label());
    if let Some(b) = args.vband {
        record.vmin = Some(1.0 - b);
        record.vmax = Some(1.0 + b);
    }
    record.model = args.model.to_string();
    record.status = r.status.to_string();
    record.time_s = elapsed;
    record.value_kw = r.objective.map(|o| to_kw(o, net.base_power));
    record.ratio = r.exactness.as_ref().map(|e| e.max_ratio);

    let mut notes = Vec::new();
    ensure_dir(out)?;
    if let Some(p) = &r.point {
        write_text(
            &out.join("opf_injections.json"),
            &serialize_injections(p.injections()),
        )?;
    }
    match (&r.recovery, &r.exactness) {
        (Some(rec), _) => {
            write_file(&out.join("opf_voltages.csv"), &voltage_rows(&net, &rec.v))?;
            if rec.approximate {
                notes.push("voltages recovered from the best rank-one factors (relaxation not exact)".into());
            }
        }
        (None, Some(e)) if !e.exact => notes.push(format!(
            "relaxation not exact (ratio {:.3e} > {:.1e}); no voltages written, use --force-recover",
            e.max_ratio, e.threshold
        )),
        _ => {}
    }
    if r.status != Status::Optimal {
        notes.push(format!(
            "solver stopped after {} iterations: {}",
            r.solution.iterations, r.status
        ));
    }
    write_file(&out.join("opf_run.csv"), std::slice::from_ref(&record))?;
    Ok(Report {
        record,
        code: status_code(r.status),
        notes,
    })
}

/// Prints violations; Ok(true) when no error-level violation was found.
pub fn cmd_check(path: &Path) -> Result<(bool, Vec<String>)> {
    let net = match parse_network_unchecked(&read_text(path)?) {
        Ok(n) => n,
        Err(e @ (mpopf_core::Error::Schema(_) | mpopf_core::Error::Json(_))) => {
            return Err(e.into())
        }
        Err(e) => return Ok((false, vec![e.to_string()])),
    };
    let v = validate_network(&net);
    let mut lines: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    let ok = v.is_empty();
    if ok {
        lines.push(format!(
            "{}: {} buses, {} lines, ok",
            path.display(),
            net.num_buses(),
            net.lines.len()
        ));
    }
    Ok((ok, lines))
}
