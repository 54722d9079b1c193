use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use mpopf_conic::{solve, Settings, Solution, Status};

use super::{
    build_bfm_sdp, build_bim_sdp, exactness_report, loss_value, recover_voltages_alg1,
    recover_voltages_alg2, ExactnessReport, Recovery, RelaxPoint, DEFAULT_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::netmodel::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Model {
    Bim,
    Bfm,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Bim => "bim",
            Model::Bfm => "bfm",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Model> {
        match s.to_ascii_lowercase().as_str() {
            "bim" => Ok(Model::Bim),
            "bfm" => Ok(Model::Bfm),
            _ => Err(Error::Schema(format!(
                "unknown model '{s}' (expected bim or bfm)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OpfOptions {
    pub settings: Settings,
    pub threshold: f64,
    pub force_recover: bool,
}

impl Default for OpfOptions {
    fn default() -> Self {
        OpfOptions {
            settings: Settings::default(),
            threshold: DEFAULT_THRESHOLD,
            force_recover: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OpfResult {
    pub model: Model,
    pub status: Status,
    /// total loss in p.u. at the returned point (Optimal only)
    pub objective: Option<f64>,
    pub point: Option<RelaxPoint>,
    pub exactness: Option<ExactnessReport>,
    pub recovery: Option<Recovery>,
    pub solution: Solution,
    pub num_vars: usize,
    pub num_rows: usize,
    pub build_time: f64,
}

/// Builds and solves one relaxation, then checks exactness and recovers
/// voltages when the solution is rank one (or recovery is forced).
pub fn solve_opf(net: &Network, model: Model, opts: &OpfOptions) -> Result<OpfResult> {
    let t0 = Instant::now();
    let (prog, extract): (_, Box<dyn Fn(&[f64]) -> RelaxPoint>) = match model {
        Model::Bim => {
            let (p, idx) = build_bim_sdp(net)?;
            (p, Box::new(move |x| RelaxPoint::Bim(idx.extract(x))))
        }
        Model::Bfm => {
            let (p, idx) = build_bfm_sdp(net)?;
            (p, Box::new(move |x| RelaxPoint::Bfm(idx.extract(x))))
        }
    };
    let build_time = t0.elapsed().as_secs_f64();
    let solution = solve(&prog, &opts.settings);
    let mut out = OpfResult {
        model,
        status: solution.status,
        objective: None,
        point: None,
        exactness: None,
        recovery: None,
        num_vars: prog.num_vars(),
        num_rows: prog.num_rows(),
        solution,
        build_time,
    };
    if out.status != Status::Optimal {
        return Ok(out);
    }
    let point = extract(&out.solution.x);
    out.objective = Some(loss_value(point.injections()));
    let rep = exactness_report(&point, net, opts.threshold)?;
    if rep.exact || opts.force_recover {
        let rec = match &point {
            RelaxPoint::Bim(p) => recover_voltages_alg1(p, net, opts.threshold, opts.force_recover),
            RelaxPoint::Bfm(p) => recover_voltages_alg2(p, net, opts.threshold, opts.force_recover),
        };
        match rec {
            Ok(r) => out.recovery = Some(r),
            Err(e) => log::warn!("voltage recovery failed: {e}"),
        }
    }
    out.exactness = Some(rep);
    out.point = Some(point);
    Ok(out)
}
