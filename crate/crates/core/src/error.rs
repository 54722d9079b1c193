use thiserror::Error;

use crate::netmodel::{CVec, Violation};

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("not radial: {0}")]
    NotRadial(String),
    #[error("network failed validation:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("unknown bus {0}")]
    UnknownBus(usize),
    #[error("phase mismatch: {0}")]
    PhaseMismatch(String),
    #[error("matrix is not Hermitian")]
    NotHermitian,
    #[error("matrix is zero; rank ratio undefined")]
    ZeroMatrix,
    #[error("forward-backward sweep did not converge in {iterations} iterations (last step {last_step:.3e}, residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        last_step: f64,
        residual: f64,
        last_voltages: Box<Vec<CVec>>,
    },
    #[error("line {0} has a singular impedance matrix")]
    SingularImpedance(usize),
    #[error("zero voltage at bus {0} during current computation")]
    ZeroVoltage(usize),
    #[error("relaxation not exact on line {line} (rank ratio {ratio:.3e} > {threshold:.1e})")]
    NotExact {
        line: usize,
        ratio: f64,
        threshold: f64,
    },
    #[error("zero trace at bus {0} during voltage recovery")]
    ZeroTrace(usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;
