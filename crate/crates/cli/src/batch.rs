//! Independent runs from a manifest, spread over worker threads and merged
//! by key.
//!
//! ```json
//! {"runs": [
//!   {"key": "13-bfm", "command": "opf", "network": "ieee13.json", "model": "bfm", "vband": 0.1},
//!   {"key": "13-lpf", "command": "compare", "network": "ieee13.json", "injections": "inj.json"}
//! ]}
//! ```
//! Relative paths are taken from the manifest's directory. Each run writes its
//! files under `<out>/<key>/`; the merged summary goes to `<out>/batch.csv`.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use mpopf_conic::Settings;
use mpopf_core::relax::{Model, DEFAULT_THRESHOLD};
use serde::Deserialize;

use crate::commands::{
    cmd_compare, cmd_lpf, cmd_opf, cmd_pf, ensure_dir, read_text, NetSource, OpfArgs, Report,
};
use crate::error::{CliError, Result};
use crate::table::{write_file, RunRecord};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    runs: Vec<RunSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub key: String,
    pub command: String,
    #[serde(default)]
    pub network: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub injections: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub vband: Option<f64>,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub force_recover: bool,
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<RunSpec>> {
    let m: Manifest = serde_json::from_str(text).map_err(|e| CliError::Manifest(e.to_string()))?;
    let mut keys = HashSet::new();
    let mut runs = m.runs;
    for r in &mut runs {
        if r.key.is_empty() || r.key.contains(['/', '\\']) || r.key.starts_with('.') {
            return Err(CliError::Manifest(format!("bad key '{}'", r.key)));
        }
        if !keys.insert(r.key.clone()) {
            return Err(CliError::Manifest(format!("duplicate key '{}'", r.key)));
        }
        if !matches!(r.command.as_str(), "pf" | "lpf" | "opf" | "compare") {
            return Err(CliError::Manifest(format!(
                "{}: unsupported command '{}'",
                r.key, r.command
            )));
        }
        r.network = r.network.take().map(|p| base.join(p));
        r.injections = r.injections.take().map(|p| base.join(p));
    }
    Ok(runs)
}

fn run_one(spec: &RunSpec, settings: &Settings, out: &Path) -> Result<Report> {
    let src = NetSource::resolve(spec.network.clone(), spec.seed)?;
    let dir = out.join(&spec.key);
    let inj = spec.injections.as_deref();
    match spec.command.as_str() {
        "pf" => cmd_pf(&src, inj, &dir),
        "lpf" => cmd_lpf(&src, inj, &dir),
        "compare" => cmd_compare(&src, inj, &dir),
        _ => {
            let model = match &spec.model {
                Some(m) => m.parse::<Model>()?,
                None => Model::Bfm,
            };
            let args = OpfArgs {
                model,
                vband: spec.vband,
                threshold: spec.threshold.unwrap_or(DEFAULT_THRESHOLD),
                force_recover: spec.force_recover,
                settings: settings.clone(),
            };
            cmd_opf(&src, &args, &dir)
        }
    }
}

/// Runs every spec and returns the records ordered by key, together with the
/// largest exit code seen.
pub fn run_batch(
    runs: &[RunSpec],
    settings: &Settings,
    out: &Path,
    jobs: usize,
) -> Result<(Vec<RunRecord>, u8)> {
    ensure_dir(out)?;
    let next = AtomicUsize::new(0);
    let merged: Mutex<BTreeMap<String, (RunRecord, u8)>> = Mutex::new(BTreeMap::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, runs.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = runs.get(k) else { break };
                let (mut record, code) = match run_one(spec, settings, out) {
                    Ok(rep) => (rep.record, rep.code),
                    Err(e) => {
                        let label = spec.network.as_ref().map_or_else(
                            || spec.seed.map(|s| format!("seed:{s}")).unwrap_or_default(),
                            |p| p.display().to_string(),
                        );
                        let mut r = RunRecord::new(&spec.command, &label);
                        r.status = format!("error: {e}");
                        (r, e.exit_code())
                    }
                };
                record.key = spec.key.clone();
                merged
                    .lock()
                    .expect("batch results lock")
                    .insert(spec.key.clone(), (record, code));
            });
        }
    });
    let merged = merged.into_inner().expect("batch results lock");
    let code = merged.values().map(|(_, c)| *c).max().unwrap_or(0);
    let records: Vec<RunRecord> = merged.into_values().map(|(r, _)| r).collect();
    write_file(&out.join("batch.csv"), &records)?;
    Ok((records, code))
}

pub fn cmd_batch(
    manifest: &Path,
    settings: &Settings,
    out: &Path,
    jobs: usize,
) -> Result<(Vec<RunRecord>, u8)> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let runs = parse_manifest(&read_text(manifest)?, base)?;
    run_batch(&runs, settings, out, jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_paths_are_relative_to_its_directory() {
        let text = r#"{"runs": [{"key": "a", "command": "pf", "network": "n.json"},
                                {"key": "b", "command": "opf", "seed": 3, "vband": 0.1}]}"#;
        let runs = parse_manifest(text, Path::new("/data")).unwrap();
        assert_eq!(runs[0].network.as_deref(), Some(Path::new("/data/n.json")));
        assert_eq!(runs[1].seed, Some(3));
        assert_eq!(runs[1].network, None);
    }

    #[test]
    fn manifest_rejects_duplicates_and_unknown_commands() {
        let dup = r#"{"runs": [{"key": "a", "command": "pf"}, {"key": "a", "command": "lpf"}]}"#;
        assert!(matches!(
            parse_manifest(dup, Path::new(".")),
            Err(CliError::Manifest(_))
        ));
        let bad = r#"{"runs": [{"key": "a", "command": "check"}]}"#;
        assert!(parse_manifest(bad, Path::new(".")).is_err());
        let escape = r#"{"runs": [{"key": "../x", "command": "pf"}]}"#;
        assert!(parse_manifest(escape, Path::new(".")).is_err());
    }
}
