//! Run artifacts: the five files a planning run writes and the content hash
//! tying them to their inputs.
//!
//! `run.json` snapshots everything needed to replay the run except wall-clock
//! timing, which goes to stdout instead so reruns stay byte-identical.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use sweptplan_core::nlp::{SolveReport, SolverOptions};
use sweptplan_core::transcribe::{audit_to_csv, AuditReport, Scenario, Trajectory};

use crate::plot;

/// Everything a planning run saw and produced, minus timing.
#[derive(Serialize)]
pub struct RunRecord<'a> {
    /// Scenario as solved, including any mode override.
    pub scenario: &'a Scenario,
    pub solver_options: &'a SolverOptions,
    /// Radius model path as given on the command line, when one was used.
    pub radius_model: Option<&'a str>,
    /// Hex sha256 over the raw input bytes (scenario file, resolved mode,
    /// radius model file).
    pub content_hash: &'a str,
    pub report: &'a SolveReport,
    pub trajectory: &'a Trajectory,
    pub audit: &'a AuditReport,
}

/// Hex sha256 over the run's raw inputs.
pub fn content_hash(scenario_bytes: &[u8], mode: &str, radius_model_bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(scenario_bytes);
    hasher.update([0u8]);
    hasher.update(mode.as_bytes());
    hasher.update([0u8]);
    hasher.update(radius_model_bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write as _;
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Writes trajectory.csv, trajectory.json, audit.csv, plot.svg, and run.json
/// into `dir`, creating it if needed.
pub fn write_run(dir: &Path, record: &RunRecord, plot_substeps: usize) -> Result<(), io::Error> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trajectory.csv"), record.trajectory.to_csv())?;
    let mut traj_json =
        serde_json::to_string_pretty(record.trajectory).expect("trajectory serializes");
    traj_json.push('\n');
    fs::write(dir.join("trajectory.json"), traj_json)?;
    fs::write(dir.join("audit.csv"), audit_to_csv(record.audit))?;
    let svg = plot::render_plan(record.scenario, record.trajectory, plot_substeps)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    fs::write(dir.join("plot.svg"), svg)?;
    let mut run_json = serde_json::to_string_pretty(record).expect("run record serializes");
    run_json.push('\n');
    fs::write(dir.join("run.json"), run_json)?;
    Ok(())
}
