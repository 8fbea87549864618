//! Run artifacts: trajectory CSV, move-log JSONL, snapshot edge lists, risk
//! profile CSV/JSON, the run manifest, and the report table.
//!
//! A run directory looks like:
//!
//! ```text
//! run/
//!   manifest.json      resolved config + seed + input digests
//!   trajectory.csv     step,beta,mean_esri,accepted,kind,link_count
//!   moves.jsonl        accepted swaps, replayable in order
//!   snapshots/step_<n>.csv
//!   best.csv           lowest-mean configuration seen
//!   final.csv          network after the last step
//!   summary.json       run totals
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cascade::RiskProfile;
use crate::edgelist;
use crate::error::{Error, Result};
use crate::network::ScNetwork;
use crate::optimizer::{RunConfig, RunResult, RunSink, TrajectoryRecord};
use crate::rewire::SwapProposal;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// FNV-1a 64-bit digest of file bytes; replay integrity check, not
/// cryptographic.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(format!("{hash:016x}"))
}

/// Everything needed to replay an optimization run bit-identically.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub network_path: String,
    pub network_digest: String,
    pub essentiality_path: Option<String>,
    pub essentiality_digest: Option<String>,
    pub default_essentiality: String,
    pub mode: crate::network::Mode,
    pub min_weight: f64,
    pub gamma_ne: f64,
    pub config: RunConfig,
    /// Wall-clock seconds of the chain (informational; excluded from replay
    /// comparisons).
    pub elapsed_seconds: f64,
}

impl RunManifest {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("manifest serialization: {e}")))?;
        fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<RunManifest> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("manifest {}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub initial_mean: f64,
    pub final_mean: f64,
    pub best_mean: f64,
    pub best_step: u64,
    pub accepted: u64,
    pub steps: u64,
    pub acceptance_rate: f64,
    pub non_converged_steps: u64,
}

impl From<&RunResult> for RunSummary {
    fn from(r: &RunResult) -> Self {
        RunSummary {
            initial_mean: r.initial_mean,
            final_mean: r.final_mean,
            best_mean: r.best_mean,
            best_step: r.best_step,
            accepted: r.accepted,
            steps: r.steps,
            acceptance_rate: r.accepted as f64 / r.steps.max(1) as f64,
            non_converged_steps: r.non_converged_steps,
        }
    }
}

/// Streams run artifacts into a directory as the chain progresses; records
/// are flushed in step order so a partial trajectory survives errors.
pub struct FileRunSink {
    dir: PathBuf,
    trajectory: BufWriter<fs::File>,
    moves: BufWriter<fs::File>,
}

impl FileRunSink {
    pub fn create(dir: impl AsRef<Path>) -> Result<FileRunSink> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join("snapshots"))
            .map_err(|e| Error::io(dir.display().to_string(), e))?;
        let traj_path = dir.join("trajectory.csv");
        let mut trajectory = BufWriter::new(
            fs::File::create(&traj_path)
                .map_err(|e| Error::io(traj_path.display().to_string(), e))?,
        );
        writeln!(trajectory, "{}", TrajectoryRecord::CSV_HEADER)
            .map_err(|e| Error::io(traj_path.display().to_string(), e))?;
        let moves_path = dir.join("moves.jsonl");
        let moves = BufWriter::new(
            fs::File::create(&moves_path)
                .map_err(|e| Error::io(moves_path.display().to_string(), e))?,
        );
        Ok(FileRunSink {
            dir,
            trajectory,
            moves,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn io_err(&self, e: std::io::Error) -> Error {
        Error::io(self.dir.display().to_string(), e)
    }
}

impl RunSink for FileRunSink {
    fn record(&mut self, record: &TrajectoryRecord) -> Result<()> {
        writeln!(self.trajectory, "{}", record.csv_row()).map_err(|e| self.io_err(e))?;
        self.trajectory.flush().map_err(|e| self.io_err(e))
    }

    fn accepted_move(&mut self, step: u64, proposal: &SwapProposal) -> Result<()> {
        let line = serde_json::json!({ "step": step, "proposal": proposal });
        writeln!(self.moves, "{line}").map_err(|e| self.io_err(e))?;
        self.moves.flush().map_err(|e| self.io_err(e))
    }

    fn snapshot(&mut self, step: u64, net: &ScNetwork) -> Result<()> {
        let path = self.dir.join("snapshots").join(format!("step_{step:08}.csv"));
        edgelist::write_edge_list(net, path)
    }
}

/// Profile CSV `firm,esri,rank` (rank 1 = riskiest), rows in rank order.
pub fn write_profile_csv(net: &ScNetwork, profile: &RiskProfile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("firm,esri,rank\n");
    for (rank, firm) in profile.ranked().into_iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            net.firm(firm).external,
            profile.esri[firm.index()],
            rank + 1
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub mean: f64,
    pub n_firms: usize,
    pub converged: bool,
    pub non_converged_origins: usize,
    pub top: Vec<ProfileEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub firm: String,
    pub esri: f64,
    pub rank: usize,
}

pub fn profile_summary(net: &ScNetwork, profile: &RiskProfile, top_k: usize) -> ProfileSummary {
    let top = profile
        .ranked()
        .into_iter()
        .take(top_k)
        .enumerate()
        .map(|(rank, firm)| ProfileEntry {
            firm: net.firm(firm).external.clone(),
            esri: profile.esri[firm.index()],
            rank: rank + 1,
        })
        .collect();
    ProfileSummary {
        mean: profile.mean,
        n_firms: profile.len(),
        converged: profile.converged(),
        non_converged_origins: profile.non_converged.len(),
        top,
    }
}

pub fn write_json(value: &impl Serialize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("json serialization: {e}")))?;
    fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

/// One row of the report table: an artifact plus its metrics and mean risk.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportRow {
    pub artifact: String,
    pub mean_esri: f64,
    /// Percent change vs the empirical row (0 for the empirical row itself).
    pub esri_reduction_pct: f64,
    #[serde(flatten)]
    pub metrics: crate::metrics::MetricsReport,
}

pub fn report_table_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("artifact,mean_esri,esri_reduction_pct,");
    out.push_str(crate::metrics::MetricsReport::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.artifact,
            r.mean_esri,
            r.esri_reduction_pct,
            r.metrics.csv_row()
        ));
    }
    out
}

/// Reads a trajectory CSV back into records (report/replay support).
pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line.trim() != TrajectoryRecord::CSV_HEADER {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: 1,
                    msg: "unexpected trajectory header".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg,
        };
        rows.push(TrajectoryRecord {
            step: fields[0].parse().map_err(|e| parse_err(format!("step: {e}")))?,
            beta: fields[1].parse().map_err(|e| parse_err(format!("beta: {e}")))?,
            mean_esri: fields[2]
                .parse()
                .map_err(|e| parse_err(format!("mean_esri: {e}")))?,
            accepted: fields[3]
                .parse()
                .map_err(|e| parse_err(format!("accepted: {e}")))?,
            kind: match fields[4] {
                "full" => crate::rewire::SwapKind::Full,
                "partial" => crate::rewire::SwapKind::Partial,
                other => return Err(parse_err(format!("kind: '{other}'"))),
            },
            link_count: fields[5]
                .parse()
                .map_err(|e| parse_err(format!("link_count: {e}")))?,
            converged: true,
        });
    }
    Ok(rows)
}
