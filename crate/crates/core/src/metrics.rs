//! Run artifacts: per-timestep metric frames (JSON lines), heatmap
//! snapshots (CSV), run summaries (JSON) and agent-parameter trajectories
//! (CSV). Writers are deterministic: rerunning a scenario overwrites each
//! artifact with identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rl::{RULE_COUNT, RULE_LABELS};
use crate::storage::FileId;

/// One file's row in a heatmap snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapEntry {
    pub tier_id: usize,
    /// Position within the tier, in ascending file-id order.
    pub slot_index: usize,
    pub file_id: FileId,
    pub temperature: f64,
    pub size: u64,
}

/// Per-timestep observable state. Transfer directions use 1-based tier
/// naming with tier 1 the slowest: `up_1_2` counts moves from the slowest
/// tier to the middle one, `down_3_2` from the fastest to the middle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFrame {
    pub timestep: u64,
    pub transfers_up_1_2: u64,
    pub transfers_up_2_3: u64,
    pub transfers_down_3_2: u64,
    pub transfers_down_2_1: u64,
    pub estimated_system_response: f64,
    /// Used/capacity per tier, slowest first.
    pub occupancy: [f64; 3],
    /// Populated only on snapshot timesteps; serialized separately as CSV.
    #[serde(skip)]
    pub heatmap: Option<Vec<HeatmapEntry>>,
}

impl MetricsFrame {
    pub fn total_transfers(&self) -> u64 {
        self.transfers_up_1_2
            + self.transfers_up_2_3
            + self.transfers_down_3_2
            + self.transfers_down_2_1
    }
}

/// Arithmetic means of the transfer counters over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMeans {
    pub up_1_2: f64,
    pub up_2_3: f64,
    pub down_3_2: f64,
    pub down_2_1: f64,
    pub total: f64,
}

impl TransferMeans {
    pub fn from_frames(frames: &[MetricsFrame]) -> Self {
        let n = frames.len() as f64;
        if frames.is_empty() {
            return Self { up_1_2: 0.0, up_2_3: 0.0, down_3_2: 0.0, down_2_1: 0.0, total: 0.0 };
        }
        let sum = |f: fn(&MetricsFrame) -> u64| frames.iter().map(f).sum::<u64>() as f64 / n;
        Self {
            up_1_2: sum(|f| f.transfers_up_1_2),
            up_2_3: sum(|f| f.transfers_up_2_3),
            down_3_2: sum(|f| f.transfers_down_3_2),
            down_2_1: sum(|f| f.transfers_down_2_1),
            total: sum(MetricsFrame::total_transfers),
        }
    }
}

/// End-of-run aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: String,
    pub seed: u64,
    pub timesteps: u64,
    pub total_requests: u64,
    pub final_esr: f64,
    pub final_occupancy: [f64; 3],
    pub mean_transfers: TransferMeans,
}

/// Agent parameters of one tier at the end of one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParamRow {
    pub timestep: u64,
    pub tier: usize,
    pub p: [f64; RULE_COUNT],
}

pub fn write_jsonl(path: &Path, frames: &[MetricsFrame]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for frame in frames {
        serde_json::to_writer(&mut w, frame)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<MetricsFrame>> {
    let reader = BufReader::new(File::open(path)?);
    let mut frames = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        frames.push(serde_json::from_str(&line)?);
    }
    Ok(frames)
}

pub fn write_heatmap_csv(path: &Path, frames: &[MetricsFrame]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "timestep,tier_id,slot_index,file_id,temperature,size")?;
    for frame in frames {
        let Some(entries) = &frame.heatmap else { continue };
        for e in entries {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                frame.timestep, e.tier_id, e.slot_index, e.file_id, e.temperature, e.size
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json(path: &Path, summary: &RunSummary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, summary)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_summary_json(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_agent_params_csv(path: &Path, rows: &[AgentParamRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "timestep,tier")?;
    for label in RULE_LABELS {
        write!(w, ",p_{}", label.to_lowercase())?;
    }
    writeln!(w)?;
    for row in rows {
        write!(w, "{},{}", row.timestep, row.tier)?;
        for p in row.p {
            write!(w, ",{p}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn frame(t: u64, up12: u64) -> MetricsFrame {
        MetricsFrame {
            timestep: t,
            transfers_up_1_2: up12,
            transfers_up_2_3: 2,
            transfers_down_3_2: 1,
            transfers_down_2_1: 0,
            estimated_system_response: 1.5,
            occupancy: [0.5, 0.25, 0.125],
            heatmap: None,
        }
    }

    #[test]
    fn jsonl_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.jsonl");
        let frames = vec![frame(1, 3), frame(2, 7)];
        write_jsonl(&path, &frames).unwrap();
        let back = read_jsonl(&path).unwrap();
        assert_eq!(back, frames);
        // rewriting produces identical bytes
        let first = std::fs::read(&path).unwrap();
        write_jsonl(&path, &frames).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn transfer_means_match_hand_sums() {
        let frames = vec![frame(1, 3), frame(2, 7)];
        let m = TransferMeans::from_frames(&frames);
        assert_eq!(m.up_1_2, 5.0);
        assert_eq!(m.up_2_3, 2.0);
        assert_eq!(m.down_3_2, 1.0);
        assert_eq!(m.down_2_1, 0.0);
        assert_eq!(m.total, 8.0);
        let empty = TransferMeans::from_frames(&[]);
        assert_eq!(empty.total, 0.0);
    }

    #[test]
    fn heatmap_csv_format() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("heatmap.csv");
        let mut f = frame(1, 0);
        f.heatmap = Some(vec![HeatmapEntry {
            tier_id: 2,
            slot_index: 0,
            file_id: FileId(17),
            temperature: 0.75,
            size: 1234,
        }]);
        write_heatmap_csv(&path, &[f, frame(2, 0)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "timestep,tier_id,slot_index,file_id,temperature,size"
        );
        assert_eq!(lines.next().unwrap(), "1,2,0,17,0.75,1234");
        assert!(lines.next().is_none());
    }

    #[test]
    fn summary_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("summary.json");
        let summary = RunSummary {
            policy: "rule1".into(),
            seed: 9,
            timesteps: 100,
            total_requests: 2000,
            final_esr: 123.5,
            final_occupancy: [1.0, 0.995, 0.999],
            mean_transfers: TransferMeans::from_frames(&[frame(1, 2)]),
        };
        write_summary_json(&path, &summary).unwrap();
        assert_eq!(read_summary_json(&path).unwrap(), summary);
    }

    #[test]
    fn agent_params_csv_header_and_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("agent_params.csv");
        let rows = vec![AgentParamRow {
            timestep: 1,
            tier: 0,
            p: [0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        }];
        write_agent_params_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "timestep,tier,p_lll,p_lls,p_lsl,p_lss,p_sll,p_sls,p_ssl,p_sss"
        );
        assert_eq!(lines.next().unwrap(), "1,0,0,0.5,0,0,0,0,0,0");
    }
}
