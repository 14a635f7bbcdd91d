//! Output records. Every artifact carries the config hash and seed of the
//! run that produced it.

use std::io::Write;

use serde::Serialize;

use crate::detection::{BandSource, PairAssessment};
use crate::error::Result;
use crate::evaluation::{EvaluationRun, MaeSummary};
use crate::model::ImpactConflict;
use crate::preference::PreferenceBand;

/// Identifies the run an artifact came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunStamp {
    pub config_hash: String,
    pub seed: u64,
}

impl RunStamp {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        RunStamp {
            config_hash: config_hash.into(),
            seed,
        }
    }

    /// Comment lines for CSV outputs.
    pub fn preamble(&self) -> Vec<String> {
        vec![format!("config_hash={},seed={}", self.config_hash, self.seed)]
    }
}

#[derive(Serialize)]
struct ConflictLine<'a> {
    #[serde(flatten)]
    stamp: &'a RunStamp,
    #[serde(flatten)]
    conflict: &'a ImpactConflict,
}

/// One JSON object per conflict and line.
pub fn write_conflicts_jsonl<W: Write>(conflicts: &[ImpactConflict], stamp: &RunStamp, mut out: W) -> Result<()> {
    for conflict in conflicts {
        serde_json::to_writer(&mut out, &ConflictLine { stamp, conflict })?;
        writeln!(out)?;
    }
    Ok(())
}

/// Distinct mined bands behind `assessments`, in first-seen order.
pub fn mined_bands(assessments: &[PairAssessment]) -> Vec<PreferenceBand> {
    let mut out: Vec<PreferenceBand> = Vec::new();
    for a in assessments {
        if let BandSource::Mined(b) = &a.band_source {
            if !out.contains(b) {
                out.push(b.clone());
            }
        }
    }
    out
}

pub fn write_bands_csv<W: Write>(bands: &[PreferenceBand], stamp: &RunStamp, mut out: W) -> Result<()> {
    for line in stamp.preamble() {
        writeln!(out, "# {line}")?;
    }
    crate::preference::write_bands_csv(bands, out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SeededRun {
    pub seed: u64,
    #[serde(flatten)]
    pub run: EvaluationRun,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub stamp: RunStamp,
    /// Mean accuracy of the preference-aware detector across runs.
    pub accuracy: f64,
    pub baseline_accuracy: f64,
    pub runs: Vec<SeededRun>,
    pub mae: Vec<MaeSummary>,
}

impl MetricsReport {
    pub fn new(stamp: RunStamp, runs: Vec<SeededRun>, mae: Vec<MaeSummary>) -> Self {
        let n = runs.len().max(1) as f64;
        let accuracy = runs.iter().map(|r| r.run.with_preference.accuracy).sum::<f64>() / n;
        let baseline_accuracy = runs.iter().map(|r| r.run.no_preference.accuracy).sum::<f64>() / n;
        MetricsReport {
            stamp,
            accuracy,
            baseline_accuracy,
            runs,
            mae,
        }
    }
}

#[derive(Serialize)]
struct Explained<'a> {
    #[serde(flatten)]
    stamp: &'a RunStamp,
    #[serde(flatten)]
    assessment: &'a PairAssessment,
    signal_file: &'a str,
}

/// Pretty JSON array of assessments, each pointing at its trace file.
pub fn write_explain_json<W: Write>(
    items: &[(PairAssessment, String)],
    stamp: &RunStamp,
    mut out: W,
) -> Result<()> {
    let rows: Vec<Explained> = items
        .iter()
        .map(|(assessment, file)| Explained {
            stamp,
            assessment,
            signal_file: file,
        })
        .collect();
    serde_json::to_writer_pretty(&mut out, &rows)?;
    writeln!(out)?;
    Ok(())
}
