//! Artifact writers. Every file produced here is a pure function of the run
//! artifacts: no wall-clock timestamps, no map iteration order, no locale.
//! Same scenario, same seed, same bytes.
//!
//! Formats:
//! * `timeline.csv` - per-tick achieved rate per UE with event markers,
//!   ready for plotting (`time_ms,ue,mbps,event`);
//! * `run_summary.json` - scenario echo, milestones, mitigation records and
//!   bus accounting in one document;
//! * `bus_trace.jsonl` - the total-ordered message trace, one message per
//!   line, which `replay` re-derives and byte-compares;
//! * `kpm_reports.csv` - the monitoring database flushed to CSV;
//! * `dataset.jsonl` / `accuracy.json` - the evaluation artifacts.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sliceguard_core::bus::{BusCounters, BusMessage};
use sliceguard_core::eval::{AccuracyResult, InstructionRow, TimelineResult};
use sliceguard_core::kpm::{KpmReport, Label, TimeMs, UeId, KPM_CSV_HEADER};
use sliceguard_core::pipeline::{RunArtifacts, RunEvent, TickSample};
use sliceguard_core::scenario::Scenario;
use sliceguard_core::slicing::MitigationRecord;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| OutputError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    fs::write(path, bytes).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// kbps rendered as Mbps with fixed millis precision: 10000 -> "10.000".
pub fn mbps_string(kbps: u64) -> String {
    format!("{}.{:03}", kbps / 1000, kbps % 1000)
}

fn event_marker(event: &RunEvent) -> Option<(UeId, TimeMs, &'static str)> {
    match *event {
        RunEvent::AttackOnset { t, ue } => Some((ue, t, "onset")),
        RunEvent::AlertPublished { t, ue, .. } => Some((ue, t, "alert")),
        RunEvent::ControlSent { t, ue, .. } => Some((ue, t, "control")),
        RunEvent::ControlApplied {
            t,
            ue,
            success: true,
            ..
        } => Some((ue, t, "quarantined")),
        RunEvent::ControlApplied {
            t,
            ue,
            success: false,
            ..
        } => Some((ue, t, "control-failed")),
        RunEvent::AckObserved { t, ue, .. } => Some((ue, t, "ack")),
        RunEvent::ReportDropped { t, ue } => Some((ue, t, "report-dropped")),
    }
}

/// Renders the plot-ready timeline. Each row is one UE's share of one tick;
/// the event column collects the markers that fell on that UE inside the
/// tick window, joined with `+`.
pub fn timeline_csv(ticks: &[TickSample], events: &[RunEvent], tick_ms: u64) -> String {
    let mut out = String::from("time_ms,ue,mbps,event\n");
    for sample in ticks {
        let mut markers: Vec<&str> = Vec::new();
        for event in events {
            if let Some((ue, t, name)) = event_marker(event) {
                if ue == sample.ue && t >= sample.time_ms && t < sample.time_ms + tick_ms {
                    markers.push(name);
                }
            }
        }
        let _ = writeln!(
            out,
            "{},{},{},{}",
            sample.time_ms,
            sample.ue,
            mbps_string(sample.achieved_kbps),
            markers.join("+")
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictStats {
    pub total: usize,
    pub legitimate: usize,
    pub malicious: usize,
    pub undecided: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LlmStats {
    pub exchanges: usize,
    pub errors: usize,
    pub total_round_trip_ms: u64,
}

/// The run-summary document. Field order here is the file's key order.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub timeline: TimelineResult,
    pub bus: BusCounters,
    pub reports_stored: usize,
    pub reports_dropped: usize,
    pub verdicts: VerdictStats,
    pub anomalies: u64,
    pub end_time_ms: TimeMs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llm: Option<LlmStats>,
    pub events: Vec<RunEvent>,
    pub mitigations: Vec<MitigationRecord>,
}

pub fn build_run_summary(run: &RunArtifacts, timeline: &TimelineResult) -> RunSummary {
    let legitimate = run
        .verdicts
        .iter()
        .filter(|v| v.label == Some(Label::Legitimate))
        .count();
    let malicious = run
        .verdicts
        .iter()
        .filter(|v| v.label == Some(Label::Malicious))
        .count();
    let llm = if run.exchanges.is_empty() {
        None
    } else {
        Some(LlmStats {
            exchanges: run.exchanges.len(),
            errors: run.exchanges.iter().filter(|e| e.error.is_some()).count(),
            total_round_trip_ms: run.exchanges.iter().map(|e| e.round_trip_ms).sum(),
        })
    };
    RunSummary {
        scenario: run.scenario.clone(),
        timeline: *timeline,
        bus: run.counters,
        reports_stored: run.reports.len(),
        reports_dropped: run.dropped_reports.len(),
        verdicts: VerdictStats {
            total: run.verdicts.len(),
            legitimate,
            malicious,
            undecided: run.undecided as usize,
        },
        anomalies: run.anomalies,
        end_time_ms: run.end_time,
        llm,
        events: run.events.clone(),
        mitigations: run.mitigations.clone(),
    }
}

pub fn bus_trace_jsonl(trace: &[BusMessage]) -> Result<String, OutputError> {
    let mut out = String::new();
    for msg in trace {
        out.push_str(&serde_json::to_string(msg)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn kpm_reports_csv(reports: &[KpmReport]) -> String {
    let mut out = String::from(KPM_CSV_HEADER);
    out.push('\n');
    for report in reports {
        out.push_str(&report.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn dataset_jsonl(rows: &[InstructionRow]) -> Result<String, OutputError> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row)?);
        out.push('\n');
    }
    Ok(out)
}

/// The paths a `simulate` run writes, in write order.
#[derive(Debug, Clone)]
pub struct WrittenRun {
    pub timeline_csv: PathBuf,
    pub run_summary: PathBuf,
    pub bus_trace: PathBuf,
    pub kpm_reports: PathBuf,
}

impl WrittenRun {
    pub fn in_dir(dir: &Path) -> Self {
        WrittenRun {
            timeline_csv: dir.join("timeline.csv"),
            run_summary: dir.join("run_summary.json"),
            bus_trace: dir.join("bus_trace.jsonl"),
            kpm_reports: dir.join("kpm_reports.csv"),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [
            &self.timeline_csv,
            &self.run_summary,
            &self.bus_trace,
            &self.kpm_reports,
        ]
    }
}

/// Writes the full artifact set for one finished run into `dir`.
pub fn write_run_artifacts(
    dir: &Path,
    run: &RunArtifacts,
    timeline: &TimelineResult,
) -> Result<WrittenRun, OutputError> {
    let paths = WrittenRun::in_dir(dir);
    write_file(
        &paths.timeline_csv,
        timeline_csv(&run.ticks, &run.events, run.scenario.tick_ms).as_bytes(),
    )?;
    let summary = build_run_summary(run, timeline);
    let mut summary_json = serde_json::to_string_pretty(&summary)?;
    summary_json.push('\n');
    write_file(&paths.run_summary, summary_json.as_bytes())?;
    write_file(&paths.bus_trace, bus_trace_jsonl(&run.trace)?.as_bytes())?;
    write_file(&paths.kpm_reports, kpm_reports_csv(&run.reports).as_bytes())?;
    Ok(paths)
}

pub fn write_dataset(path: &Path, rows: &[InstructionRow]) -> Result<(), OutputError> {
    write_file(path, dataset_jsonl(rows)?.as_bytes())
}

pub fn write_accuracy(path: &Path, result: &AccuracyResult) -> Result<(), OutputError> {
    let mut json = serde_json::to_string_pretty(result)?;
    json.push('\n');
    write_file(path, json.as_bytes())
}
