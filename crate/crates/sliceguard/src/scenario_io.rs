//! Scenario files: TOML on disk, core [`Scenario`] in memory.
//!
//! The file format is written for humans, so rates are Mbps and times are
//! seconds; loading converts everything to the integer units the core works
//! in (kbps, milliseconds, permille). Every section and field has a default
//! except the UE list, which is the one thing a scenario must actually say.
//!
//! CLI overrides are applied to the parsed sections before the core scenario
//! is built, so `--seed 7` and editing `seed = 7` into the file produce the
//! same `Scenario` value, byte for byte in every artifact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sliceguard_core::detection::{DetectorConfig, DEFAULT_BASE_LIMIT};
use sliceguard_core::kpm::{DetectorKind, SliceConfig, SliceId, UeId};
use sliceguard_core::ran::{CellConfig, UeProfile};
use sliceguard_core::scenario::{ReportPath, Scenario, ScenarioError};

pub const DEFAULT_ENDPOINT: &str = "http://localhost:11434/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gemma2";
pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;
pub const DEFAULT_MAX_RETRIES: u32 = 2;
pub const DEFAULT_MOCK_ACCURACY: f64 = 0.87;
pub const DEFAULT_CONFIRMATIONS: u32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioIoError {
    #[error("scenario '{arg}' not found; tried {}", fmt_paths(.tried))]
    NotFound { arg: String, tried: Vec<PathBuf> },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("{field} must be a finite number in {lo}..={hi}")]
    NumberOutOfRange {
        field: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("'{field}' only applies to the {backend} backend")]
    ForeignField {
        field: &'static str,
        backend: &'static str,
    },
    #[error(transparent)]
    Invalid(#[from] ScenarioError),
}

fn fmt_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    #[serde(default)]
    cell: CellSection,
    slices: Option<Vec<SliceSection>>,
    ues: Vec<UeSection>,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    detector: DetectorSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellSection {
    #[serde(default = "d_bandwidth")]
    bandwidth_mhz: u32,
    #[serde(default = "d_prbs")]
    total_prbs: u32,
    #[serde(default = "d_prb_rate")]
    rate_per_prb_kbps: u64,
}

fn d_bandwidth() -> u32 {
    20
}
fn d_prbs() -> u32 {
    100
}
fn d_prb_rate() -> u64 {
    300
}

impl Default for CellSection {
    fn default() -> Self {
        CellSection {
            bandwidth_mhz: d_bandwidth(),
            total_prbs: d_prbs(),
            rate_per_prb_kbps: d_prb_rate(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SliceSection {
    id: u32,
    name: Option<String>,
    prb_budget: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct UeSection {
    id: u32,
    #[serde(default = "d_slice")]
    slice: u32,
    demand_mbps: f64,
    #[serde(default)]
    attacker: bool,
    #[serde(default)]
    attack_onset_s: f64,
    #[serde(default = "d_multiplier")]
    attack_multiplier: f64,
    #[serde(default)]
    rate_noise_permille: u32,
}

fn d_slice() -> u32 {
    1
}
fn d_multiplier() -> f64 {
    3.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(default = "d_duration")]
    duration_s: f64,
    #[serde(default = "d_interval")]
    report_interval_ms: u64,
    #[serde(default = "d_tick")]
    tick_ms: u64,
    #[serde(default = "d_hop")]
    bus_hop_latency_ms: u64,
    #[serde(default = "d_seed")]
    seed: u64,
    #[serde(default = "d_report_path")]
    report_path: ReportPath,
    #[serde(default)]
    quarantine_on_undecided: bool,
}

fn d_duration() -> f64 {
    400.0
}
fn d_interval() -> u64 {
    1_000
}
fn d_tick() -> u64 {
    100
}
fn d_hop() -> u64 {
    1
}
fn d_seed() -> u64 {
    42
}
fn d_report_path() -> ReportPath {
    ReportPath::Database
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            duration_s: d_duration(),
            report_interval_ms: d_interval(),
            tick_ms: d_tick(),
            bus_hop_latency_ms: d_hop(),
            seed: d_seed(),
            report_path: d_report_path(),
            quarantine_on_undecided: false,
        }
    }
}

/// Flat detector section: one `backend` selector plus every backend's
/// fields as optionals. Flat keeps TOML pleasant and lets us report "that
/// field belongs to a different backend" instead of serde's generic enum
/// errors.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectorSection {
    #[serde(default)]
    backend: Option<DetectorKind>,
    base_limit_per_ue: Option<u64>,
    threshold_pkts: Option<u64>,
    confirmations: Option<u32>,
    accuracy: Option<f64>,
    endpoint: Option<String>,
    model: Option<String>,
    timeout_ms: Option<u64>,
    max_retries: Option<u32>,
}

/// CLI-level field replacements. Each one is exactly equivalent to editing
/// the matching scenario field before loading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub detector: Option<DetectorKind>,
    pub seed: Option<u64>,
    pub duration_s: Option<u64>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub confirmations: Option<u32>,
    pub accuracy: Option<f64>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        *self == Overrides::default()
    }
}

/// Maps a `--scenario` argument to a file: the literal path, the path with
/// `.toml` appended, then the same two under `scenarios/`, all relative to
/// `base` (the process working directory in real use).
pub fn resolve_scenario_arg_in(base: &Path, arg: &str) -> Result<PathBuf, ScenarioIoError> {
    let candidates = [
        base.join(arg),
        base.join(format!("{arg}.toml")),
        base.join("scenarios").join(arg),
        base.join("scenarios").join(format!("{arg}.toml")),
    ];
    let mut tried: Vec<PathBuf> = Vec::new();
    for candidate in candidates {
        if candidate.is_file() {
            return Ok(candidate);
        }
        // An absolute `arg` makes `join` discard `base`, so the four
        // candidates can collapse; keep the error list free of repeats.
        if !tried.contains(&candidate) {
            tried.push(candidate);
        }
    }
    Err(ScenarioIoError::NotFound {
        arg: arg.to_string(),
        tried,
    })
}

pub fn resolve_scenario_arg(arg: &str) -> Result<PathBuf, ScenarioIoError> {
    resolve_scenario_arg_in(Path::new("."), arg)
}

pub fn load_scenario(arg: &str, overrides: &Overrides) -> Result<Scenario, ScenarioIoError> {
    let path = resolve_scenario_arg(arg)?;
    load_scenario_file(&path, overrides)
}

pub fn load_scenario_file(path: &Path, overrides: &Overrides) -> Result<Scenario, ScenarioIoError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let fallback_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    load_from_str(&text, path, &fallback_name, overrides)
}

/// Loads a scenario from already-read TOML text, as used for the built-in
/// default. `origin` only labels parse errors.
pub fn load_scenario_text(
    text: &str,
    name: &str,
    overrides: &Overrides,
) -> Result<Scenario, ScenarioIoError> {
    load_from_str(text, Path::new(name), name, overrides)
}

fn load_from_str(
    text: &str,
    origin: &Path,
    fallback_name: &str,
    overrides: &Overrides,
) -> Result<Scenario, ScenarioIoError> {
    let mut file: ScenarioFile = toml::from_str(text).map_err(|source| ScenarioIoError::Parse {
        path: origin.to_path_buf(),
        source: Box::new(source),
    })?;
    apply_overrides(&mut file, overrides);
    let scenario = build(file, fallback_name.to_string())?;
    scenario.validate()?;
    Ok(scenario)
}

fn apply_overrides(file: &mut ScenarioFile, ov: &Overrides) {
    if let Some(backend) = ov.detector {
        file.detector.backend = Some(backend);
    }
    if let Some(seed) = ov.seed {
        file.run.seed = seed;
    }
    if let Some(duration_s) = ov.duration_s {
        file.run.duration_s = duration_s as f64;
    }
    if let Some(endpoint) = &ov.endpoint {
        file.detector.endpoint = Some(endpoint.clone());
    }
    if let Some(model) = &ov.model {
        file.detector.model = Some(model.clone());
    }
    if let Some(confirmations) = ov.confirmations {
        file.detector.confirmations = Some(confirmations);
    }
    if let Some(accuracy) = ov.accuracy {
        file.detector.accuracy = Some(accuracy);
    }
}

/// Converts a human-unit float to integer with bounds checking; `scale` is
/// the multiplier into the integer unit (1000 for Mbps→kbps, s→ms, ×→‰).
fn scaled(value: f64, scale: f64, field: &'static str, hi: f64) -> Result<u64, ScenarioIoError> {
    if !value.is_finite() || !(0.0..=hi).contains(&value) {
        return Err(ScenarioIoError::NumberOutOfRange { field, lo: 0.0, hi });
    }
    Ok((value * scale).round() as u64)
}

fn build(file: ScenarioFile, fallback_name: String) -> Result<Scenario, ScenarioIoError> {
    let cell = CellConfig {
        bandwidth_mhz: file.cell.bandwidth_mhz,
        total_prbs: file.cell.total_prbs,
        rate_per_prb_kbps: file.cell.rate_per_prb_kbps,
    };

    let slices = match file.slices {
        Some(sections) => sections
            .into_iter()
            .map(|s| SliceConfig {
                id: SliceId(s.id),
                name: s.name.unwrap_or_else(|| format!("slice{}", s.id)),
                prb_budget: s.prb_budget,
            })
            .collect(),
        // No [[slices]]: one default slice owning the whole cell.
        None => vec![SliceConfig {
            id: SliceId(1),
            name: "embb".to_string(),
            prb_budget: cell.total_prbs,
        }],
    };

    let mut ues = Vec::with_capacity(file.ues.len());
    let mut bindings = Vec::with_capacity(file.ues.len());
    for ue in file.ues {
        let demand_kbps = scaled(ue.demand_mbps, 1000.0, "demand_mbps", 1e9)?;
        let onset_ms = scaled(ue.attack_onset_s, 1000.0, "attack_onset_s", 1e9)?;
        let multiplier = scaled(ue.attack_multiplier, 1000.0, "attack_multiplier", 1e6)? as u32;
        ues.push(UeProfile {
            id: UeId(ue.id),
            demand_kbps,
            attacker: ue.attacker,
            attack_onset_ms: if ue.attacker { onset_ms } else { 0 },
            attack_multiplier_permille: if ue.attacker { multiplier } else { 1000 },
            rate_noise_permille: ue.rate_noise_permille,
        });
        bindings.push((UeId(ue.id), SliceId(ue.slice)));
    }

    let detector = build_detector(file.detector, file.run.quarantine_on_undecided)?;
    Ok(Scenario {
        name: file.name.unwrap_or(fallback_name),
        cell,
        slices,
        ues,
        bindings,
        report_interval_ms: file.run.report_interval_ms,
        tick_ms: file.run.tick_ms,
        duration_ms: scaled(file.run.duration_s, 1000.0, "duration_s", 1e9)?,
        bus_hop_latency_ms: file.run.bus_hop_latency_ms,
        detector: detector.0,
        quarantine_on_undecided: detector.1,
        report_path: file.run.report_path,
        seed: file.run.seed,
    })
}

fn build_detector(
    section: DetectorSection,
    quarantine_on_undecided: bool,
) -> Result<(DetectorConfig, bool), ScenarioIoError> {
    let backend = section.backend.unwrap_or(DetectorKind::RuleOracle);
    let forbid = |field: &'static str, present: bool| {
        if present {
            Err(ScenarioIoError::ForeignField {
                field,
                backend: backend.as_str(),
            })
        } else {
            Ok(())
        }
    };
    let base = section.base_limit_per_ue.unwrap_or(DEFAULT_BASE_LIMIT);
    let config = match backend {
        DetectorKind::RuleOracle => {
            forbid("threshold_pkts", section.threshold_pkts.is_some())?;
            forbid("confirmations", section.confirmations.is_some())?;
            forbid("accuracy", section.accuracy.is_some())?;
            forbid("endpoint", section.endpoint.is_some())?;
            forbid("model", section.model.is_some())?;
            forbid("timeout_ms", section.timeout_ms.is_some())?;
            forbid("max_retries", section.max_retries.is_some())?;
            DetectorConfig::RuleOracle {
                base_limit_per_ue: base,
            }
        }
        DetectorKind::StaticThreshold => {
            forbid("accuracy", section.accuracy.is_some())?;
            forbid("endpoint", section.endpoint.is_some())?;
            forbid("model", section.model.is_some())?;
            forbid("timeout_ms", section.timeout_ms.is_some())?;
            forbid("max_retries", section.max_retries.is_some())?;
            DetectorConfig::StaticThreshold {
                threshold_pkts: section.threshold_pkts.unwrap_or(base),
                confirmations: section.confirmations.unwrap_or(DEFAULT_CONFIRMATIONS),
            }
        }
        DetectorKind::MockLlm => {
            forbid("threshold_pkts", section.threshold_pkts.is_some())?;
            forbid("confirmations", section.confirmations.is_some())?;
            forbid("endpoint", section.endpoint.is_some())?;
            forbid("model", section.model.is_some())?;
            forbid("timeout_ms", section.timeout_ms.is_some())?;
            forbid("max_retries", section.max_retries.is_some())?;
            DetectorConfig::MockLlm {
                accuracy: section.accuracy.unwrap_or(DEFAULT_MOCK_ACCURACY),
                base_limit_per_ue: base,
            }
        }
        DetectorKind::ExternalLlm => {
            forbid("threshold_pkts", section.threshold_pkts.is_some())?;
            forbid("confirmations", section.confirmations.is_some())?;
            forbid("accuracy", section.accuracy.is_some())?;
            DetectorConfig::ExternalLlm {
                endpoint: section
                    .endpoint
                    .unwrap_or_else(|| DEFAULT_ENDPOINT.to_string()),
                model: section.model.unwrap_or_else(|| DEFAULT_MODEL.to_string()),
                timeout_ms: section.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS),
                max_retries: section.max_retries.unwrap_or(DEFAULT_MAX_RETRIES),
                base_limit_per_ue: base,
            }
        }
    };
    Ok((config, quarantine_on_undecided))
}
