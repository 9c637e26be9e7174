//! Implementations behind the CLI subcommands. Each returns `CliError` so
//! `main` can map configuration problems to exit code 2 and runtime failures
//! to exit code 1, per the contract in the README.

use std::fs;
use std::path::{Path, PathBuf};

use sliceguard_core::detection::{ChatClient, DetectorConfig, PromptTemplate};
use sliceguard_core::eval::{
    evaluate_detector, extract_timeline, generate_dataset, instruction_rows, DatasetError,
    DatasetSpec, EvalError, EvalOptions, TimelineResult,
};
use sliceguard_core::kpm::Label;
use sliceguard_core::pipeline::{run_scenario, RunError};
use sliceguard_core::scenario::Scenario;

use crate::llm_http::{HttpChatClient, API_KEY_ENV};
use crate::outputs::{self, OutputError};
use crate::scenario_io::{load_scenario, load_scenario_text, Overrides, ScenarioIoError};

/// The scenario used when `--scenario` is not given. Same content as the
/// checked-in file, embedded so the binary works from any directory.
const BUILTIN_SCENARIO: &str = include_str!("../../../scenarios/paper_default.toml");
const BUILTIN_SCENARIO_NAME: &str = "paper_default";

/// Top-level failure. `Config` means the invocation itself was bad (exit 2);
/// `Runtime` means a well-formed run failed partway (exit 1).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<ScenarioIoError> for CliError {
    fn from(err: ScenarioIoError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(err: DatasetError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(err: EvalError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<RunError> for CliError {
    fn from(err: RunError) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl From<OutputError> for CliError {
    fn from(err: OutputError) -> Self {
        CliError::Runtime(err.to_string())
    }
}

fn scenario_from(arg: Option<&str>, overrides: &Overrides) -> Result<Scenario, CliError> {
    match arg {
        Some(arg) => Ok(load_scenario(arg, overrides)?),
        None => Ok(load_scenario_text(
            BUILTIN_SCENARIO,
            BUILTIN_SCENARIO_NAME,
            overrides,
        )?),
    }
}

/// Builds the transport for the external backend, or `None` for the
/// in-process ones. The key comes exclusively from the environment so it can
/// never end up in a scenario file or a shell history line.
fn chat_client_for(
    scenario: &Scenario,
    debug_prompts: bool,
) -> Result<Option<Box<dyn ChatClient>>, CliError> {
    let DetectorConfig::ExternalLlm {
        endpoint,
        model,
        timeout_ms,
        max_retries,
        ..
    } = &scenario.detector
    else {
        return Ok(None);
    };
    let api_key = std::env::var(API_KEY_ENV)
        .ok()
        .filter(|key| !key.is_empty())
        .ok_or_else(|| {
            CliError::Config(format!(
                "detector 'external-llm' needs an API key in the {API_KEY_ENV} environment variable"
            ))
        })?;
    let client = HttpChatClient::new(
        endpoint.clone(),
        model.clone(),
        api_key,
        *timeout_ms,
        *max_retries,
        debug_prompts,
    )
    .map_err(|err| CliError::Config(err.to_string()))?;
    Ok(Some(Box::new(client)))
}

pub struct SimulateOpts {
    pub scenario: Option<String>,
    pub overrides: Overrides,
    pub out: PathBuf,
    pub debug_prompts: bool,
}

pub fn simulate(opts: &SimulateOpts) -> Result<(), CliError> {
    let scenario = scenario_from(opts.scenario.as_deref(), &opts.overrides)?;
    let client = chat_client_for(&scenario, opts.debug_prompts)?;
    let run = run_scenario(&scenario, client)?;
    let timeline = extract_timeline(&run);
    let written = outputs::write_run_artifacts(&opts.out, &run, &timeline)?;

    println!(
        "scenario '{}': detector {}, seed {}, duration {} ms",
        scenario.name,
        scenario.detector.kind(),
        scenario.seed,
        scenario.duration_ms
    );
    print_timeline(&timeline);
    let malicious = run
        .verdicts
        .iter()
        .filter(|v| v.label == Some(Label::Malicious))
        .count();
    println!(
        "verdicts: {} total, {} malicious, {} undecided",
        run.verdicts.len(),
        malicious,
        run.undecided
    );
    for path in written.all() {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn print_timeline(timeline: &TimelineResult) {
    let milestones = [
        ("attack onset", timeline.attack_onset_ms),
        ("alert", timeline.detection_ms),
        ("control sent", timeline.control_sent_ms),
        ("mitigation ack", timeline.mitigation_ms),
        ("recovery", timeline.recovery_ms),
    ];
    let mut any = false;
    for (label, at) in milestones {
        if let Some(t) = at {
            println!("{label} {t} ms");
            any = true;
        }
    }
    if let Some(latency) = timeline.pipeline_latency_ms {
        println!("pipeline latency {latency} ms");
    }
    if !any {
        println!("no attack events in this run");
    }
}

pub struct GenDatasetOpts {
    pub spec: DatasetSpec,
    pub out: PathBuf,
}

pub fn gen_dataset(opts: &GenDatasetOpts) -> Result<(), CliError> {
    let samples = generate_dataset(&opts.spec)?;
    let template = PromptTemplate::new(opts.spec.base_limit_per_ue);
    let rows = instruction_rows(&samples, &template);
    outputs::write_dataset(&opts.out, &rows)?;
    let malicious = samples
        .iter()
        .filter(|s| s.label == Label::Malicious)
        .count();
    println!(
        "wrote {} ({} samples: {} legitimate, {} malicious)",
        opts.out.display(),
        samples.len(),
        samples.len() - malicious,
        malicious
    );
    Ok(())
}

pub struct EvalOpts {
    pub scenario: Option<String>,
    pub overrides: Overrides,
    /// Dataset shape. `spec.seed` is the dataset seed (`--dataset-seed`),
    /// independent of the scenario seed that feeds the mock backend.
    pub spec: DatasetSpec,
    pub out: PathBuf,
    pub debug_prompts: bool,
}

pub fn eval(opts: &EvalOpts) -> Result<(), CliError> {
    let scenario = scenario_from(opts.scenario.as_deref(), &opts.overrides)?;
    let samples = generate_dataset(&opts.spec)?;
    let client = chat_client_for(&scenario, opts.debug_prompts)?;
    let mut detector = scenario
        .detector
        .build(scenario.seed, client)
        .map_err(|err| CliError::Config(err.to_string()))?;
    let result = evaluate_detector(&mut detector, &samples, &EvalOptions::default())?;
    outputs::write_accuracy(&opts.out, &result)?;
    let aborted = if result.aborted {
        " (aborted: too many undecided)"
    } else {
        ""
    };
    println!(
        "detector {}: accuracy {:.4} over {} samples ({} correct, {} incorrect, {} undecided){}",
        result.detector,
        result.accuracy,
        result.n_samples,
        result.n_correct,
        result.n_incorrect,
        result.n_undecided,
        aborted
    );
    println!("wrote {}", opts.out.display());
    Ok(())
}

pub struct ReplayOpts {
    pub run_dir: PathBuf,
}

/// Re-runs the scenario echoed in `run_summary.json` and verifies that the
/// regenerated bus trace matches the recorded one byte for byte. External
/// model runs depend on a live endpoint and are refused up front.
pub fn replay(opts: &ReplayOpts) -> Result<(), CliError> {
    let summary_path = opts.run_dir.join("run_summary.json");
    let text = fs::read_to_string(&summary_path).map_err(|err| {
        CliError::Config(format!("cannot read {}: {err}", summary_path.display()))
    })?;
    let summary: serde_json::Value = serde_json::from_str(&text).map_err(|err| {
        CliError::Config(format!(
            "{} is not valid JSON: {err}",
            summary_path.display()
        ))
    })?;
    let scenario_value = summary.get("scenario").cloned().ok_or_else(|| {
        CliError::Config(format!(
            "{} has no 'scenario' section to replay from",
            summary_path.display()
        ))
    })?;
    let scenario: Scenario = serde_json::from_value(scenario_value).map_err(|err| {
        CliError::Config(format!(
            "scenario echoed in {} does not parse: {err}",
            summary_path.display()
        ))
    })?;
    if matches!(scenario.detector, DetectorConfig::ExternalLlm { .. }) {
        return Err(CliError::Config(
            "external-llm runs depend on a live endpoint and cannot be replayed".to_string(),
        ));
    }

    let run = run_scenario(&scenario, None)?;
    let regenerated = outputs::bus_trace_jsonl(&run.trace)?;
    let trace_path = opts.run_dir.join("bus_trace.jsonl");
    let recorded = fs::read_to_string(&trace_path)
        .map_err(|err| CliError::Config(format!("cannot read {}: {err}", trace_path.display())))?;
    verify_identical(&trace_path, &recorded, &regenerated)?;

    println!(
        "replay OK: {} bus messages match {}",
        run.trace.len(),
        trace_path.display()
    );
    Ok(())
}

fn verify_identical(path: &Path, recorded: &str, regenerated: &str) -> Result<(), CliError> {
    if recorded == regenerated {
        return Ok(());
    }
    let mismatch = recorded
        .lines()
        .zip(regenerated.lines())
        .position(|(a, b)| a != b)
        .map(|i| i + 1);
    let detail = match mismatch {
        Some(line) => format!("first differing line is {line}"),
        None => format!(
            "recorded {} lines, regenerated {}",
            recorded.lines().count(),
            regenerated.lines().count()
        ),
    };
    Err(CliError::Runtime(format!(
        "replay mismatch against {}: {detail}",
        path.display()
    )))
}
