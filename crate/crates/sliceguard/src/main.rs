use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sliceguard::commands::{self, EvalOpts, GenDatasetOpts, ReplayOpts, SimulateOpts};
use sliceguard::scenario_io::Overrides;
use sliceguard_core::eval::DatasetSpec;
use sliceguard_core::kpm::DetectorKind;

#[derive(Parser)]
#[command(
    name = "sliceguard",
    version,
    about = "Deterministic RIC security pipeline: KPM collection, intrusion detection, slice quarantine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end and write its artifact set.
    Simulate(SimulateArgs),
    /// Generate a labeled instruction dataset as JSONL.
    GenDataset(GenDatasetArgs),
    /// Score a detector against an oracle-labeled dataset.
    Eval(EvalArgs),
    /// Re-run a recorded run and verify its bus trace byte for byte.
    Replay(ReplayArgs),
}

fn parse_detector(value: &str) -> Result<DetectorKind, String> {
    match value {
        "rule-oracle" => Ok(DetectorKind::RuleOracle),
        "static-threshold" => Ok(DetectorKind::StaticThreshold),
        "mock-llm" => Ok(DetectorKind::MockLlm),
        "external-llm" => Ok(DetectorKind::ExternalLlm),
        other => Err(format!(
            "unknown detector '{other}' (expected rule-oracle, static-threshold, mock-llm or external-llm)"
        )),
    }
}

/// Flags shared by the subcommands that build a detector from a scenario.
#[derive(Args)]
struct ScenarioArgs {
    /// Scenario name or TOML path; defaults to the built-in paper_default.
    #[arg(long)]
    scenario: Option<String>,
    /// Replace the scenario's detector backend.
    #[arg(long, value_parser = parse_detector)]
    detector: Option<DetectorKind>,
    /// Replace the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Chat endpoint URL for the external-llm backend.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name for the external-llm backend.
    #[arg(long)]
    model: Option<String>,
    /// Consecutive exceedances the static-threshold backend requires.
    #[arg(long)]
    confirmations: Option<u32>,
    /// Target accuracy for the mock-llm backend, in [0, 1].
    #[arg(long)]
    accuracy: Option<f64>,
    /// Print every prompt and raw model reply to stderr.
    #[arg(long)]
    debug_prompts: bool,
}

impl ScenarioArgs {
    fn overrides(&self, duration_s: Option<u64>) -> Overrides {
        Overrides {
            detector: self.detector,
            seed: self.seed,
            duration_s,
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            confirmations: self.confirmations,
            accuracy: self.accuracy,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Replace the scenario's run length, in virtual seconds.
    #[arg(long)]
    duration: Option<u64>,
    /// Directory the artifact files are written into.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GenDatasetArgs {
    /// Number of samples to draw.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Smallest UE count a sample may carry.
    #[arg(long, default_value_t = 1)]
    ue_min: u32,
    /// Largest UE count a sample may carry.
    #[arg(long, default_value_t = 3)]
    ue_max: u32,
    /// Smallest packet count a sample may carry.
    #[arg(long, default_value_t = 0)]
    pkt_min: u64,
    /// Largest packet count a sample may carry.
    #[arg(long, default_value_t = 2000)]
    pkt_max: u64,
    /// RNG seed for the draws.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Per-UE packet bound used for the oracle labels and prompts.
    #[arg(long, default_value_t = 312)]
    base_limit: u64,
    /// Output file.
    #[arg(long, default_value = "out/dataset.jsonl")]
    out: PathBuf,
}

impl GenDatasetArgs {
    fn spec(&self) -> DatasetSpec {
        DatasetSpec {
            n: self.n,
            ue_range: (self.ue_min, self.ue_max),
            pkt_range: (self.pkt_min, self.pkt_max),
            seed: self.seed,
            base_limit_per_ue: self.base_limit,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Number of dataset samples to score on.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    ue_min: u32,
    #[arg(long, default_value_t = 3)]
    ue_max: u32,
    #[arg(long, default_value_t = 0)]
    pkt_min: u64,
    #[arg(long, default_value_t = 2000)]
    pkt_max: u64,
    /// Seed for the dataset draws, separate from the scenario seed.
    #[arg(long, default_value_t = 7)]
    dataset_seed: u64,
    /// Per-UE packet bound for the oracle labels.
    #[arg(long, default_value_t = 312)]
    base_limit: u64,
    /// Output file.
    #[arg(long, default_value = "out/accuracy.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Directory holding run_summary.json and bus_trace.jsonl.
    #[arg(long, default_value = "out")]
    run: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(&SimulateOpts {
            scenario: args.scenario.scenario.clone(),
            overrides: args.scenario.overrides(args.duration),
            out: args.out,
            debug_prompts: args.scenario.debug_prompts,
        }),
        Command::GenDataset(args) => commands::gen_dataset(&GenDatasetOpts {
            spec: args.spec(),
            out: args.out,
        }),
        Command::Eval(args) => commands::eval(&EvalOpts {
            scenario: args.scenario.scenario.clone(),
            overrides: args.scenario.overrides(None),
            spec: DatasetSpec {
                n: args.n,
                ue_range: (args.ue_min, args.ue_max),
                pkt_range: (args.pkt_min, args.pkt_max),
                seed: args.dataset_seed,
                base_limit_per_ue: args.base_limit,
            },
            out: args.out,
            debug_prompts: args.scenario.debug_prompts,
        }),
        Command::Replay(args) => commands::replay(&ReplayOpts { run_dir: args.run }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
