//! Evaluation harness: labeled datasets, detector accuracy, and timeline
//! extraction from finished runs.
//!
//! The dataset side exists because the classifier is prompt-driven: the same
//! rendered prompts that drive live classification double as an instruction
//! corpus ({"instruction", "output"} JSONL) for tuning. Labels always come
//! from the rule oracle, so accuracy numbers measured here are agreement
//! with the deployed bound, not with any particular model.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detection::{classify_against_limit, Detector, PromptTemplate, DEFAULT_BASE_LIMIT};
use crate::kpm::{DetectorKind, Label, TimeMs, UeId};
use crate::pipeline::{RunArtifacts, RunEvent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n: usize,
    /// Inclusive range for the number of UEs a sample aggregates.
    pub ue_range: (u32, u32),
    /// Inclusive range for the transmitted request packets.
    pub pkt_range: (u64, u64),
    pub seed: u64,
    pub base_limit_per_ue: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            n: 1000,
            ue_range: (1, 3),
            pkt_range: (0, 2000),
            seed: 7,
            base_limit_per_ue: DEFAULT_BASE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset size must be at least 1")]
    Empty,
    #[error("ue_range [{lo}, {hi}] is empty or starts below 1")]
    BadUeRange { lo: u32, hi: u32 },
    #[error("pkt_range [{lo}, {hi}] is empty")]
    BadPktRange { lo: u64, hi: u64 },
}

/// One labeled measurement. The label is definitionally the oracle's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub num_ues: u32,
    pub tx_pkts: u64,
    pub label: Label,
}

/// Draws `n` samples uniformly over the configured ranges, labeling each
/// with the rule oracle. Deterministic per seed: the draw order is fixed
/// (UEs, then packets, per sample).
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Vec<LabeledSample>, DatasetError> {
    if spec.n == 0 {
        return Err(DatasetError::Empty);
    }
    let (ue_lo, ue_hi) = spec.ue_range;
    if ue_lo == 0 || ue_lo > ue_hi {
        return Err(DatasetError::BadUeRange {
            lo: ue_lo,
            hi: ue_hi,
        });
    }
    let (pkt_lo, pkt_hi) = spec.pkt_range;
    if pkt_lo > pkt_hi {
        return Err(DatasetError::BadPktRange {
            lo: pkt_lo,
            hi: pkt_hi,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let num_ues = rng.gen_range(ue_lo..=ue_hi);
        let tx_pkts = rng.gen_range(pkt_lo..=pkt_hi);
        samples.push(LabeledSample {
            num_ues,
            tx_pkts,
            label: classify_against_limit(spec.base_limit_per_ue, num_ues, tx_pkts),
        });
    }
    Ok(samples)
}

/// One instruction-corpus row: the rendered prompt and the single-word
/// target a tuned model should produce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRow {
    pub instruction: String,
    pub output: String,
}

pub fn instruction_rows(
    samples: &[LabeledSample],
    template: &PromptTemplate,
) -> Vec<InstructionRow> {
    samples
        .iter()
        .map(|s| InstructionRow {
            instruction: template.build_prompt(s.num_ues, s.tx_pkts),
            output: s.label.as_str().to_string(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Abort once this fraction of processed samples came back undecided.
    pub undecided_abort_ratio: f64,
    /// Never abort before this many samples have been processed.
    pub abort_min_samples: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            undecided_abort_ratio: 0.5,
            abort_min_samples: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("cannot evaluate on an empty dataset")]
    EmptyDataset,
}

/// Accuracy of one detector against oracle labels. Undecided samples (the
/// backend failed to answer) count toward neither correct nor incorrect but
/// stay visible; `accuracy` divides by everything processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyResult {
    pub detector: DetectorKind,
    pub n_samples: usize,
    pub n_correct: usize,
    pub n_incorrect: usize,
    pub n_undecided: usize,
    pub accuracy: f64,
    pub aborted: bool,
}

/// Runs the detector over every sample. A backend that keeps failing aborts
/// early with the partial result (`aborted` set, counts covering only the
/// processed prefix) rather than hammering a dead endpoint.
pub fn evaluate_detector(
    detector: &mut Detector,
    samples: &[LabeledSample],
    options: &EvalOptions,
) -> Result<AccuracyResult, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut n_correct = 0usize;
    let mut n_incorrect = 0usize;
    let mut n_undecided = 0usize;
    let mut processed = 0usize;
    let mut aborted = false;
    for sample in samples {
        let decision = detector.classify_sample(sample.num_ues, sample.tx_pkts);
        processed += 1;
        match decision.label {
            Some(label) if label == sample.label => n_correct += 1,
            Some(_) => n_incorrect += 1,
            None => n_undecided += 1,
        }
        if processed >= options.abort_min_samples
            && (n_undecided as f64) / (processed as f64) > options.undecided_abort_ratio
        {
            aborted = true;
            break;
        }
    }
    Ok(AccuracyResult {
        detector: detector.kind(),
        n_samples: processed,
        n_correct,
        n_incorrect,
        n_undecided,
        accuracy: n_correct as f64 / processed as f64,
        aborted,
    })
}

/// Milestones of one run, extracted from its events and tick series. Any
/// field can be absent: a control run has no onset, an undetected attack no
/// detection, and so on down the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineResult {
    pub attack_onset_ms: Option<TimeMs>,
    pub detection_ms: Option<TimeMs>,
    pub control_sent_ms: Option<TimeMs>,
    pub mitigation_ms: Option<TimeMs>,
    pub recovery_ms: Option<TimeMs>,
    pub pipeline_latency_ms: Option<u64>,
}

/// Pulls the timeline milestones out of a finished run.
///
/// Recovery is the first tick at or after the mitigation ack where every
/// legitimate UE achieves at least what it had on the last tick before
/// onset. The attacker itself is excluded: its rate is supposed to collapse.
pub fn extract_timeline(run: &RunArtifacts) -> TimelineResult {
    let first = |pick: &dyn Fn(&RunEvent) -> Option<TimeMs>| -> Option<TimeMs> {
        run.events.iter().find_map(pick)
    };
    let attack_onset_ms = first(&|e| match e {
        RunEvent::AttackOnset { t, .. } => Some(*t),
        _ => None,
    });
    let detection_ms = first(&|e| match e {
        RunEvent::AlertPublished { t, .. } => Some(*t),
        _ => None,
    });
    let control_sent_ms = first(&|e| match e {
        RunEvent::ControlSent { t, .. } => Some(*t),
        _ => None,
    });
    let mitigation_ms = first(&|e| match e {
        RunEvent::AckObserved {
            t, success: true, ..
        } => Some(*t),
        _ => None,
    });

    let recovery_ms = match (attack_onset_ms, mitigation_ms) {
        (Some(onset), Some(ack)) => {
            let legit: Vec<UeId> = run
                .scenario
                .ues
                .iter()
                .filter(|u| !u.attacker)
                .map(|u| u.id)
                .collect();
            let baseline: Vec<(UeId, u64)> = legit
                .iter()
                .map(|&ue| {
                    let pre = run
                        .ticks
                        .iter()
                        .rfind(|s| s.ue == ue && s.time_ms < onset)
                        .map_or(0, |s| s.achieved_kbps);
                    (ue, pre)
                })
                .collect();
            let mut times: Vec<TimeMs> = run
                .ticks
                .iter()
                .filter(|s| s.time_ms >= ack)
                .map(|s| s.time_ms)
                .collect();
            times.dedup();
            times.into_iter().find(|&t| {
                baseline.iter().all(|&(ue, floor)| {
                    run.ticks
                        .iter()
                        .find(|s| s.time_ms == t && s.ue == ue)
                        .is_some_and(|s| s.achieved_kbps >= floor)
                })
            })
        }
        _ => None,
    };

    let pipeline_latency_ms = match (detection_ms, mitigation_ms) {
        (Some(d), Some(m)) => Some(m - d),
        _ => None,
    };

    TimelineResult {
        attack_onset_ms,
        detection_ms,
        control_sent_ms,
        mitigation_ms,
        recovery_ms,
        pipeline_latency_ms,
    }
}
