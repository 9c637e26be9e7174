//! Detection xApp: turns KPM reports into verdicts and alerts.
//!
//! Four interchangeable backends sit behind one interface:
//!
//! * **rule oracle** - the ground-truth bound itself (at most 312 request
//!   packets per second per UE is legitimate);
//! * **static threshold** - a plain per-UE packet threshold that only fires
//!   after K consecutive exceedances, the classical baseline the prompt-based
//!   approach is compared against;
//! * **external LLM** - renders the prompt and sends it to a chat-completions
//!   endpoint through a [`ChatClient`], parsing the reply by keyword;
//! * **mock LLM** - a seeded stand-in that answers with the oracle label
//!   flipped with probability `1 - accuracy`, for reproducing a model of any
//!   given quality without network access.
//!
//! Every KPM report carries the counters of exactly one UE, so the xApp
//! judges it against the single-UE bound; the report's `num_ues` field is
//! cell context, not a multiplier on one UE's allowance. Multi-UE bounds
//! still matter for the dataset tooling, where a sample may describe an
//! aggregate of several UEs.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bus::{Alert, SliceControlAck};
use crate::kpm::{DetectorKind, KpmReport, Label, TimeMs, UeId, Verdict};

/// Request-packet allowance per UE per second; `n` UEs may send `n` times
/// this many packets before they are considered malicious.
pub const DEFAULT_BASE_LIMIT: u64 = 312;

/// The deployed prompt. Slot `{NumUE}`/`{TXPackets}` take the measurement,
/// `{Limit1UE}`/`{Limit2UE}` take the worked-example bounds derived from the
/// per-UE base limit. Single-word output is part of the contract: the reply
/// parser looks for exactly one of the two label words.
const PROMPT_TEMPLATE: &str = "PLEASE ONLY OUTPUT IN A WORD with TX Pack limits of {Limit1UE} for 1 UE and {Limit2UE} for 2 UEs, check if the following {NumUE} and {TXPackets} meet these bounds. If within bounds output Legitimate (input <= bounds) or Malicious (input >= bounds if exceeded).";

/// Renders the classification prompt for a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub base_limit_per_ue: u64,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            base_limit_per_ue: DEFAULT_BASE_LIMIT,
        }
    }
}

impl PromptTemplate {
    pub fn new(base_limit_per_ue: u64) -> Self {
        PromptTemplate { base_limit_per_ue }
    }

    /// Substitutes all four slots. Rendering is pure string work; the same
    /// inputs always produce byte-identical prompts.
    pub fn build_prompt(&self, num_ues: u32, tx_pkts: u64) -> String {
        PROMPT_TEMPLATE
            .replace("{Limit1UE}", &self.base_limit_per_ue.to_string())
            .replace("{Limit2UE}", &(self.base_limit_per_ue * 2).to_string())
            .replace("{NumUE}", &num_ues.to_string())
            .replace("{TXPackets}", &tx_pkts.to_string())
    }
}

/// Ground-truth rule from the prompt: `tx_pkts` above `312 * num_ues` is
/// malicious, anything at or under the bound (equality included) is
/// legitimate.
pub fn rule_oracle_classify(num_ues: u32, tx_pkts: u64) -> Label {
    classify_against_limit(DEFAULT_BASE_LIMIT, num_ues, tx_pkts)
}

/// Same rule with a configurable per-UE base limit.
pub fn classify_against_limit(base_limit_per_ue: u64, num_ues: u32, tx_pkts: u64) -> Label {
    if tx_pkts > base_limit_per_ue * u64::from(num_ues) {
        Label::Malicious
    } else {
        Label::Legitimate
    }
}

/// Baseline detector rule: malicious only once the trailing run of
/// consecutive exceedances reaches `confirmations`.
pub fn static_threshold_classify(exceedances: &[bool], confirmations: u32) -> Label {
    let trailing_run = exceedances.iter().rev().take_while(|&&e| e).count();
    if confirmations > 0 && trailing_run >= confirmations as usize {
        Label::Malicious
    } else {
        Label::Legitimate
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerdictParseError {
    #[error("reply contains both label words")]
    BothKeywords,
    #[error("reply contains neither label word")]
    NoKeyword,
}

/// Extracts a label from raw model text: case-insensitive keyword search for
/// the two label words. Exactly one must appear; anything else is a parse
/// failure, reported rather than guessed at.
pub fn parse_verdict_text(text: &str) -> Result<Label, VerdictParseError> {
    let lowered = text.to_ascii_lowercase();
    let legitimate = lowered.contains("legitimate");
    let malicious = lowered.contains("malicious");
    match (legitimate, malicious) {
        (true, false) => Ok(Label::Legitimate),
        (false, true) => Ok(Label::Malicious),
        (true, true) => Err(VerdictParseError::BothKeywords),
        (false, false) => Err(VerdictParseError::NoKeyword),
    }
}

/// Successful reply from a chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatReply {
    pub text: String,
    pub round_trip_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChatError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request timed out after {after_ms} ms")]
    Timeout { after_ms: u64 },
    #[error("endpoint returned status {status}: {detail}")]
    Endpoint { status: u16, detail: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Transport abstraction for the external-LLM backend. The core crate only
/// renders prompts and parses replies; how bytes reach a model is the host's
/// business (the companion crate ships an HTTP implementation).
pub trait ChatClient {
    fn complete(&mut self, prompt: &str) -> Result<ChatReply, ChatError>;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MockLlmError {
    #[error("accuracy {0} outside 0.0..=1.0")]
    AccuracyOutOfRange(f64),
}

/// Seeded stand-in for a model of configured quality. Each classification
/// draws once from its own ChaCha8 stream and flips the oracle label when the
/// draw lands in the error mass, so a run is exactly repeatable per seed and
/// the long-run agreement rate converges on `accuracy`.
#[derive(Debug, Clone)]
pub struct MockLlm {
    accuracy: f64,
    base_limit_per_ue: u64,
    rng: ChaCha8Rng,
}

impl MockLlm {
    pub fn new(accuracy: f64, base_limit_per_ue: u64, seed: u64) -> Result<Self, MockLlmError> {
        if !(0.0..=1.0).contains(&accuracy) || accuracy.is_nan() {
            return Err(MockLlmError::AccuracyOutOfRange(accuracy));
        }
        Ok(MockLlm {
            accuracy,
            base_limit_per_ue,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    pub fn classify(&mut self, num_ues: u32, tx_pkts: u64) -> Label {
        let truth = classify_against_limit(self.base_limit_per_ue, num_ues, tx_pkts);
        // Draws land in [0, 1), so accuracy 1.0 can never flip.
        if self.rng.gen::<f64>() < self.accuracy {
            truth
        } else {
            truth.flipped()
        }
    }
}

/// One prompt/response exchange with a model backend, kept for debugging and
/// latency reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub ue: Option<UeId>,
    pub prompt: String,
    pub raw_response: Option<String>,
    pub parsed: Option<Label>,
    pub round_trip_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Outcome of classifying one measurement. `label: None` means undecided:
/// the backend failed rather than answered, and `error` says why.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub label: Option<Label>,
    pub raw_text: Option<String>,
    pub prompt: Option<String>,
    pub round_trip_ms: u64,
    pub error: Option<String>,
}

impl Decision {
    fn decided(label: Label) -> Self {
        Decision {
            label: Some(label),
            raw_text: None,
            prompt: None,
            round_trip_ms: 0,
            error: None,
        }
    }
}

/// Scenario-level backend selection, serializable so a run can echo it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "kebab-case")]
pub enum DetectorConfig {
    RuleOracle {
        base_limit_per_ue: u64,
    },
    StaticThreshold {
        threshold_pkts: u64,
        confirmations: u32,
    },
    MockLlm {
        accuracy: f64,
        base_limit_per_ue: u64,
    },
    ExternalLlm {
        endpoint: String,
        model: String,
        timeout_ms: u64,
        max_retries: u32,
        base_limit_per_ue: u64,
    },
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig::RuleOracle {
            base_limit_per_ue: DEFAULT_BASE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetectorConfigError {
    #[error("base_limit_per_ue must be at least 1")]
    ZeroBaseLimit,
    #[error("confirmations must be at least 1")]
    ZeroConfirmations,
    #[error(transparent)]
    Mock(#[from] MockLlmError),
    #[error("endpoint must not be empty")]
    EmptyEndpoint,
    #[error("model must not be empty")]
    EmptyModel,
    #[error("external-llm backend needs a chat client")]
    MissingClient,
}

impl DetectorConfig {
    pub fn kind(&self) -> DetectorKind {
        match self {
            DetectorConfig::RuleOracle { .. } => DetectorKind::RuleOracle,
            DetectorConfig::StaticThreshold { .. } => DetectorKind::StaticThreshold,
            DetectorConfig::MockLlm { .. } => DetectorKind::MockLlm,
            DetectorConfig::ExternalLlm { .. } => DetectorKind::ExternalLlm,
        }
    }

    pub fn validate(&self) -> Result<(), DetectorConfigError> {
        match self {
            DetectorConfig::RuleOracle { base_limit_per_ue } => {
                if *base_limit_per_ue == 0 {
                    return Err(DetectorConfigError::ZeroBaseLimit);
                }
            }
            DetectorConfig::StaticThreshold { confirmations, .. } => {
                if *confirmations == 0 {
                    return Err(DetectorConfigError::ZeroConfirmations);
                }
            }
            DetectorConfig::MockLlm {
                accuracy,
                base_limit_per_ue,
            } => {
                if *base_limit_per_ue == 0 {
                    return Err(DetectorConfigError::ZeroBaseLimit);
                }
                if !(0.0..=1.0).contains(accuracy) || accuracy.is_nan() {
                    return Err(MockLlmError::AccuracyOutOfRange(*accuracy).into());
                }
            }
            DetectorConfig::ExternalLlm {
                endpoint,
                model,
                base_limit_per_ue,
                ..
            } => {
                if *base_limit_per_ue == 0 {
                    return Err(DetectorConfigError::ZeroBaseLimit);
                }
                if endpoint.is_empty() {
                    return Err(DetectorConfigError::EmptyEndpoint);
                }
                if model.is_empty() {
                    return Err(DetectorConfigError::EmptyModel);
                }
            }
        }
        Ok(())
    }

    /// Builds the runtime detector. The external backend needs the host to
    /// supply a transport; everything else runs in-process.
    pub fn build(
        &self,
        seed: u64,
        client: Option<Box<dyn ChatClient>>,
    ) -> Result<Detector, DetectorConfigError> {
        self.validate()?;
        Ok(match self {
            DetectorConfig::RuleOracle { base_limit_per_ue } => Detector::RuleOracle {
                base_limit_per_ue: *base_limit_per_ue,
            },
            DetectorConfig::StaticThreshold {
                threshold_pkts,
                confirmations,
            } => Detector::StaticThreshold {
                threshold_pkts: *threshold_pkts,
                confirmations: *confirmations,
                streaks: BTreeMap::new(),
            },
            DetectorConfig::MockLlm {
                accuracy,
                base_limit_per_ue,
            } => Detector::MockLlm {
                mock: MockLlm::new(*accuracy, *base_limit_per_ue, seed)?,
                template: PromptTemplate::new(*base_limit_per_ue),
            },
            DetectorConfig::ExternalLlm {
                base_limit_per_ue, ..
            } => Detector::ExternalLlm {
                client: client.ok_or(DetectorConfigError::MissingClient)?,
                template: PromptTemplate::new(*base_limit_per_ue),
            },
        })
    }
}

/// Runtime detector state. See the module docs for backend semantics.
// One detector exists per run; the mock's embedded rng making its variant
// large is not worth a box.
#[allow(clippy::large_enum_variant)]
pub enum Detector {
    RuleOracle {
        base_limit_per_ue: u64,
    },
    StaticThreshold {
        threshold_pkts: u64,
        confirmations: u32,
        streaks: BTreeMap<UeId, u32>,
    },
    MockLlm {
        mock: MockLlm,
        template: PromptTemplate,
    },
    ExternalLlm {
        client: Box<dyn ChatClient>,
        template: PromptTemplate,
    },
}

impl Detector {
    pub fn kind(&self) -> DetectorKind {
        match self {
            Detector::RuleOracle { .. } => DetectorKind::RuleOracle,
            Detector::StaticThreshold { .. } => DetectorKind::StaticThreshold,
            Detector::MockLlm { .. } => DetectorKind::MockLlm,
            Detector::ExternalLlm { .. } => DetectorKind::ExternalLlm,
        }
    }

    /// Classifies one per-UE report (`num_ues` = 1 from the xApp's point of
    /// view). The static-threshold backend keeps a per-UE exceedance streak
    /// across calls; the others are stateless between reports.
    pub fn classify_report(&mut self, ue: UeId, num_ues: u32, tx_pkts: u64) -> Decision {
        match self {
            Detector::StaticThreshold {
                threshold_pkts,
                confirmations,
                streaks,
            } => {
                let streak = streaks.entry(ue).or_insert(0);
                if tx_pkts > *threshold_pkts {
                    *streak += 1;
                } else {
                    *streak = 0;
                }
                let label = if *streak >= *confirmations {
                    Label::Malicious
                } else {
                    Label::Legitimate
                };
                Decision::decided(label)
            }
            _ => self.classify_sample(num_ues, tx_pkts),
        }
    }

    /// Classifies one standalone measurement, as the dataset evaluation does.
    /// For the static-threshold backend a standalone sample is its own entire
    /// history, so it can only be malicious when one exceedance suffices.
    pub fn classify_sample(&mut self, num_ues: u32, tx_pkts: u64) -> Decision {
        match self {
            Detector::RuleOracle { base_limit_per_ue } => {
                Decision::decided(classify_against_limit(*base_limit_per_ue, num_ues, tx_pkts))
            }
            Detector::StaticThreshold {
                threshold_pkts,
                confirmations,
                ..
            } => Decision::decided(static_threshold_classify(
                &[tx_pkts > *threshold_pkts],
                *confirmations,
            )),
            Detector::MockLlm { mock, template } => {
                let label = mock.classify(num_ues, tx_pkts);
                Decision {
                    label: Some(label),
                    raw_text: Some(label.as_str().to_owned()),
                    prompt: Some(template.build_prompt(num_ues, tx_pkts)),
                    round_trip_ms: 0,
                    error: None,
                }
            }
            Detector::ExternalLlm { client, template } => {
                let prompt = template.build_prompt(num_ues, tx_pkts);
                match client.complete(&prompt) {
                    Ok(reply) => match parse_verdict_text(&reply.text) {
                        Ok(label) => Decision {
                            label: Some(label),
                            raw_text: Some(reply.text),
                            prompt: Some(prompt),
                            round_trip_ms: reply.round_trip_ms,
                            error: None,
                        },
                        Err(parse_err) => Decision {
                            label: None,
                            raw_text: Some(reply.text),
                            prompt: Some(prompt),
                            round_trip_ms: reply.round_trip_ms,
                            error: Some(parse_err.to_string()),
                        },
                    },
                    Err(chat_err) => Decision {
                        label: None,
                        raw_text: None,
                        prompt: Some(prompt),
                        round_trip_ms: 0,
                        error: Some(chat_err.to_string()),
                    },
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SuppressionState {
    /// Alert published, quarantine not yet confirmed.
    AwaitingAck,
    /// Quarantine confirmed; the UE keeps reporting (and keeps looking
    /// malicious) but re-alerting would only produce duplicate control work.
    Quarantined,
}

/// The detection xApp: classifies every report, publishes at most one alert
/// per UE per attack episode, and re-arms when a control attempt fails.
pub struct DetectionXapp {
    detector: Detector,
    quarantine_on_undecided: bool,
    suppression: BTreeMap<UeId, SuppressionState>,
    verdicts: Vec<Verdict>,
    exchanges: Vec<LlmExchange>,
    undecided: u64,
}

impl DetectionXapp {
    pub fn new(detector: Detector, quarantine_on_undecided: bool) -> Self {
        DetectionXapp {
            detector,
            quarantine_on_undecided,
            suppression: BTreeMap::new(),
            verdicts: Vec::new(),
            exchanges: Vec::new(),
            undecided: 0,
        }
    }

    /// Classifies one report and returns the alert to publish, if any.
    ///
    /// An undecided verdict is conservative by default (no alert, counted),
    /// flippable via `quarantine_on_undecided` for deployments that prefer
    /// false quarantines over missed attacks.
    pub fn process_report(&mut self, report: &KpmReport, _now: TimeMs) -> Option<Alert> {
        let decision = self.detector.classify_report(report.ue, 1, report.tx_pkts);
        let verdict = Verdict {
            ue: report.ue,
            report_timestamp: report.timestamp,
            label: decision.label,
            detector: self.detector.kind(),
            raw_text: decision.raw_text.clone(),
            decision_latency_ms: decision.round_trip_ms,
        };
        if let Some(prompt) = decision.prompt {
            self.exchanges.push(LlmExchange {
                ue: Some(report.ue),
                prompt,
                raw_response: decision.raw_text,
                parsed: decision.label,
                round_trip_ms: decision.round_trip_ms,
                error: decision.error,
            });
        }
        let effective = match verdict.label {
            Some(label) => label,
            None => {
                self.undecided += 1;
                if self.quarantine_on_undecided {
                    Label::Malicious
                } else {
                    Label::Legitimate
                }
            }
        };
        let alert = if effective == Label::Malicious && !self.suppression.contains_key(&report.ue) {
            self.suppression
                .insert(report.ue, SuppressionState::AwaitingAck);
            Some(Alert {
                ue: report.ue,
                verdict: verdict.clone(),
            })
        } else {
            None
        };
        self.verdicts.push(verdict);
        alert
    }

    /// Folds a control ack into the suppression state: a confirmed quarantine
    /// stays suppressed (the episode is over), a failed one re-arms the UE so
    /// the next malicious report can retry.
    pub fn handle_ack(&mut self, ack: &SliceControlAck) {
        if ack.success {
            self.suppression
                .insert(ack.ue, SuppressionState::Quarantined);
        } else {
            self.suppression.remove(&ack.ue);
        }
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn exchanges(&self) -> &[LlmExchange] {
        &self.exchanges
    }

    pub fn undecided(&self) -> u64 {
        self.undecided
    }

    pub fn into_outputs(self) -> (Vec<Verdict>, Vec<LlmExchange>, u64) {
        (self.verdicts, self.exchanges, self.undecided)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kpm::SliceId;
    use proptest::prelude::*;

    fn report(ue: u32, tx_pkts: u64, timestamp: TimeMs) -> KpmReport {
        KpmReport {
            timestamp,
            ue: UeId(ue),
            slice: SliceId(1),
            dl_bytes: 0,
            ul_bytes: 0,
            dl_prbs: 0,
            ul_prbs: 0,
            tx_pkts,
            rx_pkts: 0,
            tx_errors: 0,
            ul_errors: 0,
            num_ues: 3,
        }
    }

    fn ack(ue: u32, success: bool) -> SliceControlAck {
        SliceControlAck {
            request_id: 1,
            ue: UeId(ue),
            success,
            applied_at: 0,
            error: None,
        }
    }

    #[test]
    fn prompt_renders_the_deployed_text() {
        let prompt = PromptTemplate::default().build_prompt(1, 300);
        assert_eq!(
            prompt,
            "PLEASE ONLY OUTPUT IN A WORD with TX Pack limits of 312 for 1 UE and 624 \
             for 2 UEs, check if the following 1 and 300 meet these bounds. If within \
             bounds output Legitimate (input <= bounds) or Malicious (input >= bounds \
             if exceeded)."
        );
    }

    #[test]
    fn prompt_scales_its_worked_examples_with_the_base_limit() {
        let prompt = PromptTemplate::new(100).build_prompt(2, 624);
        assert!(prompt.contains("100 for 1 UE and 200 for 2 UEs"));
        assert!(prompt.contains("the following 2 and 624 meet"));
        assert!(prompt.starts_with("PLEASE ONLY OUTPUT IN A WORD"));
    }

    #[test]
    fn oracle_boundary_is_legitimate() {
        assert_eq!(rule_oracle_classify(1, 312), Label::Legitimate);
        assert_eq!(rule_oracle_classify(1, 313), Label::Malicious);
        assert_eq!(rule_oracle_classify(2, 624), Label::Legitimate);
        assert_eq!(rule_oracle_classify(2, 625), Label::Malicious);
        assert_eq!(rule_oracle_classify(3, 936), Label::Legitimate);
        assert_eq!(rule_oracle_classify(3, 937), Label::Malicious);
        assert_eq!(rule_oracle_classify(1, 0), Label::Legitimate);
    }

    #[test]
    fn static_threshold_needs_the_full_confirmation_run() {
        let history = [true, true, false, true, true, true];
        let first_malicious = (1..=history.len())
            .find(|&end| static_threshold_classify(&history[..end], 3) == Label::Malicious);
        assert_eq!(first_malicious, Some(6)); // prefix ending at index 5
        assert_eq!(static_threshold_classify(&[], 3), Label::Legitimate);
        assert_eq!(static_threshold_classify(&[true], 1), Label::Malicious);
        assert_eq!(
            static_threshold_classify(&[false, true], 2),
            Label::Legitimate
        );
    }

    #[test]
    fn verdict_parsing_is_keyword_based_and_case_insensitive() {
        assert_eq!(parse_verdict_text("Legitimate"), Ok(Label::Legitimate));
        assert_eq!(parse_verdict_text("MALICIOUS"), Ok(Label::Malicious));
        assert_eq!(
            parse_verdict_text("The traffic looks *malicious* to me."),
            Ok(Label::Malicious)
        );
        assert_eq!(parse_verdict_text("legitimate\n"), Ok(Label::Legitimate));
        assert_eq!(
            parse_verdict_text("could be legitimate or malicious"),
            Err(VerdictParseError::BothKeywords)
        );
        assert_eq!(
            parse_verdict_text("I cannot tell."),
            Err(VerdictParseError::NoKeyword)
        );
    }

    #[test]
    fn mock_llm_extremes_are_exact() {
        let mut perfect = MockLlm::new(1.0, DEFAULT_BASE_LIMIT, 1).unwrap();
        let mut inverted = MockLlm::new(0.0, DEFAULT_BASE_LIMIT, 1).unwrap();
        for tx in (0..4000).step_by(13) {
            let truth = rule_oracle_classify(1, tx);
            assert_eq!(perfect.classify(1, tx), truth);
            assert_eq!(inverted.classify(1, tx), truth.flipped());
        }
    }

    #[test]
    fn mock_llm_is_deterministic_per_seed() {
        let mut a = MockLlm::new(0.7, DEFAULT_BASE_LIMIT, 99).unwrap();
        let mut b = MockLlm::new(0.7, DEFAULT_BASE_LIMIT, 99).unwrap();
        let mut c = MockLlm::new(0.7, DEFAULT_BASE_LIMIT, 100).unwrap();
        let run =
            |m: &mut MockLlm| -> Vec<Label> { (0..200).map(|i| m.classify(1, i * 7)).collect() };
        let ra = run(&mut a);
        assert_eq!(ra, run(&mut b));
        assert_ne!(ra, run(&mut c));
    }

    #[test]
    fn mock_llm_rejects_bad_accuracy() {
        assert!(MockLlm::new(-0.1, 312, 0).is_err());
        assert!(MockLlm::new(1.1, 312, 0).is_err());
        assert!(MockLlm::new(f64::NAN, 312, 0).is_err());
    }

    #[test]
    fn detector_config_validation_catches_bad_fields() {
        assert_eq!(
            DetectorConfig::RuleOracle {
                base_limit_per_ue: 0
            }
            .validate(),
            Err(DetectorConfigError::ZeroBaseLimit)
        );
        assert_eq!(
            DetectorConfig::StaticThreshold {
                threshold_pkts: 312,
                confirmations: 0
            }
            .validate(),
            Err(DetectorConfigError::ZeroConfirmations)
        );
        assert!(matches!(
            DetectorConfig::MockLlm {
                accuracy: 2.0,
                base_limit_per_ue: 312
            }
            .validate(),
            Err(DetectorConfigError::Mock(_))
        ));
        let external = DetectorConfig::ExternalLlm {
            endpoint: String::new(),
            model: "gemma2".to_string(),
            timeout_ms: 10_000,
            max_retries: 2,
            base_limit_per_ue: 312,
        };
        assert_eq!(external.validate(), Err(DetectorConfigError::EmptyEndpoint));
        let no_client = DetectorConfig::ExternalLlm {
            endpoint: "http://localhost:11434/v1/chat/completions".to_string(),
            model: "gemma2".to_string(),
            timeout_ms: 10_000,
            max_retries: 2,
            base_limit_per_ue: 312,
        };
        assert!(matches!(
            no_client.build(0, None),
            Err(DetectorConfigError::MissingClient)
        ));
    }

    /// Scripted stand-in for an endpoint, used to exercise the external path
    /// without any transport.
    struct ScriptedClient {
        replies: Vec<Result<ChatReply, ChatError>>,
        calls: usize,
    }

    impl ChatClient for ScriptedClient {
        fn complete(&mut self, _prompt: &str) -> Result<ChatReply, ChatError> {
            let reply = self.replies[self.calls].clone();
            self.calls += 1;
            reply
        }
    }

    fn external_detector(replies: Vec<Result<ChatReply, ChatError>>) -> Detector {
        Detector::ExternalLlm {
            client: Box::new(ScriptedClient { replies, calls: 0 }),
            template: PromptTemplate::default(),
        }
    }

    #[test]
    fn external_backend_parses_replies_and_reports_failures() {
        let mut detector = external_detector(alloc::vec![
            Ok(ChatReply {
                text: "Legitimate".to_string(),
                round_trip_ms: 240
            }),
            Ok(ChatReply {
                text: "It is **Malicious**!".to_string(),
                round_trip_ms: 180
            }),
            Ok(ChatReply {
                text: "no idea".to_string(),
                round_trip_ms: 90
            }),
            Err(ChatError::Timeout { after_ms: 10_000 }),
        ]);

        let ok = detector.classify_sample(1, 300);
        assert_eq!(ok.label, Some(Label::Legitimate));
        assert_eq!(ok.round_trip_ms, 240);
        assert!(ok.prompt.as_deref().unwrap().contains("1 and 300"));

        let mal = detector.classify_sample(1, 936);
        assert_eq!(mal.label, Some(Label::Malicious));

        let unp = detector.classify_sample(1, 100);
        assert_eq!(unp.label, None);
        assert_eq!(unp.raw_text.as_deref(), Some("no idea"));
        assert!(unp.error.as_deref().unwrap().contains("neither"));

        let failed = detector.classify_sample(1, 100);
        assert_eq!(failed.label, None);
        assert!(failed.error.as_deref().unwrap().contains("timed out"));
    }

    #[test]
    fn xapp_alerts_once_per_episode() {
        let config = DetectorConfig::RuleOracle {
            base_limit_per_ue: 312,
        };
        let mut xapp = DetectionXapp::new(config.build(0, None).unwrap(), false);

        assert!(xapp.process_report(&report(1, 312, 1000), 1001).is_none());
        let alert = xapp.process_report(&report(1, 936, 2000), 2001).unwrap();
        assert_eq!(alert.ue, UeId(1));
        assert_eq!(alert.verdict.label, Some(Label::Malicious));
        assert_eq!(alert.verdict.detector, DetectorKind::RuleOracle);

        // Still awaiting the ack: no duplicate alert.
        assert!(xapp.process_report(&report(1, 936, 3000), 3001).is_none());
        // Confirmed quarantine: the episode is closed, still no alert.
        xapp.handle_ack(&ack(1, true));
        assert!(xapp.process_report(&report(1, 936, 4000), 4001).is_none());
        assert_eq!(xapp.verdicts().len(), 4);
    }

    #[test]
    fn failed_ack_rearms_detection() {
        let config = DetectorConfig::RuleOracle {
            base_limit_per_ue: 312,
        };
        let mut xapp = DetectionXapp::new(config.build(0, None).unwrap(), false);

        assert!(xapp.process_report(&report(1, 936, 1000), 1001).is_some());
        xapp.handle_ack(&ack(1, false));
        assert!(xapp.process_report(&report(1, 936, 2000), 2001).is_some());
    }

    #[test]
    fn alerts_are_tracked_per_ue() {
        let config = DetectorConfig::RuleOracle {
            base_limit_per_ue: 312,
        };
        let mut xapp = DetectionXapp::new(config.build(0, None).unwrap(), false);
        assert!(xapp.process_report(&report(1, 936, 1000), 1001).is_some());
        assert!(xapp.process_report(&report(2, 936, 1000), 1001).is_some());
        assert!(xapp.process_report(&report(2, 936, 2000), 2001).is_none());
    }

    #[test]
    fn undecided_raises_no_alert_by_default() {
        let mut xapp = DetectionXapp::new(
            external_detector(alloc::vec![
                Err(ChatError::Transport("connection refused".to_string())),
                Err(ChatError::Transport("connection refused".to_string())),
            ]),
            false,
        );
        assert!(xapp.process_report(&report(1, 936, 1000), 1001).is_none());
        assert_eq!(xapp.undecided(), 1);
        assert_eq!(xapp.verdicts()[0].label, None);

        // The flipped policy quarantines on the same failure.
        let mut aggressive = DetectionXapp::new(
            external_detector(alloc::vec![Err(ChatError::Transport(
                "connection refused".to_string()
            ))]),
            true,
        );
        assert!(aggressive
            .process_report(&report(1, 936, 1000), 1001)
            .is_some());
    }

    #[test]
    fn exchanges_are_recorded_for_model_backends_only() {
        let mock_config = DetectorConfig::MockLlm {
            accuracy: 1.0,
            base_limit_per_ue: 312,
        };
        let mut mock_xapp = DetectionXapp::new(mock_config.build(3, None).unwrap(), false);
        mock_xapp.process_report(&report(1, 936, 1000), 1001);
        assert_eq!(mock_xapp.exchanges().len(), 1);
        let exchange = &mock_xapp.exchanges()[0];
        assert!(exchange.prompt.contains("1 and 936"));
        assert_eq!(exchange.raw_response.as_deref(), Some("Malicious"));
        assert_eq!(exchange.parsed, Some(Label::Malicious));

        let oracle_config = DetectorConfig::RuleOracle {
            base_limit_per_ue: 312,
        };
        let mut oracle_xapp = DetectionXapp::new(oracle_config.build(0, None).unwrap(), false);
        oracle_xapp.process_report(&report(1, 936, 1000), 1001);
        assert!(oracle_xapp.exchanges().is_empty());
    }

    #[test]
    fn static_streaks_are_kept_per_ue_in_the_pipeline_path() {
        let config = DetectorConfig::StaticThreshold {
            threshold_pkts: 312,
            confirmations: 3,
        };
        let mut xapp = DetectionXapp::new(config.build(0, None).unwrap(), false);
        // Two exceedances, a reset, then the real run of three.
        for (tx, t) in [
            (936, 1000),
            (936, 2000),
            (100, 3000),
            (936, 4000),
            (936, 5000),
        ] {
            assert!(xapp.process_report(&report(1, tx, t), t + 1).is_none());
        }
        // Interleaved traffic from another UE must not advance UE 1's streak.
        assert!(xapp.process_report(&report(2, 936, 5000), 5001).is_none());
        let alert = xapp.process_report(&report(1, 936, 6000), 6001);
        assert!(alert.is_some());
    }

    proptest! {
        /// The oracle agrees with the brute-force predicate everywhere, not
        /// just at the frozen boundary cases.
        #[test]
        fn oracle_matches_the_predicate(num_ues in 1u32..12, tx_pkts in 0u64..8000) {
            let expected = if tx_pkts > 312 * u64::from(num_ues) {
                Label::Malicious
            } else {
                Label::Legitimate
            };
            prop_assert_eq!(rule_oracle_classify(num_ues, tx_pkts), expected);
        }

        /// Prompt rendering keeps the frozen frame and embeds the inputs.
        #[test]
        fn prompt_always_contains_its_inputs(num_ues in 1u32..10, tx_pkts in 0u64..10_000) {
            let prompt = PromptTemplate::default().build_prompt(num_ues, tx_pkts);
            let inputs = alloc::format!("the following {num_ues} and {tx_pkts} meet");
            prop_assert!(prompt.contains("TX Pack limits of 312 for 1 UE and 624 for 2 UEs"));
            prop_assert!(prompt.contains(&inputs));
        }
    }
}
