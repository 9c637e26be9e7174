//! KPM domain types shared by every stage of the pipeline.
//!
//! A [`KpmReport`] is one periodic per-UE KPI snapshot as the E2 node emits
//! it. The wire-adjacent CSV layout is fixed: twelve columns in the order of
//! [`KPM_CSV_HEADER`], one report per row, integers only. Counters are
//! per-interval deltas, not lifetime totals, so a report can be classified on
//! its own without history.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Virtual time in milliseconds since scenario start.
pub type TimeMs = u64;

/// UE identifier, unique within a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UeId(pub u32);

impl fmt::Display for UeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ue{}", self.0)
    }
}

/// Network slice identifier. Slice 0 is reserved for quarantine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SliceId(pub u32);

impl SliceId {
    /// The quarantine slice: always present, zero PRB budget, never scheduled.
    pub const QUARANTINE: SliceId = SliceId(0);

    pub const fn is_quarantine(self) -> bool {
        self.0 == Self::QUARANTINE.0
    }
}

impl fmt::Display for SliceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "slice{}", self.0)
    }
}

/// Static description of a slice: identity plus its PRB budget per tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceConfig {
    pub id: SliceId,
    pub name: String,
    /// PRBs the scheduler may hand to this slice each tick.
    pub prb_budget: u32,
}

impl SliceConfig {
    pub fn quarantine() -> Self {
        SliceConfig {
            id: SliceId::QUARANTINE,
            name: "quarantine".to_string(),
            prb_budget: 0,
        }
    }
}

/// Column order of the KPM CSV format. Fixed; both serializer and parser
/// refuse anything else.
pub const KPM_CSV_HEADER: &str =
    "timestamp,ue,slice,dl_bytes,ul_bytes,dl_prbs,ul_prbs,tx_pkts,rx_pkts,tx_errors,ul_errors,num_ues";

const KPM_CSV_COLUMNS: [&str; 12] = [
    "timestamp",
    "ue",
    "slice",
    "dl_bytes",
    "ul_bytes",
    "dl_prbs",
    "ul_prbs",
    "tx_pkts",
    "rx_pkts",
    "tx_errors",
    "ul_errors",
    "num_ues",
];

/// One per-UE KPI snapshot covering a single report interval.
///
/// `tx_pkts`/`ul_bytes` count uplink resource-request traffic the UE sent,
/// `rx_pkts`/`dl_bytes` count downlink traffic it actually received, and
/// `dl_prbs` is the mean per-tick PRB allocation over the interval. A UE that
/// floods requests from inside the quarantine slice therefore still shows a
/// high `tx_pkts` while `dl_bytes` collapses to zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KpmReport {
    /// Emission time, i.e. the end of the covered interval.
    pub timestamp: TimeMs,
    pub ue: UeId,
    pub slice: SliceId,
    pub dl_bytes: u64,
    pub ul_bytes: u64,
    pub dl_prbs: u32,
    pub ul_prbs: u32,
    pub tx_pkts: u64,
    pub rx_pkts: u64,
    pub tx_errors: u64,
    pub ul_errors: u64,
    /// UEs bound to non-quarantine slices at emission time.
    pub num_ues: u32,
}

impl KpmReport {
    /// Renders the report as one CSV row in [`KPM_CSV_HEADER`] column order.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.timestamp,
            self.ue.0,
            self.slice.0,
            self.dl_bytes,
            self.ul_bytes,
            self.dl_prbs,
            self.ul_prbs,
            self.tx_pkts,
            self.rx_pkts,
            self.tx_errors,
            self.ul_errors,
            self.num_ues,
        )
    }

    /// Parses one CSV row. Errors name the offending column so a corrupted
    /// capture points at the byte that broke, not just "bad line".
    pub fn from_csv_row(row: &str) -> Result<Self, CsvRowError> {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != KPM_CSV_COLUMNS.len() {
            return Err(CsvRowError::FieldCount {
                expected: KPM_CSV_COLUMNS.len(),
                found: fields.len(),
            });
        }
        fn parse<T: core::str::FromStr>(column: &'static str, raw: &str) -> Result<T, CsvRowError> {
            raw.trim().parse().map_err(|_| CsvRowError::Parse {
                column,
                value: raw.to_string(),
            })
        }
        Ok(KpmReport {
            timestamp: parse(KPM_CSV_COLUMNS[0], fields[0])?,
            ue: UeId(parse(KPM_CSV_COLUMNS[1], fields[1])?),
            slice: SliceId(parse(KPM_CSV_COLUMNS[2], fields[2])?),
            dl_bytes: parse(KPM_CSV_COLUMNS[3], fields[3])?,
            ul_bytes: parse(KPM_CSV_COLUMNS[4], fields[4])?,
            dl_prbs: parse(KPM_CSV_COLUMNS[5], fields[5])?,
            ul_prbs: parse(KPM_CSV_COLUMNS[6], fields[6])?,
            tx_pkts: parse(KPM_CSV_COLUMNS[7], fields[7])?,
            rx_pkts: parse(KPM_CSV_COLUMNS[8], fields[8])?,
            tx_errors: parse(KPM_CSV_COLUMNS[9], fields[9])?,
            ul_errors: parse(KPM_CSV_COLUMNS[10], fields[10])?,
            num_ues: parse(KPM_CSV_COLUMNS[11], fields[11])?,
        })
    }
}

/// Why a CSV row failed to parse.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CsvRowError {
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("column {column}: cannot parse `{value}` as an integer")]
    Parse { column: &'static str, value: String },
}

/// A single violated report invariant, as found by [`validate_report`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum KpmViolation {
    TxErrorsExceedTxPkts { tx_errors: u64, tx_pkts: u64 },
    UlErrorsExceedRxPkts { ul_errors: u64, rx_pkts: u64 },
    NoActiveUes,
    PrbBudgetExceeded { used: u32, cell_prbs: u32 },
}

impl fmt::Display for KpmViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KpmViolation::TxErrorsExceedTxPkts { tx_errors, tx_pkts } => {
                write!(f, "tx_errors {tx_errors} exceeds tx_pkts {tx_pkts}")
            }
            KpmViolation::UlErrorsExceedRxPkts { ul_errors, rx_pkts } => {
                write!(f, "ul_errors {ul_errors} exceeds rx_pkts {rx_pkts}")
            }
            KpmViolation::NoActiveUes => write!(f, "num_ues is zero"),
            KpmViolation::PrbBudgetExceeded { used, cell_prbs } => {
                write!(f, "PRB budget exceeded: {used} used of {cell_prbs}")
            }
        }
    }
}

/// Checks every report invariant and returns all violations, not just the
/// first. An empty vector means the report is acceptable.
pub fn validate_report(report: &KpmReport, cell_prbs: u32) -> Vec<KpmViolation> {
    let mut violations = Vec::new();
    if report.tx_errors > report.tx_pkts {
        violations.push(KpmViolation::TxErrorsExceedTxPkts {
            tx_errors: report.tx_errors,
            tx_pkts: report.tx_pkts,
        });
    }
    if report.ul_errors > report.rx_pkts {
        violations.push(KpmViolation::UlErrorsExceedRxPkts {
            ul_errors: report.ul_errors,
            rx_pkts: report.rx_pkts,
        });
    }
    if report.num_ues == 0 {
        violations.push(KpmViolation::NoActiveUes);
    }
    let used = report.dl_prbs.saturating_add(report.ul_prbs);
    if used > cell_prbs {
        violations.push(KpmViolation::PrbBudgetExceeded { used, cell_prbs });
    }
    violations
}

/// Classification outcome vocabulary. These two words are also the exact
/// strings the dataset generator writes and the response parser looks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Legitimate,
    Malicious,
}

impl Label {
    pub const fn as_str(self) -> &'static str {
        match self {
            Label::Legitimate => "Legitimate",
            Label::Malicious => "Malicious",
        }
    }

    pub const fn flipped(self) -> Self {
        match self {
            Label::Legitimate => Label::Malicious,
            Label::Malicious => Label::Legitimate,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which backend produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    RuleOracle,
    StaticThreshold,
    ExternalLlm,
    MockLlm,
}

impl DetectorKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            DetectorKind::RuleOracle => "rule-oracle",
            DetectorKind::StaticThreshold => "static-threshold",
            DetectorKind::ExternalLlm => "external-llm",
            DetectorKind::MockLlm => "mock-llm",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One classification of one report. `label` is `None` when the backend could
/// not decide (transport failure, unparseable model output); undecided is
/// deliberately distinct from both real labels so it can be reported instead
/// of silently counting as either.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub ue: UeId,
    pub report_timestamp: TimeMs,
    pub label: Option<Label>,
    pub detector: DetectorKind,
    /// Model output verbatim, when a model was involved.
    pub raw_text: Option<String>,
    /// Wall-clock time spent deciding; zero for the instant backends.
    pub decision_latency_ms: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_report() -> KpmReport {
        KpmReport {
            timestamp: 171_000,
            ue: UeId(1),
            slice: SliceId(1),
            dl_bytes: 2_250_000,
            ul_bytes: 119_808,
            dl_prbs: 60,
            ul_prbs: 0,
            tx_pkts: 936,
            rx_pkts: 562,
            tx_errors: 0,
            ul_errors: 0,
            num_ues: 3,
        }
    }

    #[test]
    fn csv_header_matches_column_list() {
        assert_eq!(KPM_CSV_HEADER, KPM_CSV_COLUMNS.join(","));
    }

    #[test]
    fn csv_row_layout_is_fixed() {
        let row = sample_report().to_csv_row();
        assert_eq!(row, "171000,1,1,2250000,119808,60,0,936,562,0,0,3");
    }

    #[test]
    fn csv_round_trip_preserves_every_field() {
        let report = sample_report();
        let parsed = KpmReport::from_csv_row(&report.to_csv_row()).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn csv_parse_rejects_short_rows() {
        let err = KpmReport::from_csv_row("1,2,3").unwrap_err();
        assert_eq!(
            err,
            CsvRowError::FieldCount {
                expected: 12,
                found: 3
            }
        );
    }

    #[test]
    fn csv_parse_names_the_bad_column() {
        let row = "171000,1,1,2250000,119808,60,0,not-a-number,562,0,0,3";
        let err = KpmReport::from_csv_row(row).unwrap_err();
        match err {
            CsvRowError::Parse { column, ref value } => {
                assert_eq!(column, "tx_pkts");
                assert_eq!(value, "not-a-number");
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err.to_string().contains("tx_pkts"));
    }

    #[test]
    fn csv_parse_rejects_negative_counters() {
        let row = "171000,1,1,-5,119808,60,0,936,562,0,0,3";
        let err = KpmReport::from_csv_row(row).unwrap_err();
        assert!(matches!(
            err,
            CsvRowError::Parse {
                column: "dl_bytes",
                ..
            }
        ));
    }

    #[test]
    fn valid_report_produces_no_violations() {
        assert!(validate_report(&sample_report(), 100).is_empty());
    }

    #[test]
    fn error_counters_cannot_exceed_packet_counters() {
        let mut report = sample_report();
        report.tx_errors = report.tx_pkts + 1;
        report.ul_errors = report.rx_pkts + 1;
        let violations = validate_report(&report, 100);
        assert_eq!(violations.len(), 2);
        assert!(violations
            .iter()
            .any(|v| matches!(v, KpmViolation::TxErrorsExceedTxPkts { .. })));
        assert!(violations
            .iter()
            .any(|v| matches!(v, KpmViolation::UlErrorsExceedRxPkts { .. })));
    }

    #[test]
    fn prb_overrun_is_flagged() {
        let mut report = sample_report();
        report.dl_prbs = 101;
        let violations = validate_report(&report, 100);
        assert_eq!(
            violations,
            [KpmViolation::PrbBudgetExceeded {
                used: 101,
                cell_prbs: 100
            }]
        );
        assert_eq!(
            violations[0].to_string(),
            "PRB budget exceeded: 101 used of 100"
        );
    }

    #[test]
    fn zero_active_ues_is_flagged() {
        let mut report = sample_report();
        report.num_ues = 0;
        assert_eq!(validate_report(&report, 100), [KpmViolation::NoActiveUes]);
    }

    #[test]
    fn label_words_match_the_dataset_vocabulary() {
        assert_eq!(Label::Legitimate.as_str(), "Legitimate");
        assert_eq!(Label::Malicious.as_str(), "Malicious");
        assert_eq!(Label::Legitimate.flipped(), Label::Malicious);
        assert_eq!(Label::Malicious.flipped(), Label::Legitimate);
    }

    #[test]
    fn quarantine_slice_is_slice_zero() {
        assert!(SliceId::QUARANTINE.is_quarantine());
        assert!(!SliceId(1).is_quarantine());
        let q = SliceConfig::quarantine();
        assert_eq!(q.id, SliceId(0));
        assert_eq!(q.prb_budget, 0);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_identity(
            timestamp in 0u64..10_000_000,
            ue in 0u32..1000,
            slice in 0u32..16,
            dl_bytes in 0u64..u64::MAX / 2,
            ul_bytes in 0u64..u64::MAX / 2,
            dl_prbs in 0u32..1000,
            ul_prbs in 0u32..1000,
            tx_pkts in 0u64..1_000_000,
            rx_pkts in 0u64..1_000_000,
            tx_errors in 0u64..1_000_000,
            ul_errors in 0u64..1_000_000,
            num_ues in 0u32..64,
        ) {
            let report = KpmReport {
                timestamp,
                ue: UeId(ue),
                slice: SliceId(slice),
                dl_bytes,
                ul_bytes,
                dl_prbs,
                ul_prbs,
                tx_pkts,
                rx_pkts,
                tx_errors,
                ul_errors,
                num_ues,
            };
            let parsed = KpmReport::from_csv_row(&report.to_csv_row()).unwrap();
            prop_assert_eq!(parsed, report);
        }
    }
}
