//! Scenario description: everything a run needs, in one validated value.
//!
//! A scenario is pure integer data (kbps, permille multipliers, virtual
//! milliseconds) so that two loads of the same file can never disagree about
//! a float. The host crate parses TOML into this struct; the default
//! constructor encodes the canonical single-cell setup the pipeline is
//! normally exercised with.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::detection::{DetectorConfig, DetectorConfigError};
use crate::kpm::{SliceConfig, SliceId, TimeMs, UeId};
use crate::ran::{CellConfig, UeProfile};

/// How classification reads reports: polled out of the monitoring store (the
/// deployed shape, detection sees whatever has landed in the database) or
/// subscribed directly to the bus indications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportPath {
    Database,
    DirectBus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub cell: CellConfig,
    /// Traffic slices; the quarantine slice is implicit and always present.
    pub slices: Vec<SliceConfig>,
    pub ues: Vec<UeProfile>,
    pub bindings: Vec<(UeId, SliceId)>,
    pub report_interval_ms: u64,
    pub tick_ms: u64,
    pub duration_ms: TimeMs,
    pub bus_hop_latency_ms: u64,
    pub detector: DetectorConfig,
    pub quarantine_on_undecided: bool,
    pub report_path: ReportPath,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario declares no UEs")]
    NoUes,
    #[error("duplicate UE id {0}")]
    DuplicateUe(UeId),
    #[error("duplicate slice id {0}")]
    DuplicateSlice(SliceId),
    #[error("quarantine slice must keep a zero PRB budget, found {0}")]
    QuarantineBudgetNonZero(u32),
    #[error("{0} has zero demand")]
    ZeroDemand(UeId),
    #[error("{0} is bound to no slice")]
    UnboundUe(UeId),
    #[error("{0} is bound more than once")]
    DuplicateBinding(UeId),
    #[error("{ue} is bound to undeclared slice {slice}")]
    UnknownSlice { ue: UeId, slice: SliceId },
    #[error("{0} may not start inside the quarantine slice")]
    BoundToQuarantine(UeId),
    #[error("slice budgets total {total_budget} PRBs but the cell has {total_prbs}")]
    BudgetExceeded { total_budget: u64, total_prbs: u32 },
    #[error("cell must have at least one PRB and a nonzero per-PRB rate")]
    ZeroCellCapacity,
    #[error("tick_ms must be at least 1")]
    ZeroTick,
    #[error("report_interval_ms {0} outside 1..=1000")]
    ReportIntervalOutOfRange(u64),
    #[error("report_interval_ms {interval} is not a multiple of tick_ms {tick}")]
    IntervalNotTickMultiple { interval: u64, tick: u64 },
    #[error("duration_ms {duration} is shorter than one report interval {interval}")]
    DurationTooShort { duration: TimeMs, interval: u64 },
    #[error("attacker {ue} onset {onset} lies beyond duration {duration}")]
    OnsetBeyondDuration {
        ue: UeId,
        onset: TimeMs,
        duration: TimeMs,
    },
    #[error("bus_hop_latency_ms must be at least 1")]
    ZeroHopLatency,
    #[error(transparent)]
    Detector(#[from] DetectorConfigError),
}

impl Scenario {
    /// The canonical run: one 20 MHz cell (100 PRBs at 300 kbps each), three
    /// eMBB UEs each demanding 10 Mbps, UE 1 turning attacker at 170 s with
    /// tripled demand, 400 s total, KPM reports every second on a 100 ms
    /// scheduling tick.
    pub fn default_attack() -> Self {
        Scenario {
            name: String::from("paper_default"),
            cell: CellConfig::default(),
            slices: alloc::vec![SliceConfig {
                id: SliceId(1),
                name: String::from("embb"),
                prb_budget: 100,
            }],
            ues: alloc::vec![
                UeProfile::attacker(UeId(1), 10_000, 170_000, 3_000),
                UeProfile::legit(UeId(2), 10_000),
                UeProfile::legit(UeId(3), 10_000),
            ],
            bindings: alloc::vec![
                (UeId(1), SliceId(1)),
                (UeId(2), SliceId(1)),
                (UeId(3), SliceId(1)),
            ],
            report_interval_ms: 1_000,
            tick_ms: 100,
            duration_ms: 400_000,
            bus_hop_latency_ms: 1,
            detector: DetectorConfig::default(),
            quarantine_on_undecided: false,
            report_path: ReportPath::Database,
            seed: 42,
        }
    }

    pub fn attackers(&self) -> impl Iterator<Item = &UeProfile> {
        self.ues.iter().filter(|ue| ue.attacker)
    }

    /// Checks every cross-field rule. Field-level parse errors are the
    /// host's job; everything here is about values that parsed fine but
    /// cannot describe a runnable system.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.ues.is_empty() {
            return Err(ScenarioError::NoUes);
        }
        if self.cell.total_prbs == 0 || self.cell.rate_per_prb_kbps == 0 {
            return Err(ScenarioError::ZeroCellCapacity);
        }

        let mut slice_ids: Vec<SliceId> = Vec::new();
        let mut total_budget: u64 = 0;
        for slice in &self.slices {
            if slice_ids.contains(&slice.id) {
                return Err(ScenarioError::DuplicateSlice(slice.id));
            }
            if slice.id.is_quarantine() && slice.prb_budget != 0 {
                return Err(ScenarioError::QuarantineBudgetNonZero(slice.prb_budget));
            }
            slice_ids.push(slice.id);
            total_budget += u64::from(slice.prb_budget);
        }
        if total_budget > u64::from(self.cell.total_prbs) {
            return Err(ScenarioError::BudgetExceeded {
                total_budget,
                total_prbs: self.cell.total_prbs,
            });
        }

        let mut ue_ids: Vec<UeId> = Vec::new();
        for ue in &self.ues {
            if ue_ids.contains(&ue.id) {
                return Err(ScenarioError::DuplicateUe(ue.id));
            }
            ue_ids.push(ue.id);
            if ue.demand_kbps == 0 {
                return Err(ScenarioError::ZeroDemand(ue.id));
            }
            if ue.attacker && ue.attack_onset_ms > self.duration_ms {
                return Err(ScenarioError::OnsetBeyondDuration {
                    ue: ue.id,
                    onset: ue.attack_onset_ms,
                    duration: self.duration_ms,
                });
            }
        }

        let mut bound: Vec<UeId> = Vec::new();
        for (ue, slice) in &self.bindings {
            if bound.contains(ue) {
                return Err(ScenarioError::DuplicateBinding(*ue));
            }
            bound.push(*ue);
            if slice.is_quarantine() {
                return Err(ScenarioError::BoundToQuarantine(*ue));
            }
            if !slice_ids.contains(slice) {
                return Err(ScenarioError::UnknownSlice {
                    ue: *ue,
                    slice: *slice,
                });
            }
        }
        for ue in &ue_ids {
            if !bound.contains(ue) {
                return Err(ScenarioError::UnboundUe(*ue));
            }
        }

        if self.tick_ms == 0 {
            return Err(ScenarioError::ZeroTick);
        }
        if !(1..=1000).contains(&self.report_interval_ms) {
            return Err(ScenarioError::ReportIntervalOutOfRange(
                self.report_interval_ms,
            ));
        }
        if !self.report_interval_ms.is_multiple_of(self.tick_ms) {
            return Err(ScenarioError::IntervalNotTickMultiple {
                interval: self.report_interval_ms,
                tick: self.tick_ms,
            });
        }
        if self.duration_ms < self.report_interval_ms {
            return Err(ScenarioError::DurationTooShort {
                duration: self.duration_ms,
                interval: self.report_interval_ms,
            });
        }
        if self.bus_hop_latency_ms == 0 {
            return Err(ScenarioError::ZeroHopLatency);
        }
        self.detector.validate()?;
        Ok(())
    }
}
