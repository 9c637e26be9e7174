//! The closed loop: E2 node, monitoring, detection and secure slicing driven
//! by one virtual millisecond clock.
//!
//! Each millisecond every component gets one slot, always in the same order:
//! E2 node, KPIMON, detection, secure slicing. A slot drains the component's
//! inbox and lets it publish. With the default one-millisecond hop latency a
//! message published in slot N is visible to every subscriber in the next
//! millisecond, regardless of slot order, which keeps the end-to-end timing
//! independent of where a component happens to sit in the cycle:
//!
//! ```text
//! t        report published (E2 slot, interval boundary)
//! t+1      KPIMON ingests; detection classifies and publishes the alert
//! t+2      secure slicing converts the alert into a control request
//! t+3      E2 rebinds the UE into quarantine and acks
//! t+4      secure slicing (and detection) observe the ack
//! ```
//!
//! Three hops from alert to observed ack; the next scheduler tick after t+3
//! already runs without the quarantined UE competing for PRBs. After the
//! configured duration the loop keeps draining (no new ticks or reports)
//! until the bus is empty, so in-flight mitigations always complete.

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bus::{Bus, BusCounters, BusError, BusMessage, MessageKind, MessagePayload};
use crate::detection::{ChatClient, DetectionXapp, DetectorConfigError, LlmExchange};
use crate::kpimon::{DroppedReport, KpimonXapp, StoreError};
use crate::kpm::{DetectorKind, KpmReport, SliceId, TimeMs, UeId, Verdict};
use crate::ran::{E2Error, E2Node, SliceTable, SliceTableError};
use crate::scenario::{ReportPath, Scenario, ScenarioError};
use crate::slicing::{MitigationRecord, SlicingXapp};

/// One UE's share of one scheduler tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickSample {
    pub time_ms: TimeMs,
    pub ue: UeId,
    pub slice: SliceId,
    pub prbs: u32,
    pub requested_kbps: u64,
    pub achieved_kbps: u64,
}

/// Milestones of a run, in chronological order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum RunEvent {
    AttackOnset {
        t: TimeMs,
        ue: UeId,
    },
    AlertPublished {
        t: TimeMs,
        ue: UeId,
        report_timestamp: TimeMs,
        detector: DetectorKind,
    },
    ControlSent {
        t: TimeMs,
        ue: UeId,
        request_id: u64,
    },
    ControlApplied {
        t: TimeMs,
        ue: UeId,
        request_id: u64,
        success: bool,
    },
    AckObserved {
        t: TimeMs,
        ue: UeId,
        request_id: u64,
        success: bool,
    },
    ReportDropped {
        t: TimeMs,
        ue: UeId,
    },
}

impl RunEvent {
    pub fn time(&self) -> TimeMs {
        match *self {
            RunEvent::AttackOnset { t, .. }
            | RunEvent::AlertPublished { t, .. }
            | RunEvent::ControlSent { t, .. }
            | RunEvent::ControlApplied { t, .. }
            | RunEvent::AckObserved { t, .. }
            | RunEvent::ReportDropped { t, .. } => t,
        }
    }
}

/// Everything a finished run leaves behind. All of it is deterministic for a
/// given scenario (virtual clock, seeded randomness, total bus order), so any
/// two runs of the same scenario compare equal field by field.
pub struct RunArtifacts {
    pub scenario: Scenario,
    pub ticks: Vec<TickSample>,
    pub events: Vec<RunEvent>,
    pub verdicts: Vec<Verdict>,
    pub exchanges: Vec<LlmExchange>,
    pub mitigations: Vec<MitigationRecord>,
    pub reports: Vec<KpmReport>,
    pub dropped_reports: Vec<DroppedReport>,
    pub undecided: u64,
    pub anomalies: u64,
    pub trace: Vec<BusMessage>,
    pub counters: BusCounters,
    pub end_time: TimeMs,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    SliceTable(#[from] SliceTableError),
    #[error(transparent)]
    E2(#[from] E2Error),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Detector(#[from] DetectorConfigError),
    #[error("bus still holds {pending} messages after the drain grace period")]
    BusNotQuiescent { pending: usize },
}

/// Runs one scenario to completion. The chat client is only consulted when
/// the scenario selects the external-LLM backend; passing `None` with any
/// other backend is the normal case.
pub fn run_scenario(
    scenario: &Scenario,
    client: Option<Box<dyn ChatClient>>,
) -> Result<RunArtifacts, RunError> {
    scenario.validate()?;

    let mut table = SliceTable::new(scenario.slices.clone())?;
    for &(ue, slice) in &scenario.bindings {
        table.bind(ue, slice)?;
    }
    let mut e2 = E2Node::new(scenario.cell, table, scenario.ues.clone(), scenario.seed)?;
    let mut kpimon = KpimonXapp::new(scenario.cell.total_prbs);
    let mut detection = DetectionXapp::new(
        scenario.detector.build(scenario.seed, client)?,
        scenario.quarantine_on_undecided,
    );
    let mut slicing = SlicingXapp::new();

    let mut bus = Bus::new(scenario.bus_hop_latency_ms);
    let e2_id = bus.register("e2-node")?;
    let kpimon_id = bus.register("kpimon")?;
    let detection_id = bus.register("detection")?;
    let slicing_id = bus.register("secure-slicing")?;
    bus.subscribe(e2_id, MessageKind::SliceControlReq)?;
    bus.subscribe(kpimon_id, MessageKind::KpmIndication)?;
    bus.subscribe(detection_id, MessageKind::SliceControlAck)?;
    if scenario.report_path == ReportPath::DirectBus {
        bus.subscribe(detection_id, MessageKind::KpmIndication)?;
    }
    bus.subscribe(slicing_id, MessageKind::Alert)?;
    bus.subscribe(slicing_id, MessageKind::SliceControlAck)?;

    let mut ticks: Vec<TickSample> = Vec::new();
    let mut events: Vec<RunEvent> = Vec::new();
    let mut store_cursor = 0usize;

    let duration = scenario.duration_ms;
    let interval = scenario.report_interval_ms;
    let tick = scenario.tick_ms;
    // Longest chain left after the final report: indication, alert, control
    // request, ack, each one hop apart, with slack for a retry after a
    // failed ack. Anything still queued after that is a wiring bug.
    let grace = 8 * scenario.bus_hop_latency_ms + 8;
    let deadline = duration + grace;

    let mut now: TimeMs = 0;
    let end_time = loop {
        let in_run = now <= duration;
        if in_run {
            for ue in scenario.attackers() {
                if ue.attack_onset_ms == now {
                    events.push(RunEvent::AttackOnset { t: now, ue: ue.id });
                }
            }
        }

        // E2 node slot: apply pending control, then report the interval that
        // just ended, then schedule the next tick. Emitting before ticking
        // keeps each interval to exactly its own ticks.
        for msg in bus.drain(e2_id, now) {
            if let MessagePayload::SliceControlReq(req) = msg.payload {
                let ack = e2.apply_slice_control(&req, now);
                events.push(RunEvent::ControlApplied {
                    t: now,
                    ue: req.ue,
                    request_id: req.request_id,
                    success: ack.success,
                });
                bus.publish(e2_id, now, MessagePayload::SliceControlAck(ack))?;
            }
        }
        if in_run && now > 0 && now.is_multiple_of(interval) {
            for report in e2.emit_reports(now, interval)? {
                bus.publish(e2_id, now, MessagePayload::KpmIndication(report))?;
            }
        }
        if now < duration && now.is_multiple_of(tick) {
            for alloc in e2.tick(now, tick) {
                ticks.push(TickSample {
                    time_ms: now,
                    ue: alloc.ue,
                    slice: alloc.slice,
                    prbs: alloc.prbs,
                    requested_kbps: alloc.requested_kbps,
                    achieved_kbps: alloc.achieved_kbps,
                });
            }
        }

        // KPIMON slot: validate and store whatever arrived.
        for msg in bus.drain(kpimon_id, now) {
            if let MessagePayload::KpmIndication(report) = msg.payload {
                let (ue, _ts) = (report.ue, report.timestamp);
                if kpimon.ingest(report).is_err() {
                    events.push(RunEvent::ReportDropped { t: now, ue });
                }
            }
        }

        // Detection slot: fold in acks first (they can close or re-arm an
        // episode), then classify new reports from the configured path.
        let mut fresh: Vec<KpmReport> = Vec::new();
        for msg in bus.drain(detection_id, now) {
            match msg.payload {
                MessagePayload::SliceControlAck(ack) => detection.handle_ack(&ack),
                MessagePayload::KpmIndication(report) => fresh.push(report),
                _ => {}
            }
        }
        if scenario.report_path == ReportPath::Database {
            let batch = kpimon.store_mut().fetch_since("detection", store_cursor)?;
            store_cursor += batch.len();
            fresh.extend_from_slice(batch);
        }
        for report in &fresh {
            if let Some(alert) = detection.process_report(report, now) {
                events.push(RunEvent::AlertPublished {
                    t: now,
                    ue: alert.ue,
                    report_timestamp: report.timestamp,
                    detector: alert.verdict.detector,
                });
                bus.publish(detection_id, now, MessagePayload::Alert(alert))?;
            }
        }

        // Secure-slicing slot: alerts become quarantine requests, acks close
        // the mitigation records.
        for msg in bus.drain(slicing_id, now) {
            match msg.payload {
                MessagePayload::Alert(alert) => {
                    if let Some(req) = slicing.handle_alert(&alert, now) {
                        events.push(RunEvent::ControlSent {
                            t: now,
                            ue: req.ue,
                            request_id: req.request_id,
                        });
                        bus.publish(slicing_id, now, MessagePayload::SliceControlReq(req))?;
                    }
                }
                MessagePayload::SliceControlAck(ack) => {
                    events.push(RunEvent::AckObserved {
                        t: now,
                        ue: ack.ue,
                        request_id: ack.request_id,
                        success: ack.success,
                    });
                    slicing.handle_ack(&ack, now);
                }
                _ => {}
            }
        }

        if now >= duration {
            if bus.pending() == 0 {
                break now;
            }
            if now >= deadline {
                return Err(RunError::BusNotQuiescent {
                    pending: bus.pending(),
                });
            }
        }
        now += 1;
    };

    let (verdicts, exchanges, undecided) = detection.into_outputs();
    let anomalies = slicing.anomalies();
    let counters = bus.counters();
    Ok(RunArtifacts {
        scenario: scenario.clone(),
        ticks,
        events,
        verdicts,
        exchanges,
        mitigations: slicing.into_records(),
        reports: kpimon.store().reports().to_vec(),
        dropped_reports: kpimon.drops().to_vec(),
        undecided,
        anomalies,
        trace: bus.into_trace(),
        counters,
        end_time,
    })
}
