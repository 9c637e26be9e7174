//! Secure-slicing xApp: converts alerts into quarantine control requests and
//! tracks each mitigation from alert to ack.
//!
//! The xApp is deliberately dumb about *why* a UE was flagged; its whole job
//! is target selection (the quarantine slice, whose PRB budget is zero) and
//! bookkeeping. Alerts for UEs that are already quarantined or already have a
//! request in flight are recorded as duplicates and produce no control
//! traffic, so a chatty detector cannot amplify into a control-plane flood.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bus::{Alert, SliceControlAck, SliceControlReq};
use crate::kpm::{SliceId, TimeMs, UeId};

/// Lifecycle of one alert as seen by the secure-slicing xApp. Duplicates get
/// a record too (with no request id) so a run's history shows every alert
/// that arrived, not only the ones acted on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationRecord {
    pub ue: UeId,
    pub alert_time: TimeMs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_sent: Option<TimeMs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ack_time: Option<TimeMs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
    pub duplicate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub request_id: Option<u64>,
}

pub struct SlicingXapp {
    next_request_id: u64,
    quarantined: BTreeSet<UeId>,
    pending: BTreeSet<UeId>,
    open: BTreeMap<u64, usize>,
    records: Vec<MitigationRecord>,
    anomalies: u64,
}

impl Default for SlicingXapp {
    fn default() -> Self {
        Self::new()
    }
}

impl SlicingXapp {
    pub fn new() -> Self {
        SlicingXapp {
            next_request_id: 1,
            quarantined: BTreeSet::new(),
            pending: BTreeSet::new(),
            open: BTreeMap::new(),
            records: Vec::new(),
            anomalies: 0,
        }
    }

    /// Handles one alert. Returns the control request to publish, or `None`
    /// when the alert is a duplicate for a UE already handled.
    pub fn handle_alert(&mut self, alert: &Alert, now: TimeMs) -> Option<SliceControlReq> {
        let ue = alert.ue;
        if self.quarantined.contains(&ue) || self.pending.contains(&ue) {
            self.records.push(MitigationRecord {
                ue,
                alert_time: now,
                control_sent: None,
                ack_time: None,
                success: None,
                duplicate: true,
                request_id: None,
            });
            return None;
        }
        let request_id = self.next_request_id;
        self.next_request_id += 1;
        self.pending.insert(ue);
        self.open.insert(request_id, self.records.len());
        self.records.push(MitigationRecord {
            ue,
            alert_time: now,
            control_sent: Some(now),
            ack_time: None,
            success: None,
            duplicate: false,
            request_id: Some(request_id),
        });
        Some(SliceControlReq {
            request_id,
            ue,
            target_slice: SliceId::QUARANTINE,
        })
    }

    /// Folds an ack into the matching open record. Acks that match no open
    /// request are counted as anomalies and otherwise ignored.
    pub fn handle_ack(&mut self, ack: &SliceControlAck, now: TimeMs) {
        let Some(idx) = self.open.remove(&ack.request_id) else {
            self.anomalies += 1;
            return;
        };
        let record = &mut self.records[idx];
        if record.ue != ack.ue {
            // E2 echoes the UE from the request; a mismatch means something
            // upstream is corrupting ids. Count it but keep the record.
            self.anomalies += 1;
        }
        record.ack_time = Some(now);
        record.success = Some(ack.success);
        self.pending.remove(&record.ue);
        if ack.success {
            self.quarantined.insert(record.ue);
        }
    }

    pub fn is_quarantined(&self, ue: UeId) -> bool {
        self.quarantined.contains(&ue)
    }

    pub fn quarantined(&self) -> &BTreeSet<UeId> {
        &self.quarantined
    }

    pub fn records(&self) -> &[MitigationRecord] {
        &self.records
    }

    pub fn anomalies(&self) -> u64 {
        self.anomalies
    }

    pub fn into_records(self) -> Vec<MitigationRecord> {
        self.records
    }
}
