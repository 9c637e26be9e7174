//! Monitoring xApp: ingests KPM indications, keeps them in an append-only
//! store and serves batches to downstream readers.
//!
//! Ingest validates each report against the cell configuration; anything
//! invalid is dropped and counted rather than stored, so one corrupt report
//! cannot poison the detection path. Readers pull with an explicit position,
//! which makes a fetch idempotent: asking twice from the same position
//! returns the same reports because the store never reorders or rewrites.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kpm::{validate_report, KpmReport, KpmViolation, TimeMs, UeId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("fetch position {position} is beyond the store end {len}")]
    PositionBeyondEnd { position: usize, len: usize },
}

/// Append-only report log with per-consumer read cursors.
#[derive(Debug, Default)]
pub struct ReportStore {
    reports: Vec<KpmReport>,
    cursors: BTreeMap<String, usize>,
}

impl ReportStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn reports(&self) -> &[KpmReport] {
        &self.reports
    }

    fn append(&mut self, report: KpmReport) {
        self.reports.push(report);
    }

    /// Returns every report at or after `position` in arrival order and
    /// remembers `consumer`'s new high-water mark. The caller advances its
    /// position to `position + returned.len()` for the next call.
    pub fn fetch_since(
        &mut self,
        consumer: &str,
        position: usize,
    ) -> Result<&[KpmReport], StoreError> {
        if position > self.reports.len() {
            return Err(StoreError::PositionBeyondEnd {
                position,
                len: self.reports.len(),
            });
        }
        self.cursors
            .insert(consumer.to_string(), self.reports.len());
        Ok(&self.reports[position..])
    }

    /// Last observed high-water mark for a consumer, if it ever fetched.
    pub fn cursor(&self, consumer: &str) -> Option<usize> {
        self.cursors.get(consumer).copied()
    }
}

/// A report that failed validation on ingest, kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedReport {
    pub timestamp: TimeMs,
    pub ue: UeId,
    pub violations: Vec<KpmViolation>,
}

/// The monitoring xApp proper: validation gate in front of a [`ReportStore`].
#[derive(Debug)]
pub struct KpimonXapp {
    cell_prbs: u32,
    store: ReportStore,
    drops: Vec<DroppedReport>,
}

impl KpimonXapp {
    pub fn new(cell_prbs: u32) -> Self {
        KpimonXapp {
            cell_prbs,
            store: ReportStore::new(),
            drops: Vec::new(),
        }
    }

    /// Validates and stores one report. Invalid reports are dropped, counted
    /// and returned as an error listing every violated invariant.
    pub fn ingest(&mut self, report: KpmReport) -> Result<(), Vec<KpmViolation>> {
        let violations = validate_report(&report, self.cell_prbs);
        if violations.is_empty() {
            self.store.append(report);
            Ok(())
        } else {
            self.drops.push(DroppedReport {
                timestamp: report.timestamp,
                ue: report.ue,
                violations: violations.clone(),
            });
            Err(violations)
        }
    }

    pub fn store(&self) -> &ReportStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ReportStore {
        &mut self.store
    }

    pub fn dropped(&self) -> u64 {
        self.drops.len() as u64
    }

    pub fn drops(&self) -> &[DroppedReport] {
        &self.drops
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kpm::SliceId;
    use proptest::prelude::*;

    fn report(ue: u32, timestamp: TimeMs) -> KpmReport {
        KpmReport {
            timestamp,
            ue: UeId(ue),
            slice: SliceId(1),
            dl_bytes: 1_250_000,
            ul_bytes: 39_936,
            dl_prbs: 33,
            ul_prbs: 0,
            tx_pkts: 312,
            rx_pkts: 309,
            tx_errors: 0,
            ul_errors: 0,
            num_ues: 3,
        }
    }

    #[test]
    fn fetch_returns_ingested_reports_in_order() {
        let mut xapp = KpimonXapp::new(100);
        xapp.ingest(report(1, 1000)).unwrap();
        xapp.ingest(report(2, 1000)).unwrap();
        let got = xapp.store_mut().fetch_since("detection", 0).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].ue, UeId(1));
        assert_eq!(got[1].ue, UeId(2));
        assert_eq!(xapp.store().cursor("detection"), Some(2));
    }

    #[test]
    fn fetch_is_idempotent_for_a_position() {
        let mut xapp = KpimonXapp::new(100);
        for i in 0..5 {
            xapp.ingest(report(i, 1000)).unwrap();
        }
        let first: Vec<KpmReport> = xapp.store_mut().fetch_since("a", 2).unwrap().to_vec();
        let second: Vec<KpmReport> = xapp.store_mut().fetch_since("a", 2).unwrap().to_vec();
        assert_eq!(first, second);
        assert_eq!(first.len(), 3);
    }

    #[test]
    fn fetch_beyond_the_end_is_an_error() {
        let mut store = ReportStore::new();
        assert_eq!(
            store.fetch_since("x", 1).unwrap_err(),
            StoreError::PositionBeyondEnd {
                position: 1,
                len: 0
            }
        );
        // Fetching exactly at the end is fine and returns nothing.
        assert!(store.fetch_since("x", 0).unwrap().is_empty());
    }

    #[test]
    fn invalid_reports_are_dropped_and_counted() {
        let mut xapp = KpimonXapp::new(100);
        let mut bad = report(1, 1000);
        bad.dl_prbs = 101;
        let violations = xapp.ingest(bad).unwrap_err();
        assert_eq!(violations.len(), 1);
        assert_eq!(xapp.dropped(), 1);
        assert!(xapp.store().is_empty());
        assert_eq!(xapp.drops()[0].ue, UeId(1));

        xapp.ingest(report(2, 1000)).unwrap();
        assert_eq!(xapp.store().len(), 1);
        assert_eq!(xapp.dropped(), 1);
    }

    #[test]
    fn default_scenario_volume_is_twelve_hundred_reports() {
        // Three UEs reporting once a second for 400 seconds.
        let mut xapp = KpimonXapp::new(100);
        for interval in 1..=400u64 {
            for ue in 1..=3 {
                xapp.ingest(report(ue, interval * 1000)).unwrap();
            }
        }
        assert_eq!(xapp.store().len(), 1200);
        assert_eq!(xapp.dropped(), 0);
    }

    proptest! {
        /// A reader that always resumes from its previous high-water mark
        /// sees every stored report exactly once, whatever the interleaving.
        #[test]
        fn resumed_fetches_partition_the_store(
            batches in proptest::collection::vec(0usize..5, 1..20)
        ) {
            let mut xapp = KpimonXapp::new(100);
            let mut position = 0;
            let mut seen: Vec<KpmReport> = Vec::new();
            let mut total = 0u32;
            for batch in batches {
                for _ in 0..batch {
                    xapp.ingest(report(total, 1000)).unwrap();
                    total += 1;
                }
                let got = xapp.store_mut().fetch_since("reader", position).unwrap();
                position += got.len();
                seen.extend_from_slice(got);
            }
            let tail = xapp.store_mut().fetch_since("reader", position).unwrap();
            seen.extend_from_slice(tail);
            prop_assert_eq!(seen.as_slice(), xapp.store().reports());
        }
    }
}
