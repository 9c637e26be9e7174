//! Simulated RAN node behind the E2 interface: slice-aware PRB scheduler,
//! KPM report emission and slice-control handling.
//!
//! The scheduler splits each slice's PRB budget across its UEs in proportion
//! to *requested* demand. That rule is the vulnerability the rest of the
//! pipeline exists to catch: a UE that inflates its requests is rewarded with
//! a larger share and starves its neighbours. Mitigation does not patch the
//! scheduler; it moves the offender to the zero-budget quarantine slice.
//!
//! All arithmetic is integer. Rates are kept in kbps (0.3 Mbps per PRB =
//! 300 kbps), demand accumulates as kbit·ms (numerically equal to bits), and
//! packet counts come from a fixed calibration of 31.2 request packets per
//! second per Mbps of demand, so a 10 Mbps UE produces exactly 312 `tx_pkts`
//! per one-second report.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bus::{SliceControlAck, SliceControlReq};
use crate::kpm::{KpmReport, SliceConfig, SliceId, TimeMs, UeId};

/// Cell-level constants. Defaults model a 20 MHz cell: 100 PRBs, each worth
/// 0.3 Mbps of downlink capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellConfig {
    pub bandwidth_mhz: u32,
    pub total_prbs: u32,
    pub rate_per_prb_kbps: u64,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig {
            bandwidth_mhz: 20,
            total_prbs: 100,
            rate_per_prb_kbps: 300,
        }
    }
}

/// Traffic profile of one UE. A non-attacker requests `demand_kbps` forever;
/// an attacker multiplies its requests by `attack_multiplier_permille / 1000`
/// from `attack_onset_ms` onwards (3000 = the usual three-fold flood).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UeProfile {
    pub id: UeId,
    pub demand_kbps: u64,
    pub attacker: bool,
    pub attack_onset_ms: TimeMs,
    pub attack_multiplier_permille: u32,
    /// Optional multiplicative noise on per-tick link capacity, in permille.
    /// Zero (the default) keeps the run exactly reproducible on paper.
    pub rate_noise_permille: u32,
}

impl UeProfile {
    pub fn legit(id: UeId, demand_kbps: u64) -> Self {
        UeProfile {
            id,
            demand_kbps,
            attacker: false,
            attack_onset_ms: 0,
            attack_multiplier_permille: 1000,
            rate_noise_permille: 0,
        }
    }

    pub fn attacker(
        id: UeId,
        demand_kbps: u64,
        attack_onset_ms: TimeMs,
        attack_multiplier_permille: u32,
    ) -> Self {
        UeProfile {
            id,
            demand_kbps,
            attacker: true,
            attack_onset_ms,
            attack_multiplier_permille,
            rate_noise_permille: 0,
        }
    }

    /// Demand the UE asks the scheduler for at time `now`.
    pub fn requested_kbps(&self, now: TimeMs) -> u64 {
        if self.attacker && now >= self.attack_onset_ms {
            self.demand_kbps * u64::from(self.attack_multiplier_permille) / 1000
        } else {
            self.demand_kbps
        }
    }
}

/// Slice definitions plus the UE-to-slice binding map. The quarantine slice
/// (id 0, zero budget) is always present; [`SliceTable::new`] inserts it when
/// the caller does not list it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceTable {
    slices: Vec<SliceConfig>,
    bindings: BTreeMap<UeId, SliceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SliceTableError {
    #[error("duplicate slice id {0}")]
    DuplicateSlice(SliceId),
    #[error("quarantine slice must have a zero PRB budget, got {0}")]
    QuarantineBudgetNonZero(u32),
    #[error("unknown slice {0}")]
    UnknownSlice(SliceId),
}

impl SliceTable {
    pub fn new(mut slices: Vec<SliceConfig>) -> Result<Self, SliceTableError> {
        let mut seen = Vec::new();
        for slice in &slices {
            if seen.contains(&slice.id) {
                return Err(SliceTableError::DuplicateSlice(slice.id));
            }
            if slice.id.is_quarantine() && slice.prb_budget != 0 {
                return Err(SliceTableError::QuarantineBudgetNonZero(slice.prb_budget));
            }
            seen.push(slice.id);
        }
        if !seen.contains(&SliceId::QUARANTINE) {
            slices.push(SliceConfig::quarantine());
        }
        Ok(SliceTable {
            slices,
            bindings: BTreeMap::new(),
        })
    }

    pub fn bind(&mut self, ue: UeId, slice: SliceId) -> Result<(), SliceTableError> {
        if self.get(slice).is_none() {
            return Err(SliceTableError::UnknownSlice(slice));
        }
        self.bindings.insert(ue, slice);
        Ok(())
    }

    pub fn slice_of(&self, ue: UeId) -> Option<SliceId> {
        self.bindings.get(&ue).copied()
    }

    pub fn get(&self, id: SliceId) -> Option<&SliceConfig> {
        self.slices.iter().find(|s| s.id == id)
    }

    pub fn slices(&self) -> &[SliceConfig] {
        &self.slices
    }

    /// UEs bound to `slice`, in UE id order (BTreeMap iteration order).
    pub fn ues_in(&self, slice: SliceId) -> Vec<UeId> {
        self.bindings
            .iter()
            .filter(|(_, s)| **s == slice)
            .map(|(ue, _)| *ue)
            .collect()
    }

    /// UEs currently bound to a serving (non-quarantine) slice.
    pub fn active_ue_count(&self) -> u32 {
        self.bindings
            .values()
            .filter(|s| !s.is_quarantine())
            .count() as u32
    }
}

/// Outcome of one scheduler tick for one UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub ue: UeId,
    pub slice: SliceId,
    pub prbs: u32,
    pub requested_kbps: u64,
    pub achieved_kbps: u64,
}

/// Splits `budget` PRBs across UEs in proportion to their demands, using
/// largest-remainder rounding. Ties go to the lowest UE id, so the result is
/// a pure function of its inputs. With all-equal demands the shares differ by
/// at most one PRB.
pub fn proportional_split(budget: u32, demands: &[(UeId, u64)]) -> Vec<u32> {
    let total: u128 = demands.iter().map(|(_, d)| u128::from(*d)).sum();
    if total == 0 || demands.is_empty() {
        return alloc::vec![0; demands.len()];
    }
    let budget = u128::from(budget);
    let mut shares: Vec<u32> = Vec::with_capacity(demands.len());
    // Remainders scaled by `total` so they compare without division.
    let mut remainders: Vec<(u128, UeId, usize)> = Vec::with_capacity(demands.len());
    let mut assigned: u128 = 0;
    for (idx, (ue, demand)) in demands.iter().enumerate() {
        let exact = budget * u128::from(*demand);
        let floor = exact / total;
        shares.push(floor as u32);
        assigned += floor;
        remainders.push((exact - floor * total, *ue, idx));
    }
    let mut leftover = (budget - assigned) as usize;
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, _, idx) in remainders {
        if leftover == 0 {
            break;
        }
        shares[idx] += 1;
        leftover -= 1;
    }
    shares
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum E2Error {
    #[error("duplicate UE id {0}")]
    DuplicateUe(UeId),
    #[error("{0} has zero demand")]
    ZeroDemand(UeId),
    #[error("{0} is not bound to any slice")]
    UnboundUe(UeId),
    #[error("report interval {0} ms outside supported range 1..=1000 ms")]
    ReportIntervalOutOfRange(u64),
}

/// Request packets per second per Mbps of demand, scaled by ten to stay in
/// integers (31.2 pkts/s/Mbps). kbit·ms values divide by 10^7 to apply it.
const PKT_CALIBRATION_X10: u128 = 312;
const PKT_CALIBRATION_DEN: u128 = 10_000_000;

/// Nominal size of one uplink resource-request packet.
const REQUEST_PACKET_BYTES: u64 = 128;

fn packets_from_kbit_ms(kbit_ms: u128) -> u64 {
    // Round half-up; the calibration target (10 Mbps over 1 s = 312 packets)
    // must come out exact.
    ((kbit_ms * PKT_CALIBRATION_X10 + PKT_CALIBRATION_DEN / 2) / PKT_CALIBRATION_DEN) as u64
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, Default)]
struct IntervalAccum {
    requested_kbit_ms: u128,
    achieved_kbit_ms: u128,
    prb_ticks: u64,
    ticks: u64,
}

/// The simulated node: scheduler state plus per-interval KPI accumulators.
#[derive(Debug)]
pub struct E2Node {
    cell: CellConfig,
    table: SliceTable,
    profiles: Vec<UeProfile>,
    noise_seed: u64,
    accum: BTreeMap<UeId, IntervalAccum>,
}

impl E2Node {
    pub fn new(
        cell: CellConfig,
        table: SliceTable,
        mut profiles: Vec<UeProfile>,
        noise_seed: u64,
    ) -> Result<Self, E2Error> {
        profiles.sort_by_key(|p| p.id);
        for pair in profiles.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(E2Error::DuplicateUe(pair[0].id));
            }
        }
        for profile in &profiles {
            if profile.demand_kbps == 0 {
                return Err(E2Error::ZeroDemand(profile.id));
            }
            if table.slice_of(profile.id).is_none() {
                return Err(E2Error::UnboundUe(profile.id));
            }
        }
        Ok(E2Node {
            cell,
            table,
            profiles,
            noise_seed,
            accum: BTreeMap::new(),
        })
    }

    pub fn cell(&self) -> &CellConfig {
        &self.cell
    }

    pub fn table(&self) -> &SliceTable {
        &self.table
    }

    pub fn profiles(&self) -> &[UeProfile] {
        &self.profiles
    }

    /// Runs one scheduler tick: allocates each slice's budget across its UEs
    /// by current demand and accrues the interval KPI counters. Returns the
    /// allocations in UE id order.
    pub fn tick(&mut self, now: TimeMs, tick_ms: u64) -> Vec<Allocation> {
        let mut out: Vec<Allocation> = Vec::with_capacity(self.profiles.len());
        for slice in &self.table.slices {
            let members: Vec<&UeProfile> = self
                .profiles
                .iter()
                .filter(|p| self.table.slice_of(p.id) == Some(slice.id))
                .collect();
            if members.is_empty() {
                continue;
            }
            let demands: Vec<(UeId, u64)> = members
                .iter()
                .map(|p| (p.id, p.requested_kbps(now)))
                .collect();
            let shares = if slice.prb_budget == 0 {
                alloc::vec![0; members.len()]
            } else {
                proportional_split(slice.prb_budget, &demands)
            };
            for (profile, (&prbs, &(ue, requested))) in
                members.iter().zip(shares.iter().zip(demands.iter()))
            {
                let mut capacity = u64::from(prbs) * self.cell.rate_per_prb_kbps;
                if profile.rate_noise_permille > 0 {
                    let span = u64::from(profile.rate_noise_permille) * 2 + 1;
                    let draw = splitmix64(self.noise_seed ^ (u64::from(ue.0) << 32) ^ now) % span;
                    let factor = 1000 + draw - u64::from(profile.rate_noise_permille);
                    capacity = capacity * factor / 1000;
                }
                let achieved = capacity.min(requested);
                out.push(Allocation {
                    ue,
                    slice: slice.id,
                    prbs,
                    requested_kbps: requested,
                    achieved_kbps: achieved,
                });
            }
        }
        out.sort_by_key(|a| a.ue);
        for alloc in &out {
            let acc = self.accum.entry(alloc.ue).or_default();
            acc.requested_kbit_ms += u128::from(alloc.requested_kbps) * u128::from(tick_ms);
            acc.achieved_kbit_ms += u128::from(alloc.achieved_kbps) * u128::from(tick_ms);
            acc.prb_ticks += u64::from(alloc.prbs);
            acc.ticks += 1;
        }
        out
    }

    /// Emits one KPM report per bound UE covering the interval that ends now,
    /// and resets the accumulators. Call order matters at a boundary: emit
    /// first, then tick, so an interval never absorbs the next tick.
    pub fn emit_reports(
        &mut self,
        now: TimeMs,
        interval_ms: u64,
    ) -> Result<Vec<KpmReport>, E2Error> {
        if interval_ms == 0 || interval_ms > 1000 {
            return Err(E2Error::ReportIntervalOutOfRange(interval_ms));
        }
        let num_ues = self.table.active_ue_count();
        let mut reports = Vec::with_capacity(self.profiles.len());
        for profile in &self.profiles {
            let acc = self.accum.remove(&profile.id).unwrap_or_default();
            let slice = self
                .table
                .slice_of(profile.id)
                .expect("bound at construction");
            let tx_pkts = packets_from_kbit_ms(acc.requested_kbit_ms);
            let rx_pkts = packets_from_kbit_ms(acc.achieved_kbit_ms);
            reports.push(KpmReport {
                timestamp: now,
                ue: profile.id,
                slice,
                // kbit·ms equals bits, so bytes are an exact divide-by-eight.
                dl_bytes: (acc.achieved_kbit_ms / 8) as u64,
                ul_bytes: tx_pkts * REQUEST_PACKET_BYTES,
                dl_prbs: acc.prb_ticks.checked_div(acc.ticks).unwrap_or(0) as u32,
                ul_prbs: 0,
                tx_pkts,
                rx_pkts,
                tx_errors: 0,
                ul_errors: 0,
                num_ues,
            });
        }
        Ok(reports)
    }

    /// Applies a slice-control request. Rebinding takes effect immediately,
    /// which in the driving loop means between scheduler ticks; the next tick
    /// already schedules under the new binding. Unknown UEs or slices produce
    /// a failed ack and change nothing.
    pub fn apply_slice_control(&mut self, req: &SliceControlReq, now: TimeMs) -> SliceControlAck {
        let known_ue = self.profiles.iter().any(|p| p.id == req.ue);
        let error: Option<String> = if !known_ue {
            Some("unknown ue".to_string())
        } else if self.table.get(req.target_slice).is_none() {
            Some("unknown slice".to_string())
        } else {
            None
        };
        if error.is_none() {
            self.table
                .bind(req.ue, req.target_slice)
                .expect("slice existence checked above");
        }
        SliceControlAck {
            request_id: req.request_id,
            ue: req.ue,
            success: error.is_none(),
            applied_at: now,
            error,
        }
    }
}
