//! Typed pub/sub bus standing in for the RIC message router.
//!
//! Components register once, subscribe to message kinds, and pull their inbox
//! with [`Bus::drain`]. A message published at `t` becomes visible to its
//! subscribers at `t + hop_latency_ms`, never earlier. Ordering is exact and
//! load-bearing for reproducibility:
//!
//! * per sender, sequence numbers are strictly increasing and receivers see
//!   them in that order (FIFO per sender);
//! * across senders, messages are totally ordered by (publish time, publish
//!   call order), and the driving loop runs components in registration order,
//!   so equal-time messages always land in registration order.
//!
//! Every published message is also appended to an in-memory trace, which is
//! what the replay check compares byte-for-byte.

use alloc::collections::VecDeque;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kpm::{KpmReport, SliceId, TimeMs, UeId, Verdict};

/// Index handed out by [`Bus::register`]; doubles as registration order.
pub type ComponentId = usize;

/// Detection output: one flagged UE plus the verdict that flagged it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub ue: UeId,
    pub verdict: Verdict,
}

/// Request to rebind a UE to a target slice, normally the quarantine slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceControlReq {
    pub request_id: u64,
    pub ue: UeId,
    pub target_slice: SliceId,
}

/// E2 node answer to a [`SliceControlReq`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceControlAck {
    pub request_id: u64,
    pub ue: UeId,
    pub success: bool,
    /// Virtual time at which the node applied (or refused) the rebind.
    pub applied_at: TimeMs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Message kinds a component can subscribe to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    KpmIndication,
    Alert,
    SliceControlReq,
    SliceControlAck,
}

const KIND_COUNT: usize = 4;

impl MessageKind {
    const fn index(self) -> usize {
        match self {
            MessageKind::KpmIndication => 0,
            MessageKind::Alert => 1,
            MessageKind::SliceControlReq => 2,
            MessageKind::SliceControlAck => 3,
        }
    }
}

/// Payload union; the serialized form tags each trace line with its kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "kebab-case")]
pub enum MessagePayload {
    KpmIndication(KpmReport),
    Alert(Alert),
    SliceControlReq(SliceControlReq),
    SliceControlAck(SliceControlAck),
}

impl MessagePayload {
    pub const fn kind(&self) -> MessageKind {
        match self {
            MessagePayload::KpmIndication(_) => MessageKind::KpmIndication,
            MessagePayload::Alert(_) => MessageKind::Alert,
            MessagePayload::SliceControlReq(_) => MessageKind::SliceControlReq,
            MessagePayload::SliceControlAck(_) => MessageKind::SliceControlAck,
        }
    }
}

/// One bus message as traced and as delivered to subscribers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusMessage {
    pub sender: String,
    /// Per-sender sequence number, starting at 0.
    pub seq: u64,
    pub sent_at: TimeMs,
    #[serde(flatten)]
    pub payload: MessagePayload,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("component `{0}` is already registered")]
    DuplicateComponent(String),
    #[error("unknown component id {0}")]
    UnknownComponent(ComponentId),
    #[error("component `{component}` already subscribes to {kind:?}")]
    DuplicateSubscription {
        component: String,
        kind: MessageKind,
    },
    #[error("publish at t={now} after t={latest} would reorder the bus")]
    TimeRegression { now: TimeMs, latest: TimeMs },
}

/// Delivery bookkeeping, exposed so a run can assert nothing was lost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BusCounters {
    /// Messages accepted by `publish`.
    pub published: u64,
    /// Sum over publishes of the subscriber count at publish time.
    pub expected_deliveries: u64,
    /// Messages handed out by `drain`.
    pub delivered: u64,
}

struct Component {
    name: String,
    next_seq: u64,
    inbox: VecDeque<Queued>,
}

struct Queued {
    ready_at: TimeMs,
    msg: BusMessage,
}

pub struct Bus {
    hop_latency_ms: u64,
    components: Vec<Component>,
    subscribers: [Vec<ComponentId>; KIND_COUNT],
    trace: Vec<BusMessage>,
    counters: BusCounters,
    latest_publish: TimeMs,
}

impl Bus {
    pub fn new(hop_latency_ms: u64) -> Self {
        Bus {
            hop_latency_ms,
            components: Vec::new(),
            subscribers: Default::default(),
            trace: Vec::new(),
            counters: BusCounters::default(),
            latest_publish: 0,
        }
    }

    pub fn hop_latency_ms(&self) -> u64 {
        self.hop_latency_ms
    }

    /// Registers a component under a unique name. The returned id encodes
    /// registration order and is what equal-time ordering falls back to.
    pub fn register(&mut self, name: &str) -> Result<ComponentId, BusError> {
        if self.components.iter().any(|c| c.name == name) {
            return Err(BusError::DuplicateComponent(name.to_string()));
        }
        self.components.push(Component {
            name: name.to_string(),
            next_seq: 0,
            inbox: VecDeque::new(),
        });
        Ok(self.components.len() - 1)
    }

    pub fn subscribe(&mut self, who: ComponentId, kind: MessageKind) -> Result<(), BusError> {
        let component = self
            .components
            .get(who)
            .ok_or(BusError::UnknownComponent(who))?;
        let subs = &mut self.subscribers[kind.index()];
        if subs.contains(&who) {
            return Err(BusError::DuplicateSubscription {
                component: component.name.clone(),
                kind,
            });
        }
        subs.push(who);
        Ok(())
    }

    /// Publishes a message and returns how many subscriber inboxes it entered.
    /// Zero subscribers is legal (the message is still traced). Publishing
    /// into the past is not: time regressions would silently reorder inboxes.
    pub fn publish(
        &mut self,
        sender: ComponentId,
        now: TimeMs,
        payload: MessagePayload,
    ) -> Result<usize, BusError> {
        if now < self.latest_publish {
            return Err(BusError::TimeRegression {
                now,
                latest: self.latest_publish,
            });
        }
        let kind = payload.kind();
        let msg = {
            let component = self
                .components
                .get_mut(sender)
                .ok_or(BusError::UnknownComponent(sender))?;
            let seq = component.next_seq;
            component.next_seq += 1;
            BusMessage {
                sender: component.name.clone(),
                seq,
                sent_at: now,
                payload,
            }
        };
        self.latest_publish = now;
        let ready_at = now + self.hop_latency_ms;
        let targets = self.subscribers[kind.index()].clone();
        for &target in &targets {
            self.components[target].inbox.push_back(Queued {
                ready_at,
                msg: msg.clone(),
            });
        }
        self.counters.published += 1;
        self.counters.expected_deliveries += targets.len() as u64;
        self.trace.push(msg);
        Ok(targets.len())
    }

    /// Removes and returns every message in `who`'s inbox that has reached
    /// its delivery time. Inboxes are queued in publish order, so the ready
    /// prefix is exactly the deliverable set.
    pub fn drain(&mut self, who: ComponentId, now: TimeMs) -> Vec<BusMessage> {
        let inbox = &mut self.components[who].inbox;
        let mut out = Vec::new();
        while inbox.front().is_some_and(|q| q.ready_at <= now) {
            out.push(inbox.pop_front().unwrap().msg);
        }
        self.counters.delivered += out.len() as u64;
        out
    }

    /// Messages queued but not yet drained, across all inboxes.
    pub fn pending(&self) -> usize {
        self.components.iter().map(|c| c.inbox.len()).sum()
    }

    pub fn counters(&self) -> BusCounters {
        self.counters
    }

    pub fn trace(&self) -> &[BusMessage] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<BusMessage> {
        self.trace
    }

    pub fn component_name(&self, id: ComponentId) -> Option<&str> {
        self.components.get(id).map(|c| c.name.as_str())
    }
}
