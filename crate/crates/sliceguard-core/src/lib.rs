//! Deterministic model of a near-RT RIC security loop.
//!
//! The crate simulates the data path of an O-RAN intrusion response pipeline
//! on a virtual millisecond clock: a RAN node schedules PRBs across slices and
//! emits per-UE KPM reports, a monitoring xApp stores them, a detection xApp
//! classifies each report with one of several interchangeable backends (rule
//! oracle, static threshold, chat-completions LLM, seeded mock LLM), and a
//! secure-slicing xApp quarantines flagged UEs by rebinding them to a
//! zero-budget slice. All messages travel over a typed pub/sub bus with a
//! fixed per-hop latency, so two runs with the same scenario and seed produce
//! byte-identical traces.
//!
//! The crate is `no_std` + `alloc`; everything that touches files, sockets or
//! wall-clock time lives in the companion `sliceguard` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bus;
pub mod detection;
pub mod eval;
pub mod kpimon;
pub mod kpm;
pub mod pipeline;
pub mod ran;
pub mod scenario;
pub mod slicing;

pub use kpm::{KpmReport, Label, SliceId, TimeMs, UeId, Verdict};
