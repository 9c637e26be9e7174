//! Host-side half of the pipeline model: scenario files, artifact writers,
//! the HTTP chat client and the CLI commands. Everything deterministic lives
//! in `sliceguard-core`; this crate is where bytes touch disks and sockets.

pub mod commands;
pub mod llm_http;
pub mod outputs;
pub mod scenario_io;
