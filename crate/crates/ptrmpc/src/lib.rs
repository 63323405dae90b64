//! Host-side tooling for `ptrmpc-core`: TCP transport, run orchestration,
//! file formats, and benchmark drivers.

pub mod bench;
pub mod formats;
pub mod programs;
pub mod runner;
pub mod tcp;
