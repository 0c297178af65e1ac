//! Cycle-level simulator of a dual-hardware-thread, single-issue in-order
//! core whose two pipelines share one blocking L1 memory unit, together
//! with an assembler for its instruction set, a cooperative "side-kick"
//! runtime, and a benchmark harness.

pub mod asm;
pub mod config;
pub mod report;
pub mod sidekick;
pub mod core;
pub mod pipeline;
pub mod isa;
pub mod memunit;
pub mod workloads;
