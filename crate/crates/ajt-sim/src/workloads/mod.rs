//! The nine benchmark workloads, each as hand-written assembly with a
//! host-side input generator and brute-force oracle. Every workload comes
//! in two shapes: a sequential variant for the single-threaded scenarios
//! and a partitioned variant for the dual-active scenario. Both produce
//! bit-identical final memory output.

mod bellman;
mod daxpy;
mod dotprod;
mod ecg;
pub mod fft;
mod matmul;
mod memcopy;
mod mergesort;
mod mutexes;

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use thiserror::Error;

use crate::asm::assemble;
use crate::core::{Core, CoreConfig, ExitStatus, RunResult, Thread1Mode};
use crate::memunit::Memory;
use crate::sidekick::{Channel, DEFAULT_CHANNEL_BASE, emit_dispatcher};

/// Text bases for the two threads and the start of workload data.
pub const TEXT0: u32 = 0x1000;
pub const TEXT1: u32 = 0x4000;
pub const DATA: u32 = 0x10_0000;

/// One-line barrier flag used by dual variants: the worker thread stores 1
/// when its partition is finished, the combining thread polls with backoff.
pub const SYNC_ADDR: u32 = 0xffc0;

/// Backoff iterations for the idle dispatcher in the spinning scenario.
/// Long enough that the poll load rarely disturbs cache-heavy workloads,
/// still a genuine spin loop.
pub const SPIN_BACKOFF: u32 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Single,
    T1Inactive,
    T1Spinning,
    DualActive,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Single,
        Scenario::T1Inactive,
        Scenario::T1Spinning,
        Scenario::DualActive,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::Single => "single",
            Scenario::T1Inactive => "dual_t1_inactive",
            Scenario::T1Spinning => "dual_t1_spinning",
            Scenario::DualActive => "dual_active",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        Scenario::ALL.iter().copied().find(|x| x.label() == s)
    }

    /// Core configuration for this scenario on top of shared parameters.
    pub fn core_config(self, base: &CoreConfig) -> CoreConfig {
        let (n_threads, mode) = match self {
            Scenario::Single => (1, Thread1Mode::Inactive),
            Scenario::T1Inactive => (2, Thread1Mode::Inactive),
            Scenario::T1Spinning => (2, Thread1Mode::Spinning),
            Scenario::DualActive => (2, Thread1Mode::Active),
        };
        CoreConfig {
            n_threads,
            thread1_mode: mode,
            ..*base
        }
    }
}

pub const NAMES: [&str; 9] = [
    "matrix_mult",
    "dot_product",
    "fft",
    "merge_sort",
    "bellman_ford",
    "daxpy",
    "mem_copy",
    "mutexes",
    "ecg",
];

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("unknown workload '{0}'")]
    Unknown(String),
    #[error("workload assembly failed: {0}")]
    Asm(String),
    #[error("simulation did not halt: {0:?}")]
    BadExit(ExitStatus),
}

type Verify = Box<dyn Fn(&Memory) -> Result<(), String> + Send + Sync>;

/// An assembled-ready workload instance: sources, initialized data regions
/// and the output check.
pub struct Built {
    pub name: &'static str,
    pub scenario: Scenario,
    pub t0_src: String,
    pub t1_src: Option<String>,
    /// (base address, initial bytes); zero-filled regions use empty-vec
    /// bytes plus an explicit length
    pub regions: Vec<Region>,
    pub verify: Verify,
}

pub struct Region {
    pub base: u32,
    pub init: Vec<u8>,
    /// total mapped length (>= init.len()), rest zero
    pub len: u32,
}

impl Region {
    pub fn init(base: u32, bytes: Vec<u8>) -> Region {
        let len = bytes.len() as u32;
        Region {
            base,
            init: bytes,
            len,
        }
    }

    pub fn zeroed(base: u32, len: u32) -> Region {
        Region {
            base,
            init: Vec::new(),
            len,
        }
    }
}

pub(crate) fn rng_for(name: &str, seed: u64) -> ChaCha8Rng {
    // stable per-workload stream: same seed, different workloads decorrelated
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x1000_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

pub(crate) fn f64_bytes(vals: &[f64]) -> Vec<u8> {
    vals.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub(crate) fn u32_bytes(vals: &[u32]) -> Vec<u8> {
    vals.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Worker-side end of the barrier: publish "done" in the sync line.
pub(crate) fn emit_sync_signal() -> String {
    format!(
        "    li r26, {SYNC_ADDR:#x}
    li r27, 1
    sw r27, 0(r26)
"
    )
}

/// Combiner-side end of the barrier: poll with backoff until "done".
pub(crate) fn emit_sync_wait(tag: &str) -> String {
    format!(
        "    li r26, {SYNC_ADDR:#x}
sync_poll_{tag}:
    lw r27, 0(r26)
    bne r27, r0, sync_done_{tag}
    li r28, 16
sync_back_{tag}:
    addi r28, r28, -1
    bne r28, r0, sync_back_{tag}
    j sync_poll_{tag}
sync_done_{tag}:
    sw r0, 0(r26)
"
    )
}

/// Thread 1 program for the spinning scenario: the side-kick dispatcher
/// with an empty task queue.
pub(crate) fn spinning_dispatcher() -> String {
    let ch = Channel::new(DEFAULT_CHANNEL_BASE);
    format!(".org {TEXT1:#x}\n{}", emit_dispatcher(&ch, &[], SPIN_BACKOFF))
}

pub fn build(name: &str, scenario: Scenario, seed: u64) -> Result<Built, WorkloadError> {
    let b = match name {
        "matrix_mult" => matmul::build(scenario, seed),
        "dot_product" => dotprod::build(scenario, seed),
        "fft" => fft::build(scenario, seed),
        "merge_sort" => mergesort::build(scenario, seed),
        "bellman_ford" => bellman::build(scenario, seed),
        "daxpy" => daxpy::build(scenario, seed),
        "mem_copy" => memcopy::build(scenario, seed),
        "mutexes" => mutexes::build(scenario, seed),
        "ecg" => ecg::build(scenario, seed),
        _ => return Err(WorkloadError::Unknown(name.to_string())),
    };
    Ok(b)
}

/// Outcome of one workload run: timing plus the oracle check.
pub struct Outcome {
    pub result: RunResult,
    pub output: Result<(), String>,
}

pub fn run_built(built: &Built, base_cfg: &CoreConfig) -> Result<Outcome, WorkloadError> {
    let cfg = built.scenario.core_config(base_cfg);
    let fmt_errs = |es: Vec<crate::asm::AsmError>| {
        es.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
    };
    let p0 = assemble(&built.t0_src).map_err(|e| WorkloadError::Asm(fmt_errs(e)))?;
    let mut core = Core::new(cfg);
    core.load_program(&p0);
    core.set_entry(0, p0.base_address);
    if let Some(src1) = &built.t1_src {
        let p1 = assemble(src1).map_err(|e| WorkloadError::Asm(fmt_errs(e)))?;
        core.load_program(&p1);
        core.set_entry(1, p1.base_address);
    }
    core.unit.mem.map_region(DEFAULT_CHANNEL_BASE, 64);
    core.unit.mem.map_region(SYNC_ADDR, 64);
    for r in &built.regions {
        core.unit.mem.map_region(r.base, r.len);
        for (k, b) in r.init.iter().enumerate() {
            core.unit.mem.write_byte(r.base + k as u32, *b).unwrap();
        }
    }
    let result = core.run();
    if result.exit != ExitStatus::Halted {
        return Err(WorkloadError::BadExit(result.exit));
    }
    let output = (built.verify)(&core.unit.mem);
    Ok(Outcome { result, output })
}

pub fn run(name: &str, scenario: Scenario, base_cfg: &CoreConfig, seed: u64) -> Result<Outcome, WorkloadError> {
    let built = build(name, scenario, seed)?;
    run_built(&built, base_cfg)
}
