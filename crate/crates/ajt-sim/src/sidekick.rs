//! The side-kick programming model: one thread offloads function calls to
//! the other through a fixed shared-memory "thread channel", with no locks
//! — each channel field has exactly one writer per protocol phase.
//!
//! Channel layout (one naturally aligned 64-byte region):
//!   +0   status   (0 IDLE, 1 REQUEST, 2 BUSY, 3 DONE)
//!   +4   fn_id
//!   +8   args     (8 words)
//!   +40  retval   (2 words, 8-byte aligned so an f64 fits)
//!
//! The invoker writes fn_id and args first and status=REQUEST last; the
//! dispatcher answers with BUSY, runs the handler, and writes status=DONE
//! after the retval. The invoker acknowledges with status=IDLE.

use std::fmt::Write as _;

use crate::asm::assemble;
use crate::core::{Core, CoreConfig, ExitStatus, Thread1Mode};
use crate::memunit::ReqKind;

pub const STATUS_IDLE: u32 = 0;
pub const STATUS_REQUEST: u32 = 1;
pub const STATUS_BUSY: u32 = 2;
pub const STATUS_DONE: u32 = 3;

/// retval[0] written by the dispatcher for an unknown fn_id
pub const ERR_SENTINEL: u32 = 0xffff_dead;

pub const DEFAULT_CHANNEL_BASE: u32 = 0x100;

/// Poll-loop backoff iterations between status reads in the dispatcher.
/// Keeps a spinning side-kick thread off the data cache most of the time.
pub const DEFAULT_BACKOFF: u32 = 6;

#[derive(Debug, Clone, Copy)]
pub struct Channel {
    pub base: u32,
}

impl Channel {
    pub fn new(base: u32) -> Self {
        assert_eq!(base % 64, 0, "channel must be 64-byte aligned");
        Channel { base }
    }

    pub fn status_addr(&self) -> u32 {
        self.base
    }

    pub fn fn_id_addr(&self) -> u32 {
        self.base + 4
    }

    pub fn arg_addr(&self, k: u32) -> u32 {
        debug_assert!(k < 8);
        self.base + 8 + 4 * k
    }

    pub fn ret_addr(&self, k: u32) -> u32 {
        debug_assert!(k < 2);
        self.base + 40 + 4 * k
    }
}

/// A dispatcher-side function: its id and the assembly label of its
/// handler subroutine. Handlers are called with `jal`, get the channel
/// base in r20, read args at 8(r20) and write retval at 40(r20). fn_id 0
/// is reserved for the no-op latency probe.
#[derive(Debug, Clone)]
pub struct Task {
    pub fn_id: u32,
    pub label: String,
}

/// Emit the dispatcher loop for thread 1. The caller appends the handler
/// subroutines (and anything else) after this fragment. Clobbers r20-r23.
pub fn emit_dispatcher(ch: &Channel, tasks: &[Task], backoff: u32) -> String {
    let mut s = String::new();
    let base = ch.base;
    let _ = write!(
        s,
        "sk_dispatch:
    li r20, {base:#x}
sk_poll:
    lw r21, 0(r20)
    li r22, {STATUS_REQUEST}
    beq r21, r22, sk_serve
    li r23, {backoff}
sk_back:
    addi r23, r23, -1
    bne r23, r0, sk_back
    j sk_poll
sk_serve:
    li r22, {STATUS_BUSY}
    sw r22, 0(r20)
    lw r21, 4(r20)
"
    );
    for t in tasks {
        let (id, label) = (t.fn_id, &t.label);
        let _ = write!(
            s,
            "    li r22, {id}
    bne r21, r22, sk_not_{id}
    jal {label}
    j sk_done
sk_not_{id}:
"
        );
    }
    let _ = write!(
        s,
        "    lui r22, {:#x}
    ori r22, r22, {:#x}
    sw r22, 40(r20)
sk_done:
    li r22, {STATUS_DONE}
    sw r22, 0(r20)
    j sk_poll
",
        ERR_SENTINEL >> 16,
        ERR_SENTINEL & 0xffff
    );
    s
}

/// Emit an invocation of `fn_id` on the invoker side. Args must already be
/// in place (the channel base stays in r20 for that). Clobbers r20, r21.
/// `tag` makes labels unique when the fragment is emitted more than once.
pub fn emit_invoke(ch: &Channel, fn_id: u32, tag: &str) -> String {
    let base = ch.base;
    let _ = tag; // no labels needed on the request side
    format!(
        "    li r20, {base:#x}
    li r21, {fn_id}
    sw r21, 4(r20)
    li r21, {STATUS_REQUEST}
    sw r21, 0(r20)
"
    )
}

/// Emit the wait-for-DONE spin plus the IDLE acknowledgment.
/// Clobbers r20-r22.
pub fn emit_wait(ch: &Channel, tag: &str) -> String {
    let base = ch.base;
    format!(
        "    li r20, {base:#x}
sk_wait_{tag}:
    lw r21, 0(r20)
    li r22, {STATUS_DONE}
    bne r21, r22, sk_wait_{tag}
    sw r0, 0(r20)
"
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roundtrip {
    pub min: u64,
    pub median: u64,
    pub max: u64,
}

/// Measure the invoke(0)+wait round trip on thread 0 against the thread 1
/// dispatcher, from the REQUEST store to the IDLE acknowledgment, observed
/// at the data cache. The first two repetitions are discarded (cold
/// caches, untrained branch predictors).
pub fn measure_roundtrip(cfg: &CoreConfig, channel_base: u32, reps: usize) -> Roundtrip {
    assert!(reps >= 2);
    let ch = Channel::new(channel_base);
    let invoker = format!(
        ".org 0x1000
    li r10, {n}
rt_outer:
{invoke}{wait}    addi r10, r10, -1
    bne r10, r0, rt_outer
    halt
",
        n = reps + 2,
        invoke = emit_invoke(&ch, 0, "rt"),
        wait = emit_wait(&ch, "rt"),
    );
    let dispatcher = format!(
        ".org 0x4000
{disp}sk_fn0:
    ret
",
        disp = emit_dispatcher(
            &ch,
            &[Task {
                fn_id: 0,
                label: "sk_fn0".into(),
            }],
            DEFAULT_BACKOFF,
        ),
    );
    let p0 = assemble(&invoker).expect("invoker assembles");
    let p1 = assemble(&dispatcher).expect("dispatcher assembles");

    let mut core = Core::new(CoreConfig {
        n_threads: 2,
        thread1_mode: Thread1Mode::Spinning,
        ..*cfg
    });
    core.load_program(&p0);
    core.load_program(&p1);
    core.unit.mem.map_region(channel_base, 64);
    core.set_entry(0, p0.base_address);
    core.set_entry(1, p1.base_address);
    core.watch_range(ch.status_addr(), ch.status_addr());
    let r = core.run();
    assert_eq!(r.exit, ExitStatus::Halted, "probe run must halt: {:?}", r.exit);

    // pair each REQUEST store with the following IDLE store, both thread 0
    let mut lats = Vec::new();
    let mut req_cycle = None;
    for e in core.events.iter().filter(|e| e.tid == 0 && e.kind == ReqKind::Store) {
        match e.data as u32 {
            STATUS_REQUEST => req_cycle = Some(e.cycle),
            STATUS_IDLE => {
                if let Some(rq) = req_cycle.take() {
                    lats.push(e.cycle - rq);
                }
            }
            _ => {}
        }
    }
    assert_eq!(lats.len(), reps + 2, "expected one latency per repetition");
    lats.drain(..2);
    lats.sort_unstable();
    Roundtrip {
        min: lats[0],
        median: lats[lats.len() / 2],
        max: *lats.last().unwrap(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::CoreConfig;

    #[test]
    fn roundtrip_is_deterministic_and_fast() {
        let rt = measure_roundtrip(&CoreConfig::default(), DEFAULT_CHANNEL_BASE, 50);
        assert_eq!(rt.min, rt.max, "warm round trip must be constant: {rt:?}");
        assert!(rt.min < 100, "round trip too slow: {rt:?}");
    }

    #[test]
    fn unknown_fn_id_writes_sentinel() {
        let ch = Channel::new(DEFAULT_CHANNEL_BASE);
        let invoker = format!(
            ".org 0x1000
{invoke}{wait}    halt
",
            invoke = emit_invoke(&ch, 9, "x"),
            wait = emit_wait(&ch, "x"),
        );
        let dispatcher = format!(
            ".org 0x4000
{disp}sk_fn0:
    ret
",
            disp = emit_dispatcher(
                &ch,
                &[Task {
                    fn_id: 0,
                    label: "sk_fn0".into(),
                }],
                DEFAULT_BACKOFF,
            ),
        );
        let p0 = assemble(&invoker).unwrap();
        let p1 = assemble(&dispatcher).unwrap();
        let mut core = Core::new(CoreConfig {
            thread1_mode: Thread1Mode::Spinning,
            ..CoreConfig::default()
        });
        core.load_program(&p0);
        core.load_program(&p1);
        core.unit.mem.map_region(ch.base, 64);
        core.set_entry(0, p0.base_address);
        core.set_entry(1, p1.base_address);
        let r = core.run();
        assert_eq!(r.exit, ExitStatus::Halted);
        assert_eq!(core.unit.mem.read_u32(ch.ret_addr(0)).unwrap(), ERR_SENTINEL);
        assert_eq!(core.unit.mem.read_u32(ch.status_addr()).unwrap(), STATUS_IDLE);
    }

    #[test]
    fn status_protocol_order_is_observed() {
        // the dispatcher must write BUSY before DONE, and the invoker's
        // REQUEST must precede both
        let cfg = CoreConfig::default();
        let ch = Channel::new(DEFAULT_CHANNEL_BASE);
        let invoker = format!(
            ".org 0x1000
{invoke}{wait}    halt
",
            invoke = emit_invoke(&ch, 0, "x"),
            wait = emit_wait(&ch, "x"),
        );
        let dispatcher = format!(
            ".org 0x4000
{disp}sk_fn0:
    ret
",
            disp = emit_dispatcher(
                &ch,
                &[Task {
                    fn_id: 0,
                    label: "sk_fn0".into(),
                }],
                DEFAULT_BACKOFF,
            ),
        );
        let p0 = assemble(&invoker).unwrap();
        let p1 = assemble(&dispatcher).unwrap();
        let mut core = Core::new(CoreConfig {
            thread1_mode: Thread1Mode::Spinning,
            ..cfg
        });
        core.load_program(&p0);
        core.load_program(&p1);
        core.unit.mem.map_region(ch.base, 64);
        core.set_entry(0, p0.base_address);
        core.set_entry(1, p1.base_address);
        core.watch_range(ch.status_addr(), ch.status_addr());
        let r = core.run();
        assert_eq!(r.exit, ExitStatus::Halted);
        let stores: Vec<(usize, u32)> = core
            .events
            .iter()
            .filter(|e| e.kind == ReqKind::Store)
            .map(|e| (e.tid, e.data as u32))
            .collect();
        assert_eq!(
            stores,
            vec![
                (0, STATUS_REQUEST),
                (1, STATUS_BUSY),
                (1, STATUS_DONE),
                (0, STATUS_IDLE),
            ]
        );
    }
}
