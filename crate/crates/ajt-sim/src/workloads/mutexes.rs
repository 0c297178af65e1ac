//! mutexes: two threads bump a shared counter to a fixed limit under a
//! test-and-test-and-set spinlock. The critical section carries some
//! bookkeeping, so the lock is held most of the time and the dual variant
//! mostly serializes — the residual gain comes from the out-of-lock work.

use super::{Built, Region, Scenario, spinning_dispatcher, TEXT0, TEXT1};

const LOCK: u32 = 0x10_0000;
const COUNT: u32 = 0x10_0040;
const LIMIT: u32 = 4096;
/// busy-work iterations inside the critical section (2 cycles each)
const CRIT_WORK: u32 = 6;
/// busy-work iterations between release and the next acquire; gives the
/// other thread a window to take the lock and is the only part of an
/// iteration that two threads can overlap
const OUT_WORK: u32 = 7;
/// spin backoff after a contended or lost acquire attempt
const BACKOFF: u32 = 4;

fn emit_program(org: u32) -> String {
    format!(
        ".org {org:#x}
    la r2, {LOCK:#x}
    la r3, {COUNT:#x}
    li r13, 0              ; acquisitions by this thread
loop:
    jal acquire
    lw r4, 0(r3)
    li r5, {LIMIT}
    beq r4, r5, finished
    addi r4, r4, 1
    sw r4, 0(r3)
    tid r6
    sw r6, 4(r3)           ; last writer
    addi r13, r13, 1
    li r9, {CRIT_WORK}
crit_work:
    addi r9, r9, -1
    bne r9, r0, crit_work
    jal release
    li r9, {OUT_WORK}
out_work:
    addi r9, r9, -1
    bne r9, r0, out_work
    j loop
finished:
    jal release
    tid r6
    li r9, 3
    sll r6, r6, r9
    add r6, r6, r3
    sw r13, 8(r6)          ; per-thread acquire count at COUNT+8/+16
    halt

acquire:
spin:
    lb r7, 0(r2)
    bne r7, r0, backoff
    tas r7, 0(r2)
    beq r7, r0, got
backoff:
    li r8, {BACKOFF}
back:
    addi r8, r8, -1
    bne r8, r0, back
    j spin
got:
    ret

release:
    sb r0, 0(r2)
    ret
"
    )
}

pub fn build(scenario: Scenario, _seed: u64) -> Built {
    let (t0_src, t1_src) = match scenario {
        Scenario::DualActive => (emit_program(TEXT0), Some(emit_program(TEXT1))),
        Scenario::T1Spinning => (emit_program(TEXT0), Some(spinning_dispatcher())),
        _ => (emit_program(TEXT0), None),
    };
    let dual = scenario == Scenario::DualActive;

    Built {
        name: "mutexes",
        scenario,
        t0_src,
        t1_src,
        regions: vec![Region::zeroed(LOCK, 64), Region::zeroed(COUNT, 64)],
        verify: Box::new(move |mem| {
            let count = mem.read_u32(COUNT).map_err(|e| e.to_string())?;
            if count != LIMIT {
                return Err(format!("counter: got {count}, want {LIMIT}"));
            }
            let lock = mem.read_byte(LOCK).map_err(|e| e.to_string())?;
            if lock != 0 {
                return Err(format!("lock left held: {lock}"));
            }
            let c0 = mem.read_u32(COUNT + 8).map_err(|e| e.to_string())?;
            let c1 = mem.read_u32(COUNT + 16).map_err(|e| e.to_string())?;
            if c0 + c1 != LIMIT {
                return Err(format!("per-thread counts {c0}+{c1} != {LIMIT}"));
            }
            if dual && (c0 == 0 || c1 == 0) {
                return Err(format!("lock starved one thread: {c0}/{c1}"));
            }
            Ok(())
        }),
    }
}
