//! mem_copy: copy a 32KB block word by word, one pass over the whole block
//! per word offset so every access streams through the cache. The dual
//! variant splits the sixteen word slots of each line by parity: thread 0
//! copies even words, thread 1 odd words. To keep the two threads from
//! ever touching the same line close together in time, each pass is cut
//! into four 8KB quarters separated by barriers, with the threads pipelined
//! two quarters apart; by the time a thread reaches a quarter, the other
//! thread's fills there have long been evicted, so both threads refetch
//! every line they touch. The single-thread run copies a few word pairs
//! back to back instead (the second word of a pair always hits), which is
//! reuse the parity split denies the dual run.

use rand::Rng;

use super::{Built, Region, Scenario, rng_for, spinning_dispatcher, u32_bytes, TEXT0, TEXT1};

const SRC: u32 = 0x10_0000;
const DST: u32 = 0x11_0000;
const BAR: u32 = 0x13_0000;
const SCRATCH: u32 = 0x16_0000;
const BYTES: u32 = 32 * 1024;
const LINES: u32 = BYTES / 64;
const QUARTER: u32 = BYTES / 4;
/// word pairs the single-thread run copies back to back (two words per
/// line visit); the rest of the block is copied one word per pass like the
/// dual threads do
const PAIRED_PASSES: u32 = 3;

/// Copy word `off(line)` of every line in [base, base+count*64). Expects
/// r3 = SRC cursor, r4 = DST cursor already offset; clobbers r5, r9.
fn emit_sweep(offsets: &[u32], count: u32, tag: &str) -> String {
    let mut s = format!("    li r5, {count}\nlv_{tag}:\n");
    for off in offsets {
        s.push_str(&format!("    lw r9, {off}(r3)\n    sw r9, {off}(r4)\n"));
    }
    s.push_str(&format!(
        "    addi r3, r3, 64
    addi r4, r4, 64
    addi r5, r5, -1
    bne r5, r0, lv_{tag}
"
    ));
    s
}

/// Sweep one cache line of every line in [SCRATCH+off, SCRATCH+off+bytes)
/// to push any stale contents out of the cache before the copy starts.
fn emit_flush(off: u32, bytes: u32, tag: &str) -> String {
    format!(
        "    la r3, {base:#x}
    la r4, {end:#x}
fl_{tag}:
    lw r9, 0(r3)
    addi r3, r3, 64
    bne r3, r4, fl_{tag}
",
        base = SCRATCH + off,
        end = SCRATCH + off + bytes,
    )
}

fn single_src() -> String {
    let mut body = emit_flush(0, BYTES, "s");
    // paired passes: both words of a pair on the same line visit
    for k in 0..PAIRED_PASSES {
        body.push_str(&format!(
            "    la r3, {src:#x}
    la r4, {dst:#x}
",
            src = SRC + 8 * k,
            dst = DST + 8 * k,
        ));
        body.push_str(&emit_sweep(&[0, 4], LINES, &format!("p{k}")));
    }
    // remaining word offsets, one strided pass each
    body.push_str(&format!(
        "    li r7, {start}
wp_s:
    la r3, {SRC:#x}
    add r3, r3, r7
    la r4, {DST:#x}
    add r4, r4, r7
{sweep}    addi r7, r7, 4
    li r9, 64
    bne r7, r9, wp_s
",
        start = 8 * PAIRED_PASSES,
        sweep = emit_sweep(&[0], LINES, "s"),
    ));
    format!(".org {TEXT0:#x}\n{body}    halt\n")
}

/// One dual-thread program: eight passes over the thread's word parity,
/// each pass four barrier-separated quarters. Thread 1 starts two quarters
/// ahead so the threads always work disjoint 8KB halves.
fn dual_src(tid: usize) -> String {
    let org = if tid == 0 { TEXT0 } else { TEXT1 };
    let w0 = if tid == 0 { 0 } else { 4 };
    let (my, other) = if tid == 0 { (0, 4) } else { (4, 0) };
    let stagger = if tid == 0 {
        "    mv r21, r20\n".to_string()
    } else {
        format!("    xori r21, r20, {}\n", 2 * QUARTER)
    };
    format!(
        ".org {org:#x}
    la r25, {BAR:#x}
{flush}    jal barrier
    la r22, {BYTES}
    li r7, {w0}
wp_d:
    li r20, 0
qt_d:
{stagger}    la r3, {SRC:#x}
    add r3, r3, r21
    add r3, r3, r7
    la r4, {DST:#x}
    add r4, r4, r21
    add r4, r4, r7
{sweep}    jal barrier
    addi r20, r20, {QUARTER}
    bne r20, r22, qt_d
    addi r7, r7, 8
    li r9, {wend}
    bne r7, r9, wp_d
    halt

barrier:
    li r27, 1
    sw r27, {my}(r25)
bw_d:
    lw r27, {other}(r25)
    bne r27, r0, bgo_d
    li r27, 16
bbk_d:
    addi r27, r27, -1
    bne r27, r0, bbk_d
    j bw_d
bgo_d:
    addi r25, r25, 8
    ret
",
        flush = emit_flush(tid as u32 * (BYTES / 2), BYTES / 2, "d"),
        sweep = emit_sweep(&[0], LINES / 4, "d"),
        wend = w0 + 64,
    )
}

pub fn build(scenario: Scenario, seed: u64) -> Built {
    let mut rng = rng_for("mem_copy", seed);
    let src: Vec<u32> = (0..BYTES / 4).map(|_| rng.gen()).collect();
    let expect = src.clone();

    let (t0_src, t1_src) = match scenario {
        Scenario::DualActive => (dual_src(0), Some(dual_src(1))),
        Scenario::T1Spinning => (single_src(), Some(spinning_dispatcher())),
        _ => (single_src(), None),
    };

    Built {
        name: "mem_copy",
        scenario,
        t0_src,
        t1_src,
        regions: vec![
            Region::init(SRC, u32_bytes(&src)),
            Region::zeroed(DST, BYTES),
            Region::zeroed(BAR, 512),
            Region::zeroed(SCRATCH, BYTES),
        ],
        verify: Box::new(move |mem| {
            for (k, want) in expect.iter().enumerate() {
                let got = mem.read_u32(DST + 4 * k as u32).map_err(|e| e.to_string())?;
                if got != *want {
                    return Err(format!("dst[{k}]: got {got:#x}, want {want:#x}"));
                }
            }
            Ok(())
        }),
    }
}
