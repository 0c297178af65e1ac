//! merge_sort: bottom-up merge sort of 1024 signed 32-bit words, ping-pong
//! between a work buffer and a temp buffer. The dual variant sorts the two
//! halves independently (nine passes each, ending in the temp buffer) and
//! thread 0 performs the final merge, so the result lands in the work
//! buffer either way.

use rand::Rng;

use super::{
    Built, Region, Scenario, emit_sync_signal, emit_sync_wait, rng_for, spinning_dispatcher,
    u32_bytes, TEXT0, TEXT1,
};

const IN: u32 = 0x10_0000;
const WORK: u32 = 0x10_1000;
const TEMP: u32 = 0x10_2000;
const N: usize = 1024;

/// One full merge pass as a subroutine. Arguments: r1 src base, r2 dst
/// base, r3 run width in bytes, r4 region size in bytes. All runs are
/// complete because region and width are powers of two. Clobbers r5-r12.
fn emit_pass_sub() -> String {
    "pass:
    li r5, 0
pair:
    add r6, r1, r5         ; left cursor
    add r7, r6, r3         ; right cursor
    mv r8, r7              ; left end
    add r9, r7, r3         ; right end
    add r10, r2, r5        ; out cursor
merge:
    beq r6, r8, drain_r
    beq r7, r9, drain_l
    lw r11, 0(r6)
    lw r12, 0(r7)
    blt r12, r11, take_r
    sw r11, 0(r10)
    addi r6, r6, 4
    j adv
take_r:
    sw r12, 0(r10)
    addi r7, r7, 4
adv:
    addi r10, r10, 4
    j merge
drain_l:
    beq r6, r8, pair_end
    lw r11, 0(r6)
    sw r11, 0(r10)
    addi r6, r6, 4
    addi r10, r10, 4
    j drain_l
drain_r:
    beq r7, r9, pair_end
    lw r12, 0(r7)
    sw r12, 0(r10)
    addi r7, r7, 4
    addi r10, r10, 4
    j drain_r
pair_end:
    add r5, r5, r3
    add r5, r5, r3
    bne r5, r4, pair
    ret
"
    .to_string()
}

/// Copy `bytes` bytes from IN+off to WORK+off, then run merge passes of
/// width 4..limit over [base+off, base+off+bytes).
fn emit_sort(off: u32, bytes: u32, limit_width: u32) -> String {
    format!(
        "    la r6, {in_p:#x}
    la r7, {work_p:#x}
    la r8, {in_end:#x}
copy:
    lw r9, 0(r6)
    sw r9, 0(r7)
    addi r6, r6, 4
    addi r7, r7, 4
    bne r6, r8, copy
    la r14, {work_p:#x}
    la r15, {temp_p:#x}
    li r13, 4
width:
    mv r1, r14
    mv r2, r15
    mv r3, r13
    li r4, {bytes}
    jal pass
    mv r16, r14
    mv r14, r15
    mv r15, r16
    add r13, r13, r13
    li r16, {limit_width}
    bne r13, r16, width
",
        in_p = IN + off,
        work_p = WORK + off,
        temp_p = TEMP + off,
        in_end = IN + off + bytes,
    )
}

fn single_src() -> String {
    // 10 passes over the full array: final data ends up in WORK
    format!(
        ".org {TEXT0:#x}
{sort}    halt
{sub}",
        sort = emit_sort(0, 4096, 4096),
        sub = emit_pass_sub(),
    )
}

fn dual_src(tid: usize) -> String {
    // 9 passes per half: final half ends up in TEMP
    if tid == 1 {
        format!(
            ".org {TEXT1:#x}
{sort}{signal}    halt
{sub}",
            sort = emit_sort(2048, 2048, 2048),
            signal = emit_sync_signal(),
            sub = emit_pass_sub(),
        )
    } else {
        format!(
            ".org {TEXT0:#x}
{sort}{wait}    la r1, {TEMP:#x}
    la r2, {WORK:#x}
    li r3, 2048
    li r4, 4096
    jal pass
    halt
{sub}",
            sort = emit_sort(0, 2048, 2048),
            wait = emit_sync_wait("ms"),
            sub = emit_pass_sub(),
        )
    }
}

pub fn build(scenario: Scenario, seed: u64) -> Built {
    let mut rng = rng_for("merge_sort", seed);
    let input: Vec<u32> = (0..N).map(|_| rng.gen()).collect();

    let mut expect: Vec<i32> = input.iter().map(|v| *v as i32).collect();
    expect.sort_unstable();

    let (t0_src, t1_src) = match scenario {
        Scenario::DualActive => (dual_src(0), Some(dual_src(1))),
        Scenario::T1Spinning => (single_src(), Some(spinning_dispatcher())),
        _ => (single_src(), None),
    };

    Built {
        name: "merge_sort",
        scenario,
        t0_src,
        t1_src,
        regions: vec![
            Region::init(IN, u32_bytes(&input)),
            Region::zeroed(WORK, 4096),
            Region::zeroed(TEMP, 4096),
        ],
        verify: Box::new(move |mem| {
            for (k, want) in expect.iter().enumerate() {
                let got = mem.read_u32(WORK + 4 * k as u32).map_err(|e| e.to_string())? as i32;
                if got != *want {
                    return Err(format!("sorted[{k}]: got {got}, want {want}"));
                }
            }
            Ok(())
        }),
    }
}
