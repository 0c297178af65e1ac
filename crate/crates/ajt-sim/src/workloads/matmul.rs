//! matrix_mult: C = A * B for 128x128 doubles, with four-row register
//! blocking so each loaded B element feeds four multiply-adds. Row groups
//! hold rows of equal parity; the dual variant gives even-parity groups to
//! thread 1 and odd-parity groups to thread 0, so the two threads stream
//! the same B columns and share those cache lines instead of fighting.

use rand::Rng;

use super::{Built, Region, Scenario, f64_bytes, rng_for, spinning_dispatcher, TEXT0, TEXT1};

const A: u32 = 0x10_0000;
const B: u32 = 0x12_0000;
const C: u32 = 0x14_0000;
const N: usize = 128;
/// matrix row stride in bytes
const ROW: u32 = (N * 8) as u32;

/// Compute all groups of rows {g, g+2, g+4, g+6} for g = first, first+8,
/// ... below N. Clobbers r2-r16 and f0-f5.
fn emit_parity(first: u32, tag: &str) -> String {
    format!(
        "    li r2, {first}
group_{tag}:
    li r9, {ROW}
    mul r3, r2, r9
    la r9, {A:#x}
    add r3, r3, r9         ; A row g
    addi r4, r3, {two_rows}
    addi r5, r4, {two_rows}
    addi r6, r5, {two_rows}
    li r9, {ROW}
    mul r16, r2, r9
    la r9, {C:#x}
    add r16, r16, r9       ; C row g
    li r7, 0               ; column j
col_{tag}:
    li r9, 8
    mul r8, r7, r9
    la r9, {B:#x}
    add r8, r8, r9         ; &B[0][j]
    fsub f0, f0, f0
    fsub f1, f1, f1
    fsub f2, f2, f2
    fsub f3, f3, f3
    mv r11, r3
    mv r12, r4
    mv r13, r5
    mv r14, r6
    li r10, {N}
kloop_{tag}:
    fld f4, 0(r8)          ; B[k][j]
    fld f5, 0(r11)
    fmul f5, f5, f4
    fadd f0, f0, f5
    fld f5, 0(r12)
    fmul f5, f5, f4
    fadd f1, f1, f5
    fld f5, 0(r13)
    fmul f5, f5, f4
    fadd f2, f2, f5
    fld f5, 0(r14)
    fmul f5, f5, f4
    fadd f3, f3, f5
    addi r8, r8, {ROW}
    addi r11, r11, 8
    addi r12, r12, 8
    addi r13, r13, 8
    addi r14, r14, 8
    addi r10, r10, -1
    bne r10, r0, kloop_{tag}
    li r9, 8
    mul r15, r7, r9
    add r15, r15, r16
    fst f0, 0(r15)
    fst f1, {two_rows}(r15)
    fst f2, {four_rows}(r15)
    fst f3, {six_rows}(r15)
    addi r7, r7, 1
    li r9, {N}
    bne r7, r9, col_{tag}
    addi r2, r2, 8
    li r9, {N}
    blt r2, r9, group_{tag}
",
        tag = tag,
        two_rows = 2 * ROW,
        four_rows = 4 * ROW,
        six_rows = 6 * ROW,
    )
}

pub fn build(scenario: Scenario, seed: u64) -> Built {
    let mut rng = rng_for("matrix_mult", seed);
    let a: Vec<f64> = (0..N * N).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..N * N).map(|_| rng.gen_range(-1.0..1.0)).collect();

    // plain triple loop, accumulating in k order like the kernel does
    let mut c = vec![0.0f64; N * N];
    for i in 0..N {
        for j in 0..N {
            let mut acc = 0.0f64;
            for k in 0..N {
                acc += a[i * N + k] * b[k * N + j];
            }
            c[i * N + j] = acc;
        }
    }

    let single = format!(
        ".org {TEXT0:#x}\n{}{}    halt\n",
        emit_parity(0, "e"),
        emit_parity(1, "o")
    );
    let (t0_src, t1_src) = match scenario {
        Scenario::DualActive => (
            format!(".org {TEXT0:#x}\n{}    halt\n", emit_parity(1, "o")),
            Some(format!(".org {TEXT1:#x}\n{}    halt\n", emit_parity(0, "e"))),
        ),
        Scenario::T1Spinning => (single, Some(spinning_dispatcher())),
        _ => (single, None),
    };

    Built {
        name: "matrix_mult",
        scenario,
        t0_src,
        t1_src,
        regions: vec![
            Region::init(A, f64_bytes(&a)),
            Region::init(B, f64_bytes(&b)),
            Region::zeroed(C, (N * N * 8) as u32),
        ],
        verify: Box::new(move |mem| {
            for (k, want) in c.iter().enumerate() {
                let got = mem.read_f64(C + 8 * k as u32).map_err(|e| e.to_string())?;
                if got.to_bits() != want.to_bits() {
                    return Err(format!("c[{k}]: got {got:e}, want {want:e}"));
                }
            }
            Ok(())
        }),
    }
}
