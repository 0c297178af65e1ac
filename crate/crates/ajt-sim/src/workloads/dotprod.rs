//! dot_product: x·y over 1024 doubles, repeated 8 times (the vectors fit
//! in the cache, so after the first repetition this is pure FP throughput).
//! The sum is split into an even-index and an odd-index accumulator so the
//! partitioned variant (thread 1 evens, thread 0 odds) produces the final
//! value with exactly the same sequence of FP operations per accumulator.

use rand::Rng;

use super::{
    Built, Region, Scenario, emit_sync_signal, emit_sync_wait, f64_bytes, rng_for,
    spinning_dispatcher, TEXT0, TEXT1,
};

const X: u32 = 0x10_0000;
const Y: u32 = 0x10_2000;
const RES: u32 = 0x10_4000;
const N: usize = 1024;
const REPS: u32 = 8;

/// One strided partial-product loop: elements `first`, `first+2`, ... into
/// accumulator f0, folded into `facc` afterwards. Clobbers r3-r5, f0, f4, f5.
fn emit_partial(first: u32, facc: &str, tag: &str) -> String {
    format!(
        "    fsub f0, f0, f0
    la r3, {x:#x}
    la r4, {y:#x}
    li r5, {count}
part_{tag}:
    fld f4, 0(r3)
    fld f5, 0(r4)
    fmul f4, f4, f5
    fadd f0, f0, f4
    addi r3, r3, 16
    addi r4, r4, 16
    addi r5, r5, -1
    bne r5, r0, part_{tag}
    fadd {facc}, {facc}, f0
",
        x = X + 8 * first,
        y = Y + 8 * first,
        count = N / 2,
    )
}

fn single_src() -> String {
    format!(
        ".org {TEXT0:#x}
    fsub f2, f2, f2
    fsub f3, f3, f3
    li r10, {REPS}
rep:
{even}{odd}    addi r10, r10, -1
    bne r10, r0, rep
    fadd f2, f2, f3
    la r3, {RES:#x}
    fst f2, 0(r3)
    halt
",
        even = emit_partial(0, "f2", "e"),
        odd = emit_partial(1, "f3", "o"),
    )
}

fn dual_src(tid: usize) -> String {
    if tid == 1 {
        // evens; publish the partial before the barrier
        format!(
            ".org {TEXT1:#x}
    fsub f2, f2, f2
    li r10, {REPS}
rep:
{even}    addi r10, r10, -1
    bne r10, r0, rep
    la r3, {RES:#x}
    fst f2, 8(r3)
{signal}    halt
",
            even = emit_partial(0, "f2", "e"),
            signal = emit_sync_signal(),
        )
    } else {
        format!(
            ".org {TEXT0:#x}
    fsub f3, f3, f3
    li r10, {REPS}
rep:
{odd}    addi r10, r10, -1
    bne r10, r0, rep
{wait}    la r3, {RES:#x}
    fld f2, 8(r3)
    fadd f2, f2, f3
    fst f2, 0(r3)
    halt
",
            odd = emit_partial(1, "f3", "o"),
            wait = emit_sync_wait("dp"),
        )
    }
}

/// Host mirror of the exact accumulation order used by the assembly.
fn mirror(x: &[f64], y: &[f64]) -> f64 {
    let partial = |first: usize| {
        let mut acc = 0.0f64;
        for rep_acc in std::iter::repeat_with(|| {
            let mut p = 0.0f64;
            for i in (first..N).step_by(2) {
                p += x[i] * y[i];
            }
            p
        })
        .take(REPS as usize)
        {
            acc += rep_acc;
        }
        acc
    };
    partial(0) + partial(1)
}

pub fn build(scenario: Scenario, seed: u64) -> Built {
    let mut rng = rng_for("dot_product", seed);
    let x: Vec<f64> = (0..N).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..N).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let expect = mirror(&x, &y);
    // sanity: 8x the plain dot product, within FP reassociation noise
    let direct: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() * REPS as f64;
    debug_assert!((expect - direct).abs() <= 1e-9 * direct.abs().max(1.0));

    let (t0_src, t1_src) = match scenario {
        Scenario::DualActive => (dual_src(0), Some(dual_src(1))),
        Scenario::T1Spinning => (single_src(), Some(spinning_dispatcher())),
        _ => (single_src(), None),
    };

    Built {
        name: "dot_product",
        scenario,
        t0_src,
        t1_src,
        regions: vec![
            Region::init(X, f64_bytes(&x)),
            Region::init(Y, f64_bytes(&y)),
            Region::zeroed(RES, 64),
        ],
        verify: Box::new(move |mem| {
            let got = mem.read_f64(RES).map_err(|e| e.to_string())?;
            if got.to_bits() != expect.to_bits() {
                return Err(format!("dot product: got {got:e}, want {expect:e}"));
            }
            Ok(())
        }),
    }
}
