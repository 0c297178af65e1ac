//! daxpy: y[i] += a * x[i] over 1024 doubles, one sweep, cold caches.
//! Memory-bound enough that two threads on disjoint halves gain less than
//! pure compute kernels do — the shared data port is the bottleneck for a
//! good part of every iteration.

use rand::Rng;

use super::{Built, Region, Scenario, f64_bytes, rng_for, spinning_dispatcher, TEXT0, TEXT1};

const X: u32 = 0x10_0000;
const Y: u32 = 0x10_2000;
const A_ADDR: u32 = 0x10_4000;
const N: usize = 1024;
/// y lives at a fixed displacement from x, so one pointer covers both
const YOFF: u32 = Y - X;

/// Sweep elements [lo, hi). Register use: r3 cursor into x, r4 end, f0 = a.
fn emit_sweep(lo: usize, hi: usize) -> String {
    format!(
        "    la r5, {a:#x}
    fld f0, 0(r5)
    la r3, {start:#x}
    la r4, {end:#x}
sweep:
    fld f1, 0(r3)
    fld f2, {YOFF}(r3)
    fmul f1, f1, f0
    fadd f2, f2, f1
    fst f2, {YOFF}(r3)
    addi r3, r3, 8
    bne r3, r4, sweep
",
        a = A_ADDR,
        start = X + 8 * lo as u32,
        end = X + 8 * hi as u32,
    )
}

pub fn build(scenario: Scenario, seed: u64) -> Built {
    let mut rng = rng_for("daxpy", seed);
    let a: f64 = rng.gen_range(0.5..2.0);
    let x: Vec<f64> = (0..N).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..N).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let expect: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| yi + a * xi).collect();

    let (t0_src, t1_src) = match scenario {
        Scenario::DualActive => (
            format!(".org {TEXT0:#x}\n{}    halt\n", emit_sweep(0, N / 2)),
            Some(format!(
                ".org {TEXT1:#x}\n{}    halt\n",
                emit_sweep(N / 2, N)
            )),
        ),
        Scenario::T1Spinning => (
            format!(".org {TEXT0:#x}\n{}    halt\n", emit_sweep(0, N)),
            Some(spinning_dispatcher()),
        ),
        _ => (format!(".org {TEXT0:#x}\n{}    halt\n", emit_sweep(0, N)), None),
    };

    Built {
        name: "daxpy",
        scenario,
        t0_src,
        t1_src,
        regions: vec![
            Region::init(X, f64_bytes(&x)),
            Region::init(Y, f64_bytes(&y)),
            Region::init(A_ADDR, f64_bytes(&[a])),
        ],
        verify: Box::new(move |mem| {
            for (k, want) in expect.iter().enumerate() {
                let got = mem.read_f64(Y + 8 * k as u32).map_err(|e| e.to_string())?;
                if got.to_bits() != want.to_bits() {
                    return Err(format!("y[{k}]: got {got:e}, want {want:e}"));
                }
            }
            Ok(())
        }),
    }
}
