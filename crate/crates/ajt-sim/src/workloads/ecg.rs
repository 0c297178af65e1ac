//! ecg: QRS detection over one synthetic heartbeat. A 256-sample window
//! (360 Hz, 12-bit counts) is band-pass filtered in the frequency domain
//! using the fft workload's radix-2 machinery, then differentiated,
//! squared into a short moving-average energy, and thresholded; the
//! strongest window gives the beat location, and the beat shape is
//! summarized as six Hermite-basis coefficients over a 64-sample window
//! around the peak. The dual variant keeps the sequential filter chain on
//! thread 0 and offloads one FFT half of each transform plus half of the
//! Hermite dot products to a side-kick dispatcher on thread 1.
//!
//! The inverse transform reuses the forward FFT: conjugating the masked
//! spectrum, transforming, and scaling by 1/n yields the filtered signal
//! in the real parts. The threshold and peak scan compare the high words
//! of the (non-negative) energy values as integers — the machine has no
//! floating-point compare — which orders non-negative doubles correctly.

use rand::Rng;

use super::fft;
use super::{
    Built, Region, Scenario, f64_bytes, rng_for, spinning_dispatcher, u32_bytes, TEXT0, TEXT1,
};
use crate::sidekick::{
    emit_dispatcher, emit_invoke, emit_wait, Channel, Task, DEFAULT_BACKOFF, DEFAULT_CHANNEL_BASE,
};

const N: usize = 256;
/// energy moving-average length in samples
const MA: usize = 8;
/// the energy argmax sits at the trailing edge of the averaging window;
/// report the peak this many samples earlier
const MA_LAG: u32 = 4;
/// detection threshold on the band-passed derivative energy, in squared
/// ADC counts; a clean QRS scores ~100x this, baseline noise ~100x below
const THR: f64 = 50_000.0;
/// band-pass passband in FFT bins (360/256 Hz per bin): roughly 4-56 Hz
const BAND_LO: usize = 3;
const BAND_HI: usize = 40;
/// Hermite basis: 6 functions sampled at 64 points, 8 samples per unit t
const ORDERS: usize = 6;
const WIN: usize = 64;

/// side-kick task ids: the upper half of every data-parallel stage, in
/// chain order, plus the shutdown request
const FN_FFT_EVEN: u32 = 1;
const FN_COMBINE1_HI: u32 = 2;
const FN_MASK_HI: u32 = 3;
const FN_IFFT_EVEN: u32 = 4;
const FN_COMBINE2_HI: u32 = 5;
const FN_SCALE_HI: u32 = 6;
const FN_DERIV_HI: u32 = 7;
const FN_ENERGY_HI: u32 = 8;
const FN_HERMITE_HI: u32 = 9;
const FN_SHUTDOWN: u32 = 10;

/// Data regions appended after the shared FFT layout.
struct Ext {
    zbuf: u32,   // masked, conjugated spectrum (complex)
    wbuf: u32,   // second transform output (complex)
    mask: u32,   // per-bin pass/stop multipliers (f64)
    ybuf: u32,   // filtered signal (f64)
    dbuf: u32,   // derivative (f64)
    sbuf: u32,   // moving-average energy (f64)
    herm: u32,   // Hermite basis, ORDERS x WIN f64
    coef: u32,   // six coefficients
    result: u32, // +0 npeaks, +4 peak index
    cnst: u32,   // +0 the 1/n scale factor
}

impl Ext {
    fn new(after: u32) -> Ext {
        let mut cursor = after;
        let mut take = |bytes: u32| {
            let base = cursor;
            cursor += (bytes + 63) & !63;
            base
        };
        Ext {
            zbuf: take(N as u32 * 16),
            wbuf: take(N as u32 * 16),
            mask: take(N as u32 * 8),
            ybuf: take(N as u32 * 8),
            dbuf: take(N as u32 * 8),
            sbuf: take(N as u32 * 8),
            herm: take((ORDERS * WIN * 8) as u32),
            coef: take(64),
            result: take(64),
            cnst: take(64),
        }
    }
}

/// z[k] = conj(mask[k] * x[k]) over bins [lo, hi): multiply each bin by
/// its mask entry and negate the imaginary part, readying the
/// inverse-via-forward transform.
fn emit_mask_conj(ext: &Ext, xbuf: u32, lo: usize, hi: usize, tag: &str) -> String {
    format!(
        "    la r5, {x:#x}
    la r6, {mask:#x}
    la r7, {zbuf:#x}
    la r8, {xend:#x}
    fsub f7, f7, f7
ek_mz_{tag}:
    fld f0, 0(r5)
    fld f1, 8(r5)
    fld f2, 0(r6)
    fmul f0, f0, f2
    fmul f1, f1, f2
    fsub f1, f7, f1
    fst f0, 0(r7)
    fst f1, 8(r7)
    addi r5, r5, 16
    addi r6, r6, 8
    addi r7, r7, 16
    bne r5, r8, ek_mz_{tag}
",
        x = xbuf + 16 * lo as u32,
        mask = ext.mask + 8 * lo as u32,
        zbuf = ext.zbuf + 16 * lo as u32,
        xend = xbuf + 16 * hi as u32,
    )
}

/// y[i] = re(w[i]) / n over [lo, hi), finishing the inverse transform.
fn emit_scale(ext: &Ext, lo: usize, hi: usize, tag: &str) -> String {
    format!(
        "    la r5, {wbuf:#x}
    la r6, {ybuf:#x}
    la r7, {cnst:#x}
    fld f1, 0(r7)
    la r8, {wend:#x}
ek_sc_{tag}:
    fld f0, 0(r5)
    fmul f0, f0, f1
    fst f0, 0(r6)
    addi r5, r5, 16
    addi r6, r6, 8
    bne r5, r8, ek_sc_{tag}
",
        wbuf = ext.wbuf + 16 * lo as u32,
        ybuf = ext.ybuf + 8 * lo as u32,
        cnst = ext.cnst,
        wend = ext.wbuf + 16 * hi as u32,
    )
}

/// Central difference d[i] = y[i+1] - y[i-1] over [lo, hi); the first and
/// last samples have no neighbours and hold zero.
fn emit_deriv(ext: &Ext, lo: usize, hi: usize, tag: &str) -> String {
    let i0 = lo.max(1);
    let i1 = hi.min(N - 1);
    let mut s = String::from("    fsub f7, f7, f7\n");
    if lo == 0 {
        s.push_str(&format!("    la r6, {:#x}\n    fst f7, 0(r6)\n", ext.dbuf));
    }
    s.push_str(&format!(
        "    la r5, {y:#x}
    la r6, {d:#x}
    la r8, {ystop:#x}
ek_dv_{tag}:
    fld f0, 16(r5)
    fld f1, 0(r5)
    fsub f0, f0, f1
    fst f0, 0(r6)
    addi r5, r5, 8
    addi r6, r6, 8
    bne r5, r8, ek_dv_{tag}
",
        y = ext.ybuf + 8 * (i0 - 1) as u32,
        d = ext.dbuf + 8 * i0 as u32,
        ystop = ext.ybuf + 8 * (i1 - 1) as u32,
    ));
    if hi == N {
        s.push_str("    fst f7, 0(r6)\n");
    }
    s
}

/// s[i] = sum of the last MA squared derivative samples, over [lo, hi);
/// zero while the averaging window is still filling.
fn emit_energy(ext: &Ext, lo: usize, hi: usize, tag: &str) -> String {
    let i0 = lo.max(MA - 1);
    let mut s = String::from("    fsub f7, f7, f7\n");
    if lo < MA - 1 {
        s.push_str(&format!(
            "    la r6, {sbuf:#x}
    li r9, {zeros}
ek_z_{tag}:
    fst f7, 0(r6)
    addi r6, r6, 8
    addi r9, r9, -1
    bne r9, r0, ek_z_{tag}
",
            sbuf = ext.sbuf + 8 * lo as u32,
            zeros = i0 - lo,
        ));
    } else {
        s.push_str(&format!("    la r6, {:#x}\n", ext.sbuf + 8 * i0 as u32));
    }
    s.push_str(&format!(
        "    la r5, {d:#x}
    la r8, {dstop:#x}
ek_ma_{tag}:
    fsub f0, f0, f0
    li r9, {MA}
    mv r10, r5
ek_me_{tag}:
    fld f1, 0(r10)
    fmul f1, f1, f1
    fadd f0, f0, f1
    addi r10, r10, 8
    addi r9, r9, -1
    bne r9, r0, ek_me_{tag}
    fst f0, 0(r6)
    addi r5, r5, 8
    addi r6, r6, 8
    bne r5, r8, ek_ma_{tag}
",
        d = ext.dbuf + 8 * (i0 + 1 - MA) as u32,
        dstop = ext.dbuf + 8 * (hi + 1 - MA) as u32,
    ));
    s
}

/// Argmax over the energy buffer comparing high words as signed integers,
/// then the threshold test. Stores npeaks at result+0 and the reported
/// peak index at result+4; leaves npeaks in r6.
fn emit_peak(ext: &Ext) -> String {
    let thr_hi = (THR.to_bits() >> 32) as u32;
    format!(
        "    la r5, {sbuf:#x}
    li r6, 0
    li r7, 0
    li r8, -1
ek_pk:
    lw r9, 4(r5)
    bge r8, r9, ek_pk0
    mv r8, r9
    mv r7, r6
ek_pk0:
    addi r5, r5, 8
    addi r6, r6, 1
    li r9, {n}
    bne r6, r9, ek_pk
    addi r7, r7, -{MA_LAG}
    bge r7, r0, ek_pk1
    li r7, 0
ek_pk1:
    la r5, {result:#x}
    sw r7, 4(r5)
    li r6, 0
    la r9, {thr_hi:#x}
    blt r9, r8, ek_pk2
    sw r6, 0(r5)
    j ek_pk3
ek_pk2:
    li r6, 1
    sw r6, 0(r5)
ek_pk3:
",
        sbuf = ext.sbuf,
        n = N,
        result = ext.result,
    )
}

/// Leaves the address of the Hermite window (WIN filtered samples around
/// the reported peak, clamped to the buffer) in r7.
fn emit_window_base(ext: &Ext) -> String {
    format!(
        "    la r9, {result:#x}
    lw r7, 4(r9)
    addi r7, r7, -{half}
    bge r7, r0, ek_b1
    li r7, 0
ek_b1:
    li r9, {max}
    bge r9, r7, ek_b2
    mv r7, r9
ek_b2:
    li r9, 8
    mul r7, r7, r9
    la r9, {ybuf:#x}
    add r7, r7, r9
",
        result = ext.result,
        half = WIN / 2,
        max = N - WIN,
        ybuf = ext.ybuf,
    )
}

/// One Hermite dot product: coef[j] = sum over the window of h_j * y.
/// Expects the window base address in r7; clobbers r9-r11 and f0-f2.
fn emit_hermite(ext: &Ext, j: usize) -> String {
    format!(
        "    la r10, {hj:#x}
    mv r11, r7
    fsub f0, f0, f0
    li r9, {WIN}
ek_hd{j}:
    fld f1, 0(r10)
    fld f2, 0(r11)
    fmul f1, f1, f2
    fadd f0, f0, f1
    addi r10, r10, 8
    addi r11, r11, 8
    addi r9, r9, -1
    bne r9, r0, ek_hd{j}
    la r9, {cj:#x}
    fst f0, 0(r9)
",
        hj = ext.herm + (j * WIN * 8) as u32,
        cj = ext.coef + 8 * j as u32,
    )
}

fn single_src(lay: &fft::Layout, lay2: &fft::Layout, ext: &Ext) -> String {
    let half = lay.n as usize / 2;
    let mut s = format!(".org {TEXT0:#x}\n");
    s.push_str(&fft::emit_call_half(lay, false));
    s.push_str(&fft::emit_call_half(lay, true));
    s.push_str(&fft::emit_combine(lay, 0, half as u32, "x"));
    s.push_str(&emit_mask_conj(ext, lay.out, 0, N, "m"));
    s.push_str(&fft::emit_call_half(lay2, false));
    s.push_str(&fft::emit_call_half(lay2, true));
    s.push_str(&fft::emit_combine(lay2, 0, half as u32, "w"));
    s.push_str(&emit_scale(ext, 0, N, "s"));
    s.push_str(&emit_deriv(ext, 0, N, "d"));
    s.push_str(&emit_energy(ext, 0, N, "e"));
    s.push_str(&emit_peak(ext));
    s.push_str("    beq r6, r0, ek_fin\n");
    s.push_str(&emit_window_base(ext));
    for j in 0..ORDERS {
        s.push_str(&emit_hermite(ext, j));
    }
    s.push_str("ek_fin:\n    halt\n");
    s.push_str(&fft::emit_fft_half(lay));
    s
}

/// Thread 0 of the dual variant: runs the lower half of every stage while
/// the side-kick handles the upper half, synchronizing over the channel at
/// each stage boundary (every stage needs the previous one complete).
fn dual_t0_src(lay: &fft::Layout, lay2: &fft::Layout, ext: &Ext, ch: &Channel) -> String {
    let q = lay.n as usize / 4;
    let stage = |s: &mut String, fn_id: u32, tag: &str, own: String| {
        s.push_str(&emit_invoke(ch, fn_id, tag));
        s.push_str(&own);
        s.push_str(&emit_wait(ch, tag));
    };
    let mut s = format!(".org {TEXT0:#x}\n");
    stage(&mut s, FN_FFT_EVEN, "f1", fft::emit_call_half(lay, true));
    stage(&mut s, FN_COMBINE1_HI, "c1", fft::emit_combine(lay, 0, q as u32, "xl"));
    stage(&mut s, FN_MASK_HI, "mk", emit_mask_conj(ext, lay.out, 0, N / 2, "ml"));
    stage(&mut s, FN_IFFT_EVEN, "f2", fft::emit_call_half(lay2, true));
    stage(&mut s, FN_COMBINE2_HI, "c2", fft::emit_combine(lay2, 0, q as u32, "wl"));
    stage(&mut s, FN_SCALE_HI, "sc", emit_scale(ext, 0, N / 2, "sl"));
    stage(&mut s, FN_DERIV_HI, "dv", emit_deriv(ext, 0, N / 2, "dl"));
    stage(&mut s, FN_ENERGY_HI, "ma", emit_energy(ext, 0, N / 2, "el"));
    s.push_str(&emit_peak(ext));
    s.push_str("    beq r6, r0, ek_fin\n");
    s.push_str(&emit_window_base(ext));
    // pass the window base to the side-kick, split the dot products
    s.push_str(&format!("    li r20, {:#x}\n    sw r7, 8(r20)\n", ch.base));
    let herm: String = (0..ORDERS / 2).map(|j| emit_hermite(ext, j)).collect();
    stage(&mut s, FN_HERMITE_HI, "h", herm);
    s.push_str("ek_fin:\n");
    s.push_str(&emit_invoke(ch, FN_SHUTDOWN, "z"));
    s.push_str("    halt\n");
    s.push_str(&fft::emit_fft_half(lay));
    s
}

fn dual_t1_src(lay: &fft::Layout, lay2: &fft::Layout, ext: &Ext, ch: &Channel) -> String {
    let q = lay.n as usize / 4;
    let half = lay.n as usize / 2;
    let tasks = [
        (FN_FFT_EVEN, "ek_fe"),
        (FN_COMBINE1_HI, "ek_c1"),
        (FN_MASK_HI, "ek_mk"),
        (FN_IFFT_EVEN, "ek_we"),
        (FN_COMBINE2_HI, "ek_c2"),
        (FN_SCALE_HI, "ek_sc"),
        (FN_DERIV_HI, "ek_dv"),
        (FN_ENERGY_HI, "ek_ma"),
        (FN_HERMITE_HI, "ek_hh"),
        (FN_SHUTDOWN, "ek_stop"),
    ]
    .map(|(fn_id, label)| Task { fn_id, label: label.into() });
    let mut s = format!(".org {TEXT1:#x}\n");
    s.push_str(&emit_dispatcher(ch, &tasks, DEFAULT_BACKOFF));
    // the ffthalf calls nest inside the dispatcher's jal, so those two
    // handlers save the link register around them
    s.push_str("ek_fe:\n    mv r29, r31\n");
    s.push_str(&fft::emit_call_half(lay, false));
    s.push_str("    mv r31, r29\n    ret\nek_we:\n    mv r29, r31\n");
    s.push_str(&fft::emit_call_half(lay2, false));
    s.push_str("    mv r31, r29\n    ret\nek_c1:\n");
    s.push_str(&fft::emit_combine(lay, q as u32, half as u32, "xh"));
    s.push_str("    ret\nek_mk:\n");
    s.push_str(&emit_mask_conj(ext, lay.out, N / 2, N, "mh"));
    s.push_str("    ret\nek_c2:\n");
    s.push_str(&fft::emit_combine(lay2, q as u32, half as u32, "wh"));
    s.push_str("    ret\nek_sc:\n");
    s.push_str(&emit_scale(ext, N / 2, N, "sh"));
    s.push_str("    ret\nek_dv:\n");
    s.push_str(&emit_deriv(ext, N / 2, N, "dh"));
    s.push_str("    ret\nek_ma:\n");
    s.push_str(&emit_energy(ext, N / 2, N, "eh"));
    s.push_str("    ret\nek_hh:\n    lw r7, 8(r20)\n");
    for j in ORDERS / 2..ORDERS {
        s.push_str(&emit_hermite(ext, j));
    }
    s.push_str("    ret\nek_stop:\n    halt\n");
    s.push_str(&fft::emit_fft_half(lay));
    s
}

/// Physicists' Hermite polynomial by the standard recurrence.
fn hermite_poly(j: usize, t: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * t);
    match j {
        0 => h0,
        1 => h1,
        _ => {
            for k in 2..=j {
                let h2 = 2.0 * t * h1 - 2.0 * (k - 1) as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    }
}

/// Hermite functions (polynomial times Gaussian) sampled over the beat
/// window, then orthonormalized against each other so the sampled vectors
/// form a proper projection basis.
fn hermite_basis() -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(ORDERS);
    for j in 0..ORDERS {
        let mut v: Vec<f64> = (0..WIN)
            .map(|i| {
                let t = (i as f64 - (WIN / 2) as f64) / 8.0;
                hermite_poly(j, t) * (-t * t / 2.0).exp()
            })
            .collect();
        for u in &basis {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= d * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for a in &mut v {
            *a /= norm;
        }
        basis.push(v);
    }
    basis
}

/// One synthetic heartbeat: baseline wander plus a biphasic QRS pulse plus
/// uniform noise, quantized to 12-bit ADC counts.
fn synth_beat(rng: &mut impl Rng) -> (Vec<f64>, usize) {
    let center = 120 + rng.gen_range(0..17);
    let samples = (0..N)
        .map(|i| {
            let t = i as f64;
            let d = t - center as f64;
            let v = 2048.0
                + 100.0 * (2.0 * std::f64::consts::PI * 0.8 * t / 360.0).sin()
                + 1400.0 * (-d * d / 6.0).exp()
                - 350.0 * (-(d - 5.0) * (d - 5.0) / 5.0).exp()
                - 250.0 * (-(d + 5.0) * (d + 5.0) / 5.0).exp()
                + rng.gen_range(-8.0..8.0);
            v.round().clamp(0.0, 4095.0)
        })
        .collect();
    (samples, center)
}

fn band_mask() -> Vec<f64> {
    (0..N)
        .map(|k| {
            let f = k.min(N - k);
            if (BAND_LO..=BAND_HI).contains(&f) { 1.0 } else { 0.0 }
        })
        .collect()
}

struct Mirror {
    y: Vec<f64>,
    npeaks: u32,
    peak: u32,
    coef: [f64; 6],
}

/// Host-side replica of the whole detection chain, same operation order as
/// the assembly so every stored value matches bit for bit.
fn chain_mirror(
    samples: &[f64],
    mask: &[f64],
    tw: &[(f64, f64)],
    ctw: &[(f64, f64)],
    herm: &[Vec<f64>],
) -> Mirror {
    let cin: Vec<(f64, f64)> = samples.iter().map(|&v| (v, 0.0)).collect();
    let x = fft::fft_mirror(&cin, tw, ctw);
    let z: Vec<(f64, f64)> = x
        .iter()
        .zip(mask)
        .map(|(&(re, im), &m)| (re * m, 0.0 - im * m))
        .collect();
    let w = fft::fft_mirror(&z, tw, ctw);
    let inv = 1.0 / N as f64;
    let y: Vec<f64> = w.iter().map(|&(re, _)| re * inv).collect();

    let mut d = vec![0.0f64; N];
    for i in 1..N - 1 {
        d[i] = y[i + 1] - y[i - 1];
    }
    let mut s = vec![0.0f64; N];
    for i in MA - 1..N {
        let mut acc = 0.0f64;
        for v in &d[i + 1 - MA..=i] {
            acc += v * v;
        }
        s[i] = acc;
    }

    let (mut best_hi, mut best) = (-1i32, 0u32);
    for (i, v) in s.iter().enumerate() {
        let hi = (v.to_bits() >> 32) as i32;
        if hi > best_hi {
            best_hi = hi;
            best = i as u32;
        }
    }
    let peak = best.saturating_sub(MA_LAG);
    let npeaks = (best_hi > (THR.to_bits() >> 32) as i32) as u32;

    let mut coef = [0.0f64; 6];
    if npeaks == 1 {
        let base = (peak as usize).saturating_sub(WIN / 2).min(N - WIN);
        for (j, h) in herm.iter().enumerate() {
            let mut acc = 0.0f64;
            for (hv, yv) in h.iter().zip(&y[base..base + WIN]) {
                acc += hv * yv;
            }
            coef[j] = acc;
        }
    }
    Mirror { y, npeaks, peak, coef }
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h = (h ^ b as u64).wrapping_mul(0x1000_0000_01b3);
    }
    h
}

pub fn build(scenario: Scenario, seed: u64) -> Built {
    let lay = fft::Layout::new(N as u32);
    let ext = Ext::new(lay.end);
    // the inverse transform reuses the tables and work buffer, reading the
    // conjugated spectrum and writing its own output
    let lay2 = fft::Layout { input: ext.zbuf, out: ext.wbuf, ..lay.clone() };
    let ch = Channel::new(DEFAULT_CHANNEL_BASE);

    let mut rng = rng_for("ecg", seed);
    let (samples, center) = synth_beat(&mut rng);
    let mask = band_mask();
    let tw = fft::stage_twiddles(N / 2);
    let ctw = fft::twiddles(N);
    let br: Vec<u32> =
        (0..N as u32 / 2).map(|i| fft::bitrev(i, (N as u32 / 2).trailing_zeros())).collect();
    let herm = hermite_basis();
    let mirror = chain_mirror(&samples, &mask, &tw, &ctw, &herm);

    let cin: Vec<(f64, f64)> = samples.iter().map(|&v| (v, 0.0)).collect();
    let cin_bytes = fft::pairs_bytes(&cin);
    let checksum = fnv64(&cin_bytes);

    let (t0_src, t1_src) = match scenario {
        Scenario::DualActive => (
            dual_t0_src(&lay, &lay2, &ext, &ch),
            Some(dual_t1_src(&lay, &lay2, &ext, &ch)),
        ),
        Scenario::T1Spinning => (single_src(&lay, &lay2, &ext), Some(spinning_dispatcher())),
        _ => (single_src(&lay, &lay2, &ext), None),
    };

    let herm_flat: Vec<f64> = herm.iter().flatten().copied().collect();
    let (input, input_len) = (lay.input, N as u32 * 16);
    let (result, coef_base, ybuf) = (ext.result, ext.coef, ext.ybuf);
    Built {
        name: "ecg",
        scenario,
        t0_src,
        t1_src,
        regions: vec![
            Region::init(lay.input, cin_bytes),
            Region::zeroed(lay.halves, N as u32 * 16),
            Region::zeroed(lay.out, N as u32 * 16),
            Region::init(lay.tw, fft::pairs_bytes(&tw)),
            Region::init(lay.ctw, fft::pairs_bytes(&ctw)),
            Region::init(lay.br, u32_bytes(&br)),
            Region::zeroed(ext.zbuf, N as u32 * 16),
            Region::zeroed(ext.wbuf, N as u32 * 16),
            Region::init(ext.mask, f64_bytes(&mask)),
            Region::zeroed(ext.ybuf, N as u32 * 8),
            Region::zeroed(ext.dbuf, N as u32 * 8),
            Region::zeroed(ext.sbuf, N as u32 * 8),
            Region::init(ext.herm, f64_bytes(&herm_flat)),
            Region::zeroed(ext.coef, 64),
            Region::zeroed(ext.result, 64),
            Region::init(ext.cnst, f64_bytes(&[1.0 / N as f64])),
        ],
        verify: Box::new(move |mem| {
            let mut bytes = Vec::with_capacity(input_len as usize);
            for k in 0..input_len {
                bytes.push(mem.read_byte(input + k).map_err(|e| e.to_string())?);
            }
            if fnv64(&bytes) != checksum {
                return Err("sample buffer checksum mismatch".into());
            }
            for (i, want) in mirror.y.iter().enumerate() {
                let got = mem.read_f64(ybuf + 8 * i as u32).map_err(|e| e.to_string())?;
                if got.to_bits() != want.to_bits() {
                    return Err(format!("filtered[{i}]: got {got:e}, want {want:e}"));
                }
            }
            let npeaks = mem.read_u32(result).map_err(|e| e.to_string())?;
            if npeaks == 0 {
                return Err("no beat detected: peak energy below threshold".into());
            }
            if npeaks != mirror.npeaks {
                return Err(format!("npeaks: got {npeaks}, want {}", mirror.npeaks));
            }
            let peak = mem.read_u32(result + 4).map_err(|e| e.to_string())?;
            if peak != mirror.peak {
                return Err(format!("peak index: got {peak}, want {}", mirror.peak));
            }
            let err = peak as i64 - center as i64;
            if err.abs() > 5 {
                return Err(format!("peak {peak} is {err} samples off the beat at {center}"));
            }
            for (j, want) in mirror.coef.iter().enumerate() {
                let got = mem.read_f64(coef_base + 8 * j as u32).map_err(|e| e.to_string())?;
                if got.to_bits() != want.to_bits() {
                    return Err(format!("coef[{j}]: got {got:e}, want {want:e}"));
                }
            }
            Ok(())
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixtures() -> (Vec<f64>, Vec<(f64, f64)>, Vec<(f64, f64)>, Vec<Vec<f64>>) {
        (band_mask(), fft::stage_twiddles(N / 2), fft::twiddles(N), hermite_basis())
    }

    #[test]
    fn flat_signal_detects_no_peaks() {
        let (mask, tw, ctw, herm) = fixtures();
        let flat = vec![2048.0; N];
        let m = chain_mirror(&flat, &mask, &tw, &ctw, &herm);
        assert_eq!(m.npeaks, 0);
        assert!(m.coef.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn mirror_detects_beat_near_truth() {
        let (mask, tw, ctw, herm) = fixtures();
        for seed in 0..20 {
            let (samples, center) = synth_beat(&mut rng_for("ecg", seed));
            let m = chain_mirror(&samples, &mask, &tw, &ctw, &herm);
            assert_eq!(m.npeaks, 1, "seed {seed}: beat missed");
            let err = m.peak as i64 - center as i64;
            assert!(err.abs() <= 5, "seed {seed}: peak {} vs beat {center}", m.peak);
        }
    }

    #[test]
    fn hermite_basis_is_orthonormal() {
        let herm = hermite_basis();
        for i in 0..ORDERS {
            for j in 0..ORDERS {
                let d: f64 = herm[i].iter().zip(&herm[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-9, "<h{i}, h{j}> = {d}");
            }
        }
    }

    #[test]
    fn hermite_reconstruction_error_decreases_with_order() {
        let (mask, tw, ctw, herm) = fixtures();
        let (samples, _) = synth_beat(&mut rng_for("ecg", 1));
        let m = chain_mirror(&samples, &mask, &tw, &ctw, &herm);
        let base = (m.peak as usize).saturating_sub(WIN / 2).min(N - WIN);
        let w = &m.y[base..base + WIN];
        let mut prev = f64::INFINITY;
        for orders in 2..=ORDERS {
            let mut recon = vec![0.0f64; WIN];
            for h in &herm[..orders] {
                let c: f64 = h.iter().zip(w).map(|(a, b)| a * b).sum();
                for (r, hv) in recon.iter_mut().zip(h) {
                    *r += c * hv;
                }
            }
            let err: f64 =
                w.iter().zip(&recon).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(err < prev, "order {orders}: error {err} did not improve on {prev}");
            prev = err;
        }
    }
}
