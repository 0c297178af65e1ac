//! fft: 4096-point complex FFT over double-precision pairs, computed as
//! two 2048-point FFTs of the even- and odd-decimated samples plus one
//! combine stage. The half-size transform is an iterative radix-2
//! decimation-in-time FFT driven by a host-built bit-reversal table and
//! twiddle table. The dual variant runs the even half on thread 1 and the
//! odd half on thread 0, which then combines; the single variant runs the
//! identical three steps in sequence, so the outputs match bit for bit.

use rand::Rng;

use super::{
    Built, Region, Scenario, f64_bytes, rng_for, spinning_dispatcher, u32_bytes, TEXT0, TEXT1,
};

/// Memory layout for an n-point transform, everything 64-byte aligned.
/// Complex numbers are (re, im) f64 pairs, 16 bytes each. The ecg workload
/// reuses this layout (and the emitters below) for its band-pass filter.
#[derive(Clone)]
pub(super) struct Layout {
    pub(super) n: u32,
    pub(super) input: u32,
    pub(super) halves: u32,
    pub(super) ebuf: u32,
    pub(super) obuf: u32,
    pub(super) out: u32,
    pub(super) tw: u32,
    pub(super) ctw: u32,
    pub(super) br: u32,
    pub(super) end: u32,
}

impl Layout {
    pub(super) fn new(n: u32) -> Layout {
        let mut cursor = super::DATA;
        let mut take = |bytes: u32| {
            let base = cursor;
            cursor += (bytes + 63) & !63;
            base
        };
        let input = take(n * 16);
        // the two half-size work buffers are interleaved line by line
        // (even-half element k at halves + 32k, odd-half at halves +
        // 32k + 16), so in the dual run both threads fill and reuse the
        // same cache lines instead of evicting each other
        let halves = take(n * 16);
        let (ebuf, obuf) = (halves, halves + 16);
        let out = take(n * 16);
        let tw = take(n * 8); // stage-major twiddles for the half-size FFT
        let ctw = take(n * 8); // n/2 twiddles for the combine stage
        let br = take(n * 2); // n/2 bit-reversal word offsets
        Layout { n, input, halves, ebuf, obuf, out, tw, ctw, br, end: cursor }
    }
}

/// Elements per blocked-stage tile; a tile spans 8KB of the interleaved
/// buffer, which both half-FFTs walk together.
const BLK: u32 = 256;

/// Stage sweep: run stages m = m0, 2*m0, ... while m != m_stop over the
/// region [base register r4, r4 + region_bytes). The twiddle stride uses
/// the full transform size, so the same code serves blocked and global
/// stages. Expects r10 = m0 on entry; clobbers r9-r19 and f0-f6.
fn emit_stages(lay: &Layout, tag: &str, region_bytes: u32, m_stop: u32) -> String {
    format!(
        "fh_stage_{tag}:
    li r9, 8
    mul r9, r10, r9
    la r12, {tw_m16:#x}
    add r12, r12, r9       ; this stage's twiddle table: tw + (m/2-1)*16
    li r11, 16
    mul r11, r10, r11      ; half-group in buffer bytes = (m/2)*32
    li r14, 32
    mul r14, r10, r14      ; group stride in buffer bytes
    li r13, 0              ; group offset
fh_grp_{tag}:
    add r15, r4, r13       ; top half cursor
    add r16, r15, r11      ; bottom half cursor
    add r19, r15, r11      ; top half end
    mv r17, r12
fh_bfly_{tag}:
    fld f0, 0(r17)         ; twiddle
    fld f1, 8(r17)
    fld f2, 0(r16)         ; bottom element
    fld f3, 8(r16)
    fmul f4, f0, f2
    fmul f5, f1, f3
    fsub f4, f4, f5        ; t.re
    fmul f5, f0, f3
    fmul f6, f1, f2
    fadd f5, f5, f6        ; t.im
    fld f0, 0(r15)         ; top element
    fld f1, 8(r15)
    fadd f2, f0, f4
    fst f2, 0(r15)
    fadd f3, f1, f5
    fst f3, 8(r15)
    fsub f2, f0, f4
    fst f2, 0(r16)
    fsub f3, f1, f5
    fst f3, 8(r16)
    addi r17, r17, 16
    addi r15, r15, 32
    addi r16, r16, 32
    bne r15, r19, fh_bfly_{tag}
    add r13, r13, r14
    la r9, {region_bytes}
    bne r13, r9, fh_grp_{tag}
    add r10, r10, r10
    la r9, {m_stop}
    bne r10, r9, fh_stage_{tag}
",
        tw_m16 = lay.tw - 16,
    )
}

/// Like emit_stages but two butterflies per iteration with loads and
/// stores grouped line by line, so each 64-byte line costs one fill even
/// when several streams land in the same cache set. Used for the global
/// stages, whose groups are too large to stay resident. Requires group
/// length m >= 4. Same butterflies, same values.
fn emit_stages_paired(lay: &Layout, tag: &str, region_bytes: u32, m_stop: u32) -> String {
    format!(
        "fh_stage_{tag}:
    li r9, 8
    mul r9, r10, r9
    la r12, {tw_m16:#x}
    add r12, r12, r9       ; this stage's twiddle table: tw + (m/2-1)*16
    li r11, 16
    mul r11, r10, r11      ; half-group in buffer bytes = (m/2)*32
    li r14, 32
    mul r14, r10, r14      ; group stride in buffer bytes
    li r13, 0              ; group offset
fh_grp_{tag}:
    add r15, r4, r13       ; top half cursor
    add r16, r15, r11      ; bottom half cursor
    add r19, r15, r11      ; top half end
    mv r17, r12
fh_bfly_{tag}:
    fld f0, 0(r17)         ; two twiddles
    fld f1, 8(r17)
    fld f2, 16(r17)
    fld f3, 24(r17)
    fld f4, 0(r16)         ; two bottom elements
    fld f5, 8(r16)
    fld f6, 32(r16)
    fld f7, 40(r16)
    fmul f8, f0, f4
    fmul f12, f1, f5
    fsub f8, f8, f12       ; t0.re
    fmul f9, f0, f5
    fmul f12, f1, f4
    fadd f9, f9, f12       ; t0.im
    fmul f10, f2, f6
    fmul f12, f3, f7
    fsub f10, f10, f12     ; t1.re
    fmul f11, f2, f7
    fmul f12, f3, f6
    fadd f11, f11, f12     ; t1.im
    fld f12, 0(r15)        ; two top elements
    fld f13, 8(r15)
    fld f14, 32(r15)
    fld f15, 40(r15)
    fadd f4, f12, f8
    fst f4, 0(r15)
    fadd f5, f13, f9
    fst f5, 8(r15)
    fadd f6, f14, f10
    fst f6, 32(r15)
    fadd f7, f15, f11
    fst f7, 40(r15)
    fsub f4, f12, f8
    fst f4, 0(r16)
    fsub f5, f13, f9
    fst f5, 8(r16)
    fsub f6, f14, f10
    fst f6, 32(r16)
    fsub f7, f15, f11
    fst f7, 40(r16)
    addi r17, r17, 32
    addi r15, r15, 64
    addi r16, r16, 64
    bne r15, r19, fh_bfly_{tag}
    add r13, r13, r14
    la r9, {region_bytes}
    bne r13, r9, fh_grp_{tag}
    add r10, r10, r10
    la r9, {m_stop}
    bne r10, r9, fh_stage_{tag}
",
        tw_m16 = lay.tw - 16,
    )
}

/// Half-size FFT subroutine: r1 = view base, r2 = view stride in bytes,
/// r3 = destination buffer (contiguous complex pairs). Stages whose groups
/// fit a tile run tile by tile for cache locality; the results are the
/// same butterflies in a different order, so the output is unchanged.
/// Clobbers r4-r19 and f0-f6.
pub(super) fn emit_fft_half(lay: &Layout) -> String {
    let half = lay.n / 2;
    let blk = BLK.min(half);
    let mut s = format!(
        "ffthalf:
    la r6, {br:#x}
    mv r7, r3
    li r8, {half}
fh_brc:
    lw r9, 0(r6)           ; source element index
    mul r9, r9, r2
    add r9, r9, r1
    fld f0, 0(r9)
    fld f1, 8(r9)
    fst f0, 0(r7)
    fst f1, 8(r7)
    addi r6, r6, 4
    addi r7, r7, 32
    addi r8, r8, -1
    bne r8, r0, fh_brc
    mv r4, r3              ; tile base
    la r5, {buf_bytes}
    add r5, r5, r3         ; buffer end
fh_blk:
    li r10, 2              ; group length m
{tile_stages}    la r9, {blk_bytes}
    add r4, r4, r9
    bne r4, r5, fh_blk
",
        br = lay.br,
        buf_bytes = half * 32,
        blk_bytes = blk * 32,
        tile_stages = emit_stages(lay, "t", blk * 32, 2 * blk),
    );
    if blk < half {
        s.push_str(&format!(
            "    mv r4, r3
    la r10, {m0}
{global_stages}",
            m0 = 2 * blk,
            global_stages = emit_stages_paired(lay, "g", half * 32, 2 * half),
        ));
    }
    s.push_str("    ret\n");
    s
}

/// Combine stage over bins [lo, hi): out[k] = e[k] + w^k o[k],
/// out[k+n/2] = e[k] - w^k o[k], two bins per iteration with line-grouped
/// loads and stores. Clobbers r5-r10 and f0-f15.
pub(super) fn emit_combine(lay: &Layout, lo: u32, hi: u32, tag: &str) -> String {
    format!(
        "    la r5, {ebuf:#x}
    la r7, {ctw:#x}
    la r8, {out:#x}
    la r9, {out_hi:#x}
    la r10, {ebuf_end:#x}
cmb_{tag}:
    fld f0, 0(r7)          ; two combine twiddles
    fld f1, 8(r7)
    fld f2, 16(r7)
    fld f3, 24(r7)
    fld f4, 16(r5)         ; two odd-half bins
    fld f5, 24(r5)
    fld f6, 48(r5)
    fld f7, 56(r5)
    fmul f8, f0, f4
    fmul f12, f1, f5
    fsub f8, f8, f12       ; t0.re
    fmul f9, f0, f5
    fmul f12, f1, f4
    fadd f9, f9, f12       ; t0.im
    fmul f10, f2, f6
    fmul f12, f3, f7
    fsub f10, f10, f12     ; t1.re
    fmul f11, f2, f7
    fmul f12, f3, f6
    fadd f11, f11, f12     ; t1.im
    fld f12, 0(r5)         ; two even-half bins
    fld f13, 8(r5)
    fld f14, 32(r5)
    fld f15, 40(r5)
    fadd f4, f12, f8
    fst f4, 0(r8)
    fadd f5, f13, f9
    fst f5, 8(r8)
    fadd f6, f14, f10
    fst f6, 16(r8)
    fadd f7, f15, f11
    fst f7, 24(r8)
    fsub f4, f12, f8
    fst f4, 0(r9)
    fsub f5, f13, f9
    fst f5, 8(r9)
    fsub f6, f14, f10
    fst f6, 16(r9)
    fsub f7, f15, f11
    fst f7, 24(r9)
    addi r5, r5, 64
    addi r7, r7, 32
    addi r8, r8, 32
    addi r9, r9, 32
    bne r5, r10, cmb_{tag}
",
        ebuf = lay.halves + lo * 32,
        ctw = lay.ctw + lo * 16,
        out = lay.out + lo * 16,
        out_hi = lay.out + lay.n * 8 + lo * 16,
        ebuf_end = lay.halves + hi * 32,
    )
}

/// Call ffthalf on the even- or odd-decimated view of the input.
pub(super) fn emit_call_half(lay: &Layout, odd: bool) -> String {
    format!(
        "    la r1, {view:#x}
    li r2, 32
    la r3, {dst:#x}
    jal ffthalf
",
        view = lay.input + if odd { 16 } else { 0 },
        dst = if odd { lay.obuf } else { lay.ebuf },
    )
}

fn single_src(lay: &Layout) -> String {
    format!(
        ".org {TEXT0:#x}\n{even}{odd}{combine}    halt\n{sub}",
        even = emit_call_half(lay, false),
        odd = emit_call_half(lay, true),
        combine = emit_combine(lay, 0, lay.n / 2, "s"),
        sub = emit_fft_half(lay),
    )
}

/// Both-ways rendezvous on the shared sync line: each thread raises its
/// own flag and polls the other's.
fn emit_rendezvous(tid: usize) -> String {
    format!(
        "    la r26, {sync:#x}
    li r27, 1
    sw r27, {mine}(r26)
fx_rv:
    lw r27, {theirs}(r26)
    beq r27, r0, fx_rv
",
        sync = super::SYNC_ADDR,
        mine = 4 * tid,
        theirs = 4 * (1 - tid),
    )
}

fn dual_src(lay: &Layout, tid: usize) -> String {
    // thread 1 transforms the even half, thread 0 the odd half; after a
    // rendezvous each combines half of the bins
    let (org, half_call, lo, hi) = if tid == 1 {
        (TEXT1, emit_call_half(lay, false), lay.n / 4, lay.n / 2)
    } else {
        (TEXT0, emit_call_half(lay, true), 0, lay.n / 4)
    };
    format!(
        ".org {org:#x}\n{half_call}{rendezvous}{combine}    halt\n{sub}",
        rendezvous = emit_rendezvous(tid),
        combine = emit_combine(lay, lo, hi, "d"),
        sub = emit_fft_half(lay),
    )
}

pub(super) fn bitrev(i: u32, bits: u32) -> u32 {
    i.reverse_bits() >> (32 - bits)
}

/// Host-side replica of ffthalf over a decimated view, same operation
/// order, so the simulated output can be checked bit for bit.
fn fft_half_mirror(view: &[(f64, f64)], tw: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let n = view.len();
    let bits = n.trailing_zeros();
    let mut buf: Vec<(f64, f64)> = (0..n).map(|i| view[bitrev(i as u32, bits) as usize]).collect();
    let mut m = 2;
    let mut tbase = 0;
    while m <= n {
        let half = m / 2;
        for k in (0..n).step_by(m) {
            for j in 0..half {
                let (wr, wi) = tw[tbase + j];
                let (br, bi) = buf[k + half + j];
                let (tr, ti) = (wr * br - wi * bi, wr * bi + wi * br);
                let (ur, ui) = buf[k + j];
                buf[k + j] = (ur + tr, ui + ti);
                buf[k + half + j] = (ur - tr, ui - ti);
            }
        }
        tbase += half;
        m *= 2;
    }
    buf
}

/// Host-side replica of the whole three-step transform.
pub(super) fn fft_mirror(x: &[(f64, f64)], tw: &[(f64, f64)], ctw: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let n = x.len();
    let even: Vec<_> = x.iter().copied().step_by(2).collect();
    let odd: Vec<_> = x.iter().copied().skip(1).step_by(2).collect();
    let e = fft_half_mirror(&even, tw);
    let o = fft_half_mirror(&odd, tw);
    let mut out = vec![(0.0, 0.0); n];
    for k in 0..n / 2 {
        let (wr, wi) = ctw[k];
        let (or_, oi) = o[k];
        let (tr, ti) = (wr * or_ - wi * oi, wr * oi + wi * or_);
        let (er, ei) = e[k];
        out[k] = (er + tr, ei + ti);
        out[k + n / 2] = (er - tr, ei - ti);
    }
    out
}

/// Stage-major twiddle table: for each group length m = 2, 4, ..., n the
/// m/2 values e^(-2*pi*i*j/m), concatenated. Matches the asm layout.
pub(super) fn stage_twiddles(n: usize) -> Vec<(f64, f64)> {
    let mut v = Vec::new();
    let mut m = 2;
    while m <= n {
        for j in 0..m / 2 {
            let a = -2.0 * std::f64::consts::PI * j as f64 / m as f64;
            v.push((a.cos(), a.sin()));
        }
        m *= 2;
    }
    v
}

pub(super) fn twiddles(n: usize) -> Vec<(f64, f64)> {
    (0..n / 2)
        .map(|j| {
            let a = -2.0 * std::f64::consts::PI * j as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .collect()
}

pub(super) fn pairs_bytes(v: &[(f64, f64)]) -> Vec<u8> {
    let flat: Vec<f64> = v.iter().flat_map(|&(r, i)| [r, i]).collect();
    f64_bytes(&flat)
}

/// Build an n-point instance. The default benchmark size is 4096; smaller
/// powers of two are used by the direct-DFT cross-check.
pub fn build_n(n: u32, scenario: Scenario, seed: u64) -> Built {
    assert!(n.is_power_of_two() && n >= 8, "fft size must be a power of two >= 8");
    let lay = Layout::new(n);
    let mut rng = rng_for("fft", seed);
    let x: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();

    let tw = stage_twiddles(n as usize / 2);
    let ctw = twiddles(n as usize);
    let br: Vec<u32> = (0..n / 2).map(|i| bitrev(i, (n / 2).trailing_zeros())).collect();
    let expect = fft_mirror(&x, &tw, &ctw);

    let (t0_src, t1_src) = match scenario {
        Scenario::DualActive => (dual_src(&lay, 0), Some(dual_src(&lay, 1))),
        Scenario::T1Spinning => (single_src(&lay), Some(spinning_dispatcher())),
        _ => (single_src(&lay), None),
    };

    let out = lay.out;
    Built {
        name: "fft",
        scenario,
        t0_src,
        t1_src,
        regions: vec![
            Region::init(lay.input, pairs_bytes(&x)),
            Region::zeroed(lay.halves, n * 16),
            Region::zeroed(lay.out, n * 16),
            Region::init(lay.tw, pairs_bytes(&tw)),
            Region::init(lay.ctw, pairs_bytes(&ctw)),
            Region::init(lay.br, u32_bytes(&br)),
        ],
        verify: Box::new(move |mem| {
            for (k, want) in expect.iter().enumerate() {
                let re = mem.read_f64(out + 16 * k as u32).map_err(|e| e.to_string())?;
                let im = mem.read_f64(out + 16 * k as u32 + 8).map_err(|e| e.to_string())?;
                if re.to_bits() != want.0.to_bits() || im.to_bits() != want.1.to_bits() {
                    return Err(format!(
                        "bin {k}: got ({re:e}, {im:e}), want ({:e}, {:e})",
                        want.0, want.1
                    ));
                }
            }
            Ok(())
        }),
    }
}

pub fn build(scenario: Scenario, seed: u64) -> Built {
    build_n(4096, scenario, seed)
}

/// Direct O(n^2) DFT used to cross-check the radix-2 implementation.
pub fn dft(x: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut acc = (0.0f64, 0.0f64);
            for (j, &(re, im)) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (j * k % n) as f64 / n as f64;
                let (c, s) = (a.cos(), a.sin());
                acc.0 += re * c - im * s;
                acc.1 += re * s + im * c;
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_of_zeros_is_zeros() {
        let n = 256;
        let x = vec![(0.0, 0.0); n];
        let out = fft_mirror(&x, &stage_twiddles(n / 2), &twiddles(n));
        assert!(out.iter().all(|&(r, i)| r == 0.0 && i == 0.0));
    }

    #[test]
    fn mirror_of_impulse_is_flat() {
        let n = 256;
        let mut x = vec![(0.0, 0.0); n];
        x[0] = (1.0, 0.0);
        let out = fft_mirror(&x, &stage_twiddles(n / 2), &twiddles(n));
        for &(r, i) in &out {
            assert!((r - 1.0).abs() < 1e-12 && i.abs() < 1e-12, "({r}, {i})");
        }
    }

    #[test]
    fn mirror_matches_direct_dft() {
        let mut rng = rng_for("fft-test", 7);
        let n = 256;
        let x: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let fast = fft_mirror(&x, &stage_twiddles(n / 2), &twiddles(n));
        let slow = dft(&x);
        for (k, (f, s)) in fast.iter().zip(&slow).enumerate() {
            let mag = (s.0 * s.0 + s.1 * s.1).sqrt().max(1.0);
            assert!(
                ((f.0 - s.0).powi(2) + (f.1 - s.1).powi(2)).sqrt() / mag < 1e-9,
                "bin {k} diverges: {f:?} vs {s:?}"
            );
        }
    }

    #[test]
    fn layouts_do_not_collide_with_text() {
        let lay = Layout::new(4096);
        assert!(lay.end > lay.input);
        assert!(lay.input >= super::super::DATA);
    }
}
