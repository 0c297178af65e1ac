//! Randomized properties of the shared memory unit: replacement policy,
//! write-through coherence, arbitration fairness, the blocking-miss rule
//! and TAS mutual exclusion.

use proptest::prelude::*;

use ajt_sim::asm::assemble;
use ajt_sim::core::{Core, CoreConfig, ExitStatus, Thread1Mode};
use ajt_sim::memunit::{Admission, Arbiter, CacheConfig, MemRequest, MemoryUnit, ReqKind};

const MEM_TOP: u32 = 0x20000;

fn small_unit() -> MemoryUnit {
    let cfg = CacheConfig {
        size_bytes: 4096,
        associativity: 4,
        miss_penalty: 30,
    };
    let mut u = MemoryUnit::new(cfg, cfg);
    u.mem.map_region(0, 2 * MEM_TOP);
    u
}

#[derive(Debug, Clone, Copy)]
struct Op {
    kind: ReqKind,
    addr: u32,
    data: u64,
}

fn op_strategy() -> impl Strategy<Value = Op> {
    (0u8..4, 0..MEM_TOP / 8, any::<u64>()).prop_map(|(k, slot, data)| {
        // instruction fetches go to their own range: nothing writes code,
        // so the icache never holds a deliberately stale line
        let (kind, addr) = match k {
            0 => (ReqKind::Load, slot * 8),
            1 => (ReqKind::Store, slot * 8),
            2 => (ReqKind::Tas, slot * 8 + 1),
            _ => (ReqKind::IFetch, MEM_TOP + slot * 8),
        };
        Op { kind, addr, data }
    })
}

fn width(kind: ReqKind) -> u8 {
    match kind {
        ReqKind::IFetch => 8,
        ReqKind::Tas => 1,
        _ => 4,
    }
}

/// Run a request trace, spacing requests out so every miss and TAS lock
/// window has drained before the next one (the properties here are about
/// cache state, not admission timing).
fn run_trace(u: &mut MemoryUnit, ops: &[(usize, Op)]) {
    let mut now = 0u64;
    for &(tid, op) in ops {
        now += 40;
        u.expire_lock(now);
        let req = MemRequest {
            tid,
            kind: op.kind,
            addr: op.addr,
            width: width(op.kind),
            data: op.data,
        };
        u.service(&req, now).expect("aligned mapped access");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    /// After any access to a set, the replacement victim is never the most
    /// recently used way.
    #[test]
    fn nmru_victim_is_never_the_mru_way(
        ops in proptest::collection::vec((0usize..2, op_strategy()), 1..40),
    ) {
        let mut u = small_unit();
        run_trace(&mut u, &ops);
        for &(_, op) in &ops {
            let (cache, label) = if op.kind == ReqKind::IFetch {
                (&u.icache, "icache")
            } else {
                (&u.dcache, "dcache")
            };
            let set = cache.set_index_of(op.addr);
            prop_assert_ne!(cache.victim_way(set), cache.mru_way(set), "{} set {}", label, set);
        }
    }

    /// Write-through: at any quiescent point every valid cache line is
    /// byte-identical to backing memory.
    #[test]
    fn caches_stay_coherent_with_backing_memory(
        ops in proptest::collection::vec((0usize..2, op_strategy()), 1..40),
    ) {
        let mut u = small_unit();
        run_trace(&mut u, &ops);
        prop_assert!(u.dcache.coherent_with(&u.mem), "dcache diverged");
        prop_assert!(u.icache.coherent_with(&u.mem), "icache diverged");
    }

    /// Under saturation (both threads requesting every cycle) the round
    /// robin never lets the grant counts drift apart by more than one,
    /// regardless of what single-sided traffic came before.
    #[test]
    fn arbiter_grant_imbalance_is_at_most_one(
        warmup in proptest::collection::vec(any::<bool>(), 0..8),
        rounds in 1usize..200,
    ) {
        let mut a = Arbiter::default();
        for w in warmup {
            a.grant(w, !w);
        }
        let mut granted = [0i64; 2];
        for _ in 0..rounds {
            let g = a.grant(true, true).expect("saturated");
            granted[g] += 1;
        }
        prop_assert!((granted[0] - granted[1]).abs() <= 1, "{granted:?}");
    }

    /// While a miss is in flight the unit admits nothing from either
    /// thread; the first cycle after the penalty it admits again.
    #[test]
    fn blocking_miss_admits_zero_grants(
        tid in 0usize..2,
        op in op_strategy(),
        start in 0u64..1000,
    ) {
        let mut u = small_unit();
        let req = MemRequest { tid, kind: op.kind, addr: op.addr, width: width(op.kind), data: op.data };
        let r = u.service(&req, start).expect("mapped");
        prop_assert!(!r.hit, "cold cache access must miss");
        for now in start + 1..start + 31 {
            prop_assert_eq!(u.admit(0, now), Admission::Busy, "cycle {}", now);
            prop_assert_eq!(u.admit(1, now), Admission::Busy, "cycle {}", now);
        }
        u.expire_lock(start + 40);
        prop_assert_eq!(u.admit(1 - tid, start + 40), Admission::Ok);
    }

    /// Two threads incrementing a shared counter under a TAS spinlock never
    /// lose an update, whatever the section lengths and backoff are.
    #[test]
    fn tas_mutual_exclusion_loses_zero_increments(
        limit in 1u32..24,
        crit_work in 0u32..6,
        out_work in 0u32..6,
        backoff in 1u32..8,
    ) {
        let emit = |org: u32| {
            let work = |n: u32, tag: &str| if n == 0 {
                String::new()
            } else {
                format!("    li r9, {n}\nw{tag}:\n    addi r9, r9, -1\n    bne r9, r0, w{tag}\n")
            };
            format!(
                ".org {org:#x}
    la r2, 0x10000
loop:
spin:
    lb r7, 0(r2)
    bne r7, r0, back
    tas r7, 0(r2)
    beq r7, r0, got
back:
    li r8, {backoff}
bk:
    addi r8, r8, -1
    bne r8, r0, bk
    j spin
got:
    lw r4, 4(r2)
    li r5, {limit}
    beq r4, r5, done
    addi r4, r4, 1
    sw r4, 4(r2)
{crit}    sb r0, 0(r2)
{out}    j loop
done:
    sb r0, 0(r2)
    halt
",
                crit = work(crit_work, "c"),
                out = work(out_work, "o"),
            )
        };
        let p0 = assemble(&emit(0x1000)).expect("assembles");
        let p1 = assemble(&emit(0x4000)).expect("assembles");
        let mut core = Core::new(CoreConfig {
            thread1_mode: Thread1Mode::Active,
            ..CoreConfig::default()
        });
        core.load_program(&p0);
        core.load_program(&p1);
        core.unit.mem.map_region(0x10000, 64);
        core.set_entry(0, p0.base_address);
        core.set_entry(1, p1.base_address);
        let r = core.run();
        prop_assert_eq!(r.exit, ExitStatus::Halted);
        prop_assert_eq!(core.unit.mem.read_u32(0x10004).unwrap(), limit);
        prop_assert_eq!(core.unit.mem.read_byte(0x10000).unwrap(), 0);
    }
}
