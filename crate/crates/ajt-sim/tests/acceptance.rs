//! The acceptance gate: one test per release criterion, each printing a
//! single PASS/FAIL line (run with --nocapture to see them). A criterion
//! failure fails the test with the measured numbers in the message.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use ajt_sim::core::{Core, CoreConfig, ExitStatus, Thread1Mode};
use ajt_sim::asm::assemble;
use ajt_sim::memunit::ReqKind;
use ajt_sim::sidekick::{measure_roundtrip, DEFAULT_CHANNEL_BASE};
use ajt_sim::workloads::{self, Outcome, Scenario, NAMES};

const SEED: u64 = 1;

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn new() -> Gate {
        Gate { failures: Vec::new() }
    }

    fn check(&mut self, criterion: &str, ok: bool, detail: String) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("{verdict} {criterion}: {detail}");
        if !ok {
            self.failures.push(format!("{criterion}: {detail}"));
        }
    }
}

type Matrix = HashMap<(&'static str, Scenario), Outcome>;

fn run_full_matrix() -> Matrix {
    let cfg = CoreConfig::default();
    let cells: Vec<((&str, Scenario), Outcome)> = NAMES
        .par_iter()
        .flat_map(|&name| Scenario::ALL.into_par_iter().map(move |sc| (name, sc)))
        .map(|(name, sc)| {
            let out = workloads::run(name, sc, &cfg, SEED).expect("workload runs");
            ((name, sc), out)
        })
        .collect();
    cells.into_iter().collect()
}

fn cycles(m: &Matrix, name: &str, sc: Scenario) -> u64 {
    m[&(name, sc)].result.stats.total_cycles
}

#[test]
fn acceptance() {
    let mut gate = Gate::new();
    let t0 = Instant::now();
    let matrix = run_full_matrix();
    let matrix_secs = t0.elapsed().as_secs_f64();

    // 1. single-threaded == dual with thread 1 inactive, bit-exact
    {
        let mut bad = Vec::new();
        for name in NAMES {
            let s = cycles(&matrix, name, Scenario::Single);
            let i = cycles(&matrix, name, Scenario::T1Inactive);
            if s != i {
                bad.push(format!("{name} {s} vs {i}"));
            }
        }
        gate.check(
            "criterion 1 (single == dual/inactive cycles, exact)",
            bad.is_empty() && matrix_secs < 600.0,
            if bad.is_empty() {
                format!("9 workloads equal; full matrix in {matrix_secs:.1}s")
            } else {
                bad.join(", ")
            },
        );
    }

    // 2. spinning thread 1 costs something but no more than 10%
    {
        let mut worst: (f64, &str) = (0.0, "-");
        let mut bad = Vec::new();
        for name in NAMES {
            let inactive = cycles(&matrix, name, Scenario::T1Inactive);
            let spinning = cycles(&matrix, name, Scenario::T1Spinning);
            let excess = spinning as f64 / inactive as f64 - 1.0;
            if spinning < inactive || excess > 0.10 {
                bad.push(format!("{name} excess {:.2}%", excess * 100.0));
            }
            if excess > worst.0 {
                worst = (excess, name);
            }
        }
        gate.check(
            "criterion 2 (spinning overhead in [0%, 10%])",
            bad.is_empty(),
            format!("worst excess {:.2}% ({}){}", worst.0 * 100.0, worst.1,
                if bad.is_empty() { String::new() } else { format!("; out of band: {}", bad.join(", ")) }),
        );
    }

    // 3. dual-active speedups land in the published bands
    {
        let speedup = |name| {
            cycles(&matrix, name, Scenario::Single) as f64
                / cycles(&matrix, name, Scenario::DualActive) as f64
        };
        let mut bad = Vec::new();
        let mut report = Vec::new();
        for name in ["matrix_mult", "fft", "merge_sort", "dot_product", "bellman_ford", "ecg"] {
            let s = speedup(name);
            report.push(format!("{name} {s:.2}"));
            if s < 1.5 {
                bad.push(format!("{name} {s:.3} < 1.5"));
            }
        }
        for name in ["daxpy", "mutexes"] {
            let s = speedup(name);
            report.push(format!("{name} {s:.2}"));
            if !(1.0 < s && s < 1.45) {
                bad.push(format!("{name} {s:.3} outside (1.0, 1.45)"));
            }
        }
        let s = speedup("mem_copy");
        report.push(format!("mem_copy {s:.2}"));
        if s > 1.0 {
            bad.push(format!("mem_copy {s:.3} > 1.0"));
        }
        gate.check(
            "criterion 3 (speedup bands)",
            bad.is_empty(),
            if bad.is_empty() { report.join(", ") } else { bad.join(", ") },
        );
    }

    // 4. mem_copy contention: high dual miss rate, both threads blocked on
    // each other's misses
    {
        let stats = &matrix[&("mem_copy", Scenario::DualActive)].result.stats;
        let miss = [0, 1].map(|t| stats.threads[t].dcache.miss_rate());
        let blocked = [0, 1].map(|t| stats.threads[t].stall_cycles.blocked_by_other_miss);
        let ok = miss.iter().all(|&m| m >= 0.80) && blocked.iter().all(|&b| b > 0);
        gate.check(
            "criterion 4 (mem_copy dual: dcache miss >= 80%, cross-thread blocking)",
            ok,
            format!(
                "miss {:.1}%/{:.1}%, blocked_by_other_miss {}/{}",
                miss[0] * 100.0, miss[1] * 100.0, blocked[0], blocked[1]
            ),
        );
    }

    // 5. side-kick no-op round trip: constant and under 100 cycles
    {
        let rt = measure_roundtrip(&CoreConfig::default(), DEFAULT_CHANNEL_BASE, 1000);
        gate.check(
            "criterion 5 (round trip deterministic, < 100 cycles)",
            rt.min == rt.max && rt.min < 100,
            format!("{} cycles over 1000 warm reps (min {} max {}; paper reference 25)",
                rt.median, rt.min, rt.max),
        );
    }

    // 6. a cross-thread store is visible to a load exactly one cycle after
    // it is granted at the data cache
    {
        let (store_cycle, first_new, last_old) = store_to_load_probe();
        gate.check(
            "criterion 6 (store-to-load visibility = 1 cycle)",
            first_new == store_cycle + 1 && last_old < store_cycle,
            format!("store granted at {store_cycle}, first load of new value at {first_new}, last stale load at {last_old}"),
        );
    }

    // 7. every workload passes its host oracle in all four scenarios, and
    // the radix-2 FFT agrees with a direct DFT at n = 256
    {
        let mut bad = Vec::new();
        for name in NAMES {
            for sc in Scenario::ALL {
                if let Err(e) = &matrix[&(name, sc)].output {
                    bad.push(format!("{name}/{}: {e}", sc.label()));
                }
            }
        }
        let dft_ok = fft_matches_direct_dft();
        if !dft_ok {
            bad.push("fft vs direct DFT at n=256 exceeded 1e-9 relative".into());
        }
        gate.check(
            "criterion 7 (functional oracles, all scenarios; DFT cross-check)",
            bad.is_empty(),
            if bad.is_empty() { "36 cells verified; n=256 DFT within 1e-9".into() } else { bad.join("; ") },
        );
    }

    // 8. the randomized memory-unit suite covers the five properties at
    // 10^4 cases each; it runs in this same workspace test invocation
    {
        let src = include_str!("memunit_props.rs");
        let cases_ok = src.contains("with_cases(10_000)");
        let prop_count = src.matches("#[test]").count();
        gate.check(
            "criterion 8 (memory-unit property suite, 5 x 10^4 cases)",
            cases_ok && prop_count == 5,
            format!("{prop_count} properties at 10^4 cases (tests/memunit_props.rs)"),
        );
    }

    // 9. repeating a CLI command with the same seed and config produces
    // byte-identical outputs
    {
        let ok = cli_outputs_are_reproducible();
        gate.check(
            "criterion 9 (byte-identical reruns)",
            ok,
            "bench JSON+CSV and run stats compared across two invocations".into(),
        );
    }

    assert!(gate.failures.is_empty(), "failed criteria:\n{}", gate.failures.join("\n"));
}

/// Thread 1 stores a flag while thread 0 issues back-to-back loads of it.
/// Returns (store grant cycle, first load cycle seeing the new value, last
/// load cycle seeing the old one), all observed at the data cache.
fn store_to_load_probe() -> (u64, u64, u64) {
    const FLAG: u32 = 0x10000;
    let loads = "    lw r3, 0(r2)\n".repeat(160);
    let t0 = format!(".org 0x1000\n    la r2, {FLAG:#x}\n{loads}    halt\n");
    let t1 = format!(
        ".org 0x4000
    la r2, {FLAG:#x}
    lw r3, 0(r2)           ; warm the line so the store hits
    li r4, 30
dly:
    addi r4, r4, -1
    bne r4, r0, dly
    li r4, 1
    sw r4, 0(r2)
    halt
"
    );
    let p0 = assemble(&t0).unwrap();
    let p1 = assemble(&t1).unwrap();
    let mut core = Core::new(CoreConfig {
        thread1_mode: Thread1Mode::Active,
        ..CoreConfig::default()
    });
    core.load_program(&p0);
    core.load_program(&p1);
    core.unit.mem.map_region(FLAG, 64);
    core.set_entry(0, p0.base_address);
    core.set_entry(1, p1.base_address);
    core.watch_range(FLAG, FLAG);
    let r = core.run();
    assert_eq!(r.exit, ExitStatus::Halted);

    let store = core
        .events
        .iter()
        .find(|e| e.tid == 1 && e.kind == ReqKind::Store)
        .expect("store observed");
    assert!(store.hit, "probe store must hit");
    let loads = core.events.iter().filter(|e| e.tid == 0 && e.kind == ReqKind::Load);
    let mut first_new = u64::MAX;
    let mut last_old = 0;
    for e in loads {
        if e.data == 1 {
            first_new = first_new.min(e.cycle);
        } else {
            last_old = last_old.max(e.cycle);
        }
    }
    (store.cycle, first_new, last_old)
}

/// Run a 256-point instance and compare the simulated spectrum against a
/// direct O(n^2) DFT: max |fast - slow| / max |slow| must stay below 1e-9.
/// The built-in oracle is bit-exact against the host radix-2 mirror; this
/// check is independent of that mirror.
fn fft_matches_direct_dft() -> bool {
    let built = workloads::fft::build_n(256, Scenario::Single, SEED);
    let p0 = assemble(&built.t0_src).expect("fft assembles");
    let mut core = Core::new(built.scenario.core_config(&CoreConfig::default()));
    core.load_program(&p0);
    core.set_entry(0, p0.base_address);
    core.unit.mem.map_region(DEFAULT_CHANNEL_BASE, 64);
    core.unit.mem.map_region(workloads::SYNC_ADDR, 64);
    for r in &built.regions {
        core.unit.mem.map_region(r.base, r.len);
        for (k, b) in r.init.iter().enumerate() {
            core.unit.mem.write_byte(r.base + k as u32, *b).unwrap();
        }
    }
    if core.run().exit != ExitStatus::Halted || (built.verify)(&core.unit.mem).is_err() {
        return false;
    }

    let x: Vec<(f64, f64)> = built.regions[0]
        .init
        .chunks_exact(16)
        .map(|c| {
            (
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    let slow = workloads::fft::dft(&x);
    let out = built.regions[2].base;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for (k, s) in slow.iter().enumerate() {
        let re = core.unit.mem.read_f64(out + 16 * k as u32).unwrap();
        let im = core.unit.mem.read_f64(out + 16 * k as u32 + 8).unwrap();
        worst = worst.max(((re - s.0).powi(2) + (im - s.1).powi(2)).sqrt());
        scale = scale.max((s.0 * s.0 + s.1 * s.1).sqrt());
    }
    worst / scale < 1e-9
}

/// Run the ajt binary twice per command and byte-compare the outputs.
fn cli_outputs_are_reproducible() -> bool {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_ajt");
    let dir = tempfile::tempdir().expect("tempdir");
    let path = |n: &str| dir.path().join(n);

    for round in ["a", "b"] {
        let status = Command::new(bin)
            .args([
                "bench",
                "--workloads",
                "daxpy,mutexes",
                "--seed",
                "7",
                "--out",
            ])
            .arg(path(&format!("r{round}.json")))
            .arg("--csv")
            .arg(path(&format!("r{round}.csv")))
            .output()
            .expect("bench runs");
        if !status.status.success() {
            return false;
        }
    }
    let same_bench = std::fs::read(path("ra.json")).unwrap() == std::fs::read(path("rb.json")).unwrap()
        && std::fs::read(path("ra.csv")).unwrap() == std::fs::read(path("rb.csv")).unwrap();

    // a plain run command, stats to file
    let src = path("p.s");
    std::fs::write(&src, ".org 0x1000\n    li r1, 3\nl:\n    addi r1, r1, -1\n    bne r1, r0, l\n    halt\n").unwrap();
    let status = Command::new(bin).arg("asm").arg(&src).status().expect("asm runs");
    if !status.success() {
        return false;
    }
    for round in ["a", "b"] {
        let status = Command::new(bin)
            .arg("run")
            .arg(path("p.bin"))
            .args(["--scenario", "single", "--stats"])
            .arg(path(&format!("s{round}.json")))
            .status()
            .expect("run runs");
        if !status.success() {
            return false;
        }
    }
    let same_run = std::fs::read(path("sa.json")).unwrap() == std::fs::read(path("sb.json")).unwrap();
    same_bench && same_run
}
