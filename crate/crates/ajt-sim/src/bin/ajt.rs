//! Command-line front end: assemble programs, run images, and reproduce
//! the workload × scenario benchmark matrix.
//!
//! Exit codes: 0 success, 1 usage, 2 assembly/config error, 3 simulation
//! fault, 4 oracle failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ajt_sim::asm::{assemble, disassemble};
use ajt_sim::config::{self, Config};
use ajt_sim::core::{Core, ExitStatus};
use ajt_sim::isa::Program;
use ajt_sim::report;
use ajt_sim::workloads::{self, Scenario, SYNC_ADDR};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_FAULT: u8 = 3;
const EXIT_ORACLE: u8 = 4;

#[derive(Parser)]
#[command(name = "ajt", version, about = "dual-thread core simulator", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assemble a source file into a binary image
    Asm(AsmArgs),
    /// Run one or two program images through the simulator
    Run(RunArgs),
    /// Run the benchmark matrix and write reports
    Bench(BenchArgs),
}

#[derive(Args)]
struct AsmArgs {
    /// assembly source file
    input: PathBuf,
    /// output image path (default: source path with .bin extension)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// print the disassembly of the result instead of writing an image
    #[arg(long)]
    disasm: bool,
}

#[derive(Args)]
struct RunArgs {
    /// image for thread 0, optionally followed by an image for thread 1
    #[arg(num_args = 1..=2, required = true)]
    images: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// single | inactive | spinning | dual
    #[arg(long, default_value = "dual")]
    scenario: String,
    #[arg(long)]
    max_cycles: Option<u64>,
    /// write the cycle trace to this file
    #[arg(long)]
    trace: Option<PathBuf>,
    /// write run statistics JSON here instead of stdout
    #[arg(long)]
    stats: Option<PathBuf>,
    /// map extra data memory, BASE:LEN with hex accepted, repeatable
    #[arg(long = "map")]
    maps: Vec<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// comma-separated workload names, or "all"
    #[arg(long, default_value = "all")]
    workloads: String,
    /// comma-separated scenario labels, or "all"
    #[arg(long, default_value = "all")]
    scenarios: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// report JSON path
    #[arg(long)]
    out: Option<PathBuf>,
    /// report CSV path
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version requests are successes, everything else is usage
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let code = match cli.cmd {
        Cmd::Asm(a) => cmd_asm(&a),
        Cmd::Run(a) => cmd_run(&a),
        Cmd::Bench(a) => cmd_bench(&a),
    };
    ExitCode::from(code)
}

/// Load the config file named by the flag, or by AJT_CONFIG, or defaults.
fn load_config(flag: &Option<PathBuf>) -> Result<Config, String> {
    let path = flag
        .clone()
        .or_else(|| std::env::var_os("AJT_CONFIG").map(PathBuf::from));
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text =
        std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    config::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_asm(a: &AsmArgs) -> u8 {
    let src = match std::fs::read_to_string(&a.input) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", a.input.display());
            return EXIT_INPUT;
        }
    };
    let prog = match assemble(&src) {
        Ok(p) => p,
        Err(errs) => {
            for e in errs {
                eprintln!("{}: {e}", a.input.display());
            }
            return EXIT_INPUT;
        }
    };
    if a.disasm {
        print!("{}", disassemble(&prog));
        return 0;
    }
    let out = a.output.clone().unwrap_or_else(|| a.input.with_extension("bin"));
    if let Err(e) = std::fs::write(&out, prog.to_image()) {
        eprintln!("{}: {e}", out.display());
        return EXIT_INPUT;
    }
    0
}

fn parse_map(s: &str) -> Result<(u32, u32), String> {
    let num = |t: &str| -> Result<u32, String> {
        let t = t.trim();
        let r = match t.strip_prefix("0x") {
            Some(h) => u32::from_str_radix(h, 16),
            None => t.parse(),
        };
        r.map_err(|_| format!("bad number '{t}' in --map"))
    };
    let (b, l) = s.split_once(':').ok_or_else(|| format!("--map wants BASE:LEN, got '{s}'"))?;
    Ok((num(b)?, num(l)?))
}

fn load_image(path: &Path) -> Result<Program, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Program::from_image(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_run(a: &RunArgs) -> u8 {
    let scenario = match a.scenario.as_str() {
        "single" => Scenario::Single,
        "inactive" => Scenario::T1Inactive,
        "spinning" => Scenario::T1Spinning,
        "dual" => Scenario::DualActive,
        other => match Scenario::parse(other) {
            Some(s) => s,
            None => {
                eprintln!("unknown scenario '{other}'");
                return EXIT_USAGE;
            }
        },
    };
    let cfg = match load_config(&a.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_INPUT;
        }
    };
    let mut core_cfg = scenario.core_config(&cfg.core);
    if let Some(mc) = a.max_cycles {
        core_cfg.max_cycles = mc;
    }
    if a.trace.is_some() {
        core_cfg.trace = true;
    }

    let mut core = Core::new(core_cfg);
    core.unit.mem.map_region(cfg.channel_base, 64);
    core.unit.mem.map_region(SYNC_ADDR, 64);
    for m in &a.maps {
        match parse_map(m) {
            Ok((base, len)) => core.unit.mem.map_region(base, len),
            Err(e) => {
                eprintln!("{e}");
                return EXIT_USAGE;
            }
        }
    }
    for (tid, path) in a.images.iter().enumerate() {
        let prog = match load_image(path) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("{e}");
                return EXIT_INPUT;
            }
        };
        core.set_entry(tid, prog.base_address);
        core.load_program(&prog);
    }

    let result = core.run();
    let json = serde_json::to_string_pretty(&result).expect("stats serialize");
    if let Some(path) = &a.stats {
        if let Err(e) = std::fs::write(path, json + "\n") {
            eprintln!("{}: {e}", path.display());
            return EXIT_INPUT;
        }
    } else {
        println!("{json}");
    }
    if let Some(path) = &a.trace {
        let text = core.trace_lines.join("\n") + "\n";
        if let Err(e) = std::fs::write(path, text) {
            eprintln!("{}: {e}", path.display());
            return EXIT_INPUT;
        }
    }
    match result.exit {
        ExitStatus::Halted => 0,
        ExitStatus::MaxCycles => {
            eprintln!("max cycles ({}) exceeded", core.cfg.max_cycles);
            EXIT_FAULT
        }
        ExitStatus::Fault { tid, pc, kind } => {
            eprintln!("fault on thread {tid} at pc {pc:#010x}: {kind:?}");
            EXIT_FAULT
        }
    }
}

fn cmd_bench(a: &BenchArgs) -> u8 {
    let cfg = match load_config(&a.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_INPUT;
        }
    };
    let names: Vec<&str> = if a.workloads == "all" {
        workloads::NAMES.to_vec()
    } else {
        a.workloads.split(',').map(str::trim).collect()
    };
    for n in &names {
        if !workloads::NAMES.contains(n) {
            eprintln!("unknown workload '{n}'");
            return EXIT_USAGE;
        }
    }
    let scenarios: Vec<Scenario> = if a.scenarios == "all" {
        Scenario::ALL.to_vec()
    } else {
        match a.scenarios.split(',').map(|s| Scenario::parse(s.trim())).collect() {
            Some(v) => v,
            None => {
                eprintln!("unknown scenario in '{}'", a.scenarios);
                return EXIT_USAGE;
            }
        }
    };

    let rep = report::run_matrix(&names, &scenarios, &cfg.core, a.seed);
    print!("{}", report::to_csv(&rep));
    let json = serde_json::to_string_pretty(&rep).expect("report serializes") + "\n";
    if let Some(path) = &a.out {
        if let Err(e) = std::fs::write(path, json) {
            eprintln!("{}: {e}", path.display());
            return EXIT_INPUT;
        }
    }
    if let Some(path) = &a.csv {
        if let Err(e) = std::fs::write(path, report::to_csv(&rep)) {
            eprintln!("{}: {e}", path.display());
            return EXIT_INPUT;
        }
    }
    for row in &rep.rows {
        if let Some(err) = &row.error {
            eprintln!("{}: {err}", row.workload);
        }
    }
    if rep.rows.iter().any(|r| r.error.is_some()) {
        EXIT_ORACLE
    } else {
        0
    }
}
