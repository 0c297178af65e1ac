//! Benchmark reports: run the workload × scenario matrix and emit a
//! machine-readable JSON report plus a CSV table shaped like a results
//! figure (one row per workload, one column per scenario, speedup last).
//! Matrix cells are independent simulator instances and run in parallel.

use rayon::prelude::*;
use serde::Serialize;

use crate::core::{CoreConfig, ThreadStats};
use crate::workloads::{self, Scenario};

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub scenario: String,
    pub total_cycles: u64,
    pub threads: [ThreadStats; 2],
    /// oracle failure message; absent when the output checked out
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowReport {
    pub workload: String,
    pub cells: Vec<CellReport>,
    /// cycles(single) / cycles(dual-active); absent if either cell is
    /// missing or failed its oracle
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<RowReport>,
}

fn config_hash(cfg: &CoreConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in text.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x1000_0000_01b3);
    }
    format!("{h:016x}")
}

fn run_row(name: &str, scenarios: &[Scenario], cfg: &CoreConfig, seed: u64) -> RowReport {
    let cells: Vec<Result<CellReport, String>> = scenarios
        .par_iter()
        .map(|&sc| {
            let outcome = workloads::run(name, sc, cfg, seed).map_err(|e| e.to_string())?;
            Ok(CellReport {
                scenario: sc.label().to_string(),
                total_cycles: outcome.result.stats.total_cycles,
                threads: outcome.result.stats.threads,
                oracle_error: outcome.output.err(),
            })
        })
        .collect();

    let mut row = RowReport {
        workload: name.to_string(),
        cells: Vec::new(),
        speedup: None,
        error: None,
    };
    for c in cells {
        match c {
            Ok(cell) => row.cells.push(cell),
            Err(e) => row.error = Some(e),
        }
    }
    let clean = |label: &str| {
        row.cells
            .iter()
            .find(|c| c.scenario == label && c.oracle_error.is_none())
            .map(|c| c.total_cycles)
    };
    if let (Some(single), Some(dual)) = (clean("single"), clean("dual_active")) {
        row.speedup = Some(single as f64 / dual as f64);
    }
    if row.error.is_none() {
        if let Some(bad) = row.cells.iter().find_map(|c| c.oracle_error.clone()) {
            row.error = Some(format!("oracle: {bad}"));
        }
    }
    row
}

pub fn run_matrix(
    names: &[&str],
    scenarios: &[Scenario],
    cfg: &CoreConfig,
    seed: u64,
) -> BenchReport {
    let rows: Vec<RowReport> = names
        .par_iter()
        .map(|name| run_row(name, scenarios, cfg, seed))
        .collect();
    BenchReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config_hash: config_hash(cfg),
        rows,
    }
}

/// One row per workload: the four scenario cycle counts then the speedup.
/// Cells a report lacks (a narrower scenario list, a failed build) are
/// left empty rather than faked.
pub fn to_csv(report: &BenchReport) -> String {
    let mut out = String::from("workload,single,dual_t1_inactive,dual_t1_spinning,dual_active,speedup\n");
    for row in &report.rows {
        out.push_str(&row.workload);
        for label in ["single", "dual_t1_inactive", "dual_t1_spinning", "dual_active"] {
            out.push(',');
            if let Some(c) =
                row.cells.iter().find(|c| c.scenario == label && c.oracle_error.is_none())
            {
                out.push_str(&c.total_cycles.to_string());
            }
        }
        out.push(',');
        if let Some(s) = row.speedup {
            out.push_str(&format!("{s:.3}"));
        }
        out.push('\n');
    }
    out
}
