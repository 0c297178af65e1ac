//! bellman_ford: all-pairs shortest paths on a 64-node connected random
//! graph by running Bellman-Ford from every source. Arcs are stored as
//! (u*4, v*4, w, pad) quadruples so the inner loop needs no multiplies.
//! The dual variant splits sources by parity; distance rows are disjoint.

use rand::Rng;

use super::{Built, Region, Scenario, rng_for, spinning_dispatcher, u32_bytes, TEXT0, TEXT1};

const ARCS: u32 = 0x10_0000;
const DIST: u32 = 0x10_1000;
const NODES: usize = 64;
const EDGES: usize = 128; // undirected; stored as 2*EDGES arcs
const INF: u32 = 0x3fff_ffff;
/// distance row stride in bytes (NODES * 4)
const ROW: u32 = 256;

/// Subroutine: single-source Bellman-Ford. r1 = source index, clobbers
/// r2-r14.
fn emit_bf_sub() -> String {
    format!(
        "bf_src:
    li r3, {ROW}
    mul r2, r1, r3
    la r3, {DIST:#x}
    add r2, r2, r3         ; this source's distance row
    li r4, {NODES}
    mv r5, r2
    la r6, {INF:#x}
init:
    sw r6, 0(r5)
    addi r5, r5, 4
    addi r4, r4, -1
    bne r4, r0, init
    li r4, 4
    mul r4, r1, r4
    add r4, r4, r2
    sw r0, 0(r4)           ; dist[source] = 0
iter:
    li r7, 0               ; changed flag
    la r8, {ARCS:#x}
    li r9, {arc_count}
arc:
    lw r10, 0(r8)          ; u offset
    lw r11, 4(r8)          ; v offset
    lw r12, 8(r8)          ; weight
    add r10, r10, r2
    lw r10, 0(r10)         ; dist[u]
    add r13, r10, r12
    add r11, r11, r2
    lw r14, 0(r11)         ; dist[v]
    bge r13, r14, no_relax
    sw r13, 0(r11)
    li r7, 1
no_relax:
    addi r8, r8, 16
    addi r9, r9, -1
    bne r9, r0, arc
    bne r7, r0, iter
    ret
",
        arc_count = 2 * EDGES,
    )
}

/// Driver: sources `first`, `first+step`, ... below NODES.
fn emit_driver(org: u32, first: u32, step: u32) -> String {
    format!(
        ".org {org:#x}
    li r15, {first}
src:
    mv r1, r15
    jal bf_src
    addi r15, r15, {step}
    li r16, {NODES}
    blt r15, r16, src
    halt
{sub}",
        sub = emit_bf_sub(),
    )
}

pub fn build(scenario: Scenario, seed: u64) -> Built {
    let mut rng = rng_for("bellman_ford", seed);
    // spanning tree first so the graph is connected, then extra edges
    let mut edges: Vec<(usize, usize, u32)> = Vec::with_capacity(EDGES);
    for i in 1..NODES {
        let j = rng.gen_range(0..i);
        edges.push((i, j, rng.gen_range(1..16)));
    }
    while edges.len() < EDGES {
        let u = rng.gen_range(0..NODES);
        let v = rng.gen_range(0..NODES);
        if u != v {
            edges.push((u, v, rng.gen_range(1..16)));
        }
    }
    let mut arcs: Vec<u32> = Vec::with_capacity(EDGES * 8);
    for &(u, v, w) in &edges {
        for (a, b) in [(u, v), (v, u)] {
            arcs.extend([a as u32 * 4, b as u32 * 4, w, 0]);
        }
    }

    // oracle: Floyd-Warshall over the same adjacency
    let mut d = vec![[INF; NODES]; NODES];
    for i in 0..NODES {
        d[i][i] = 0;
    }
    for &(u, v, w) in &edges {
        d[u][v] = d[u][v].min(w);
        d[v][u] = d[v][u].min(w);
    }
    for k in 0..NODES {
        for i in 0..NODES {
            for j in 0..NODES {
                let via = d[i][k].saturating_add(d[k][j]);
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }

    let (t0_src, t1_src) = match scenario {
        Scenario::DualActive => (
            emit_driver(TEXT0, 1, 2),
            Some(emit_driver(TEXT1, 0, 2)),
        ),
        Scenario::T1Spinning => (emit_driver(TEXT0, 0, 1), Some(spinning_dispatcher())),
        _ => (emit_driver(TEXT0, 0, 1), None),
    };

    Built {
        name: "bellman_ford",
        scenario,
        t0_src,
        t1_src,
        regions: vec![
            Region::init(ARCS, u32_bytes(&arcs)),
            Region::zeroed(DIST, NODES as u32 * ROW),
        ],
        verify: Box::new(move |mem| {
            for s in 0..NODES {
                for t in 0..NODES {
                    let addr = DIST + s as u32 * ROW + t as u32 * 4;
                    let got = mem.read_u32(addr).map_err(|e| e.to_string())?;
                    if got != d[s][t] {
                        return Err(format!("dist[{s}][{t}]: got {got}, want {}", d[s][t]));
                    }
                }
            }
            Ok(())
        }),
    }
}
