//! The shared memory unit: instruction cache, data cache, per-cache
//! round-robin arbiters, a unit-wide lock (used by TAS), write-through-
//! allocate stores, NMRU replacement, and flat backing memory behind a
//! fixed miss penalty.
//!
//! The unit is blocking: while a miss is in flight neither cache grants
//! any request, from either thread.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isa::Program;

pub type Cycle = u64;
/// Hardware thread id, 0 or 1.
pub type ThreadId = usize;

pub const LINE_BYTES: u32 = 64;
const PAGE_BYTES: u32 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReqKind {
    IFetch,
    Load,
    Store,
    Tas,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemRequest {
    pub tid: ThreadId,
    pub kind: ReqKind,
    pub addr: u32,
    /// access width in bytes: 1, 4 or 8 (IFetch is always 8)
    pub width: u8,
    /// store data (low `width` bytes)
    pub data: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemResponse {
    pub data: u64,
    pub hit: bool,
    /// cycle at which the requesting thread may proceed
    pub ready_at: Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum MemFault {
    #[error("access to unmapped address {0:#010x}")]
    Unmapped(u32),
    #[error("misaligned access at {0:#010x} (width {1})")]
    Misaligned(u32, u8),
}

/// Sparse byte-addressed backing memory.
#[derive(Default)]
pub struct Memory {
    pages: HashMap<u32, Box<[u8; PAGE_BYTES as usize]>>,
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Map (and zero) every page overlapping [base, base+len).
    pub fn map_region(&mut self, base: u32, len: u32) {
        if len == 0 {
            return;
        }
        let first = base / PAGE_BYTES;
        let last = (base + len - 1) / PAGE_BYTES;
        for p in first..=last {
            self.pages.entry(p).or_insert_with(|| Box::new([0; PAGE_BYTES as usize]));
        }
    }

    pub fn is_mapped(&self, addr: u32, width: u32) -> bool {
        let first = addr / PAGE_BYTES;
        let last = (addr + width - 1) / PAGE_BYTES;
        (first..=last).all(|p| self.pages.contains_key(&p))
    }

    fn page(&self, addr: u32) -> Option<&[u8; PAGE_BYTES as usize]> {
        self.pages.get(&(addr / PAGE_BYTES)).map(|b| &**b)
    }

    pub fn read_byte(&self, addr: u32) -> Result<u8, MemFault> {
        self.page(addr)
            .map(|p| p[(addr % PAGE_BYTES) as usize])
            .ok_or(MemFault::Unmapped(addr))
    }

    pub fn write_byte(&mut self, addr: u32, v: u8) -> Result<(), MemFault> {
        match self.pages.get_mut(&(addr / PAGE_BYTES)) {
            Some(p) => {
                p[(addr % PAGE_BYTES) as usize] = v;
                Ok(())
            }
            None => Err(MemFault::Unmapped(addr)),
        }
    }

    pub fn read(&self, addr: u32, width: u8) -> Result<u64, MemFault> {
        let mut v: u64 = 0;
        for k in 0..width {
            v |= (self.read_byte(addr + k as u32)? as u64) << (8 * k);
        }
        Ok(v)
    }

    pub fn write(&mut self, addr: u32, width: u8, data: u64) -> Result<(), MemFault> {
        for k in 0..width {
            self.write_byte(addr + k as u32, (data >> (8 * k)) as u8)?;
        }
        Ok(())
    }

    pub fn read_u32(&self, addr: u32) -> Result<u32, MemFault> {
        Ok(self.read(addr, 4)? as u32)
    }

    pub fn write_u32(&mut self, addr: u32, v: u32) -> Result<(), MemFault> {
        self.write(addr, 4, v as u64)
    }

    pub fn read_f64(&self, addr: u32) -> Result<f64, MemFault> {
        Ok(f64::from_bits(self.read(addr, 8)?))
    }

    pub fn write_f64(&mut self, addr: u32, v: f64) -> Result<(), MemFault> {
        self.write(addr, 8, v.to_bits())
    }

    fn read_line(&self, line_addr: u32) -> Result<[u8; LINE_BYTES as usize], MemFault> {
        let mut out = [0u8; LINE_BYTES as usize];
        let page = self.page(line_addr).ok_or(MemFault::Unmapped(line_addr))?;
        let off = (line_addr % PAGE_BYTES) as usize;
        out.copy_from_slice(&page[off..off + LINE_BYTES as usize]);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub size_bytes: u32,
    pub associativity: u32,
    pub miss_penalty: u32,
}

impl Default for CacheConfig {
    fn default() -> Self {
        // 32KB 4-way with a 30-cycle miss penalty
        CacheConfig {
            size_bytes: 32 * 1024,
            associativity: 4,
            miss_penalty: 30,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("cache size {0} must be a power of two between 4KB and 32KB")]
    BadSize(u32),
    #[error("associativity {0} must be in 1..=8")]
    BadAssoc(u32),
    #[error("size {0} / (assoc {1} * 64) is not a power-of-two set count")]
    BadSetCount(u32, u32),
}

impl CacheConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.size_bytes.is_power_of_two() || !(4096..=32768).contains(&self.size_bytes) {
            return Err(ConfigError::BadSize(self.size_bytes));
        }
        if !(1..=8).contains(&self.associativity) {
            return Err(ConfigError::BadAssoc(self.associativity));
        }
        let lines = self.size_bytes / LINE_BYTES;
        if lines % self.associativity != 0 {
            return Err(ConfigError::BadSetCount(self.size_bytes, self.associativity));
        }
        let sets = lines / self.associativity;
        if !sets.is_power_of_two() {
            return Err(ConfigError::BadSetCount(self.size_bytes, self.associativity));
        }
        Ok(())
    }

    pub fn num_sets(&self) -> u32 {
        self.size_bytes / LINE_BYTES / self.associativity
    }
}

#[derive(Clone)]
struct Line {
    valid: bool,
    tag: u32,
    data: [u8; LINE_BYTES as usize],
}

impl Default for Line {
    fn default() -> Self {
        Line {
            valid: false,
            tag: 0,
            data: [0; LINE_BYTES as usize],
        }
    }
}

#[derive(Clone, Default)]
struct CacheSet {
    ways: Vec<Line>,
    mru: usize,
}

/// One set-associative cache with NMRU replacement.
pub struct Cache {
    cfg: CacheConfig,
    sets: Vec<CacheSet>,
}

impl Cache {
    pub fn new(cfg: CacheConfig) -> Self {
        let sets = vec![
            CacheSet {
                ways: vec![Line::default(); cfg.associativity as usize],
                mru: 0,
            };
            cfg.num_sets() as usize
        ];
        Cache { cfg, sets }
    }

    pub fn config(&self) -> &CacheConfig {
        &self.cfg
    }

    fn index(&self, addr: u32) -> usize {
        ((addr / LINE_BYTES) % self.cfg.num_sets()) as usize
    }

    fn tag(&self, addr: u32) -> u32 {
        addr / LINE_BYTES / self.cfg.num_sets()
    }

    fn line_offset(addr: u32) -> usize {
        (addr % LINE_BYTES) as usize
    }

    /// Hit test plus MRU update.
    fn lookup(&mut self, addr: u32) -> Option<usize> {
        let idx = self.index(addr);
        let tag = self.tag(addr);
        let set = &mut self.sets[idx];
        let way = set.ways.iter().position(|l| l.valid && l.tag == tag)?;
        set.mru = way;
        Some(way)
    }

    pub fn contains(&self, addr: u32) -> bool {
        let idx = self.index(addr);
        let tag = self.tag(addr);
        self.sets[idx].ways.iter().any(|l| l.valid && l.tag == tag)
    }

    /// Victim selection: first invalid way, else the lowest-index way that
    /// is not the most recently used one (NMRU). Direct-mapped caches have
    /// no choice.
    pub fn victim_way(&self, set_idx: usize) -> usize {
        let set = &self.sets[set_idx];
        if let Some(w) = set.ways.iter().position(|l| !l.valid) {
            return w;
        }
        if set.ways.len() == 1 {
            return 0;
        }
        (0..set.ways.len()).find(|&w| w != set.mru).unwrap()
    }

    pub fn mru_way(&self, set_idx: usize) -> usize {
        self.sets[set_idx].mru
    }

    pub fn set_index_of(&self, addr: u32) -> usize {
        self.index(addr)
    }

    fn fill(&mut self, addr: u32, data: [u8; LINE_BYTES as usize]) -> usize {
        let idx = self.index(addr);
        let tag = self.tag(addr);
        let way = self.victim_way(idx);
        let set = &mut self.sets[idx];
        set.ways[way] = Line {
            valid: true,
            tag,
            data,
        };
        set.mru = way;
        way
    }

    fn read(&self, addr: u32, width: u8, way: usize) -> u64 {
        let idx = self.index(addr);
        let off = Self::line_offset(addr);
        let line = &self.sets[idx].ways[way];
        let mut v: u64 = 0;
        for k in 0..width as usize {
            v |= (line.data[off + k] as u64) << (8 * k);
        }
        v
    }

    fn write(&mut self, addr: u32, width: u8, data: u64, way: usize) {
        let idx = self.index(addr);
        let off = Self::line_offset(addr);
        let line = &mut self.sets[idx].ways[way];
        for k in 0..width as usize {
            line.data[off + k] = (data >> (8 * k)) as u8;
        }
    }

    pub fn invalidate_all(&mut self) {
        for set in &mut self.sets {
            for l in &mut set.ways {
                l.valid = false;
            }
            set.mru = 0;
        }
    }

    /// Write-through coherence check: every valid line must be byte-identical
    /// to backing memory.
    pub fn coherent_with(&self, mem: &Memory) -> bool {
        let sets = self.cfg.num_sets();
        for (idx, set) in self.sets.iter().enumerate() {
            for l in &set.ways {
                if !l.valid {
                    continue;
                }
                let base = (l.tag * sets + idx as u32) * LINE_BYTES;
                match mem.read_line(base) {
                    Ok(d) => {
                        if d != l.data {
                            return false;
                        }
                    }
                    Err(_) => return false,
                }
            }
        }
        true
    }
}

/// Per-cache round-robin arbiter for the two threads.
#[derive(Debug, Clone, Copy, Default)]
pub struct Arbiter {
    last_granted: ThreadId,
}

impl Arbiter {
    pub fn grant(&mut self, req0: bool, req1: bool) -> Option<ThreadId> {
        let g = match (req0, req1) {
            (false, false) => return None,
            (true, false) => 0,
            (false, true) => 1,
            (true, true) => 1 - self.last_granted,
        };
        self.last_granted = g;
        Some(g)
    }
}

/// Outcome of the unit-level admission check for a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Ok,
    /// a miss is in flight
    Busy,
    /// unit locked by the other thread
    Locked,
}

pub struct MemoryUnit {
    pub mem: Memory,
    pub icache: Cache,
    pub dcache: Cache,
    pub iarb: Arbiter,
    pub darb: Arbiter,
    lock_holder: Option<ThreadId>,
    lock_until: Cycle,
    /// first cycle at which the unit is free again after a miss
    busy_free: Cycle,
    /// dcache port occupancy beyond the grant cycle (TAS read-modify-write)
    dport_free: Cycle,
}

impl MemoryUnit {
    pub fn new(icache: CacheConfig, dcache: CacheConfig) -> Self {
        MemoryUnit {
            mem: Memory::new(),
            icache: Cache::new(icache),
            dcache: Cache::new(dcache),
            iarb: Arbiter::default(),
            darb: Arbiter::default(),
            lock_holder: None,
            lock_until: 0,
            busy_free: 0,
            dport_free: 0,
        }
    }

    pub fn is_busy(&self, now: Cycle) -> bool {
        now < self.busy_free
    }

    pub fn dport_blocked(&self, now: Cycle) -> bool {
        now < self.dport_free
    }

    pub fn lock_holder(&self) -> Option<ThreadId> {
        self.lock_holder
    }

    /// Admission check for a request by `tid` at `now` (before arbitration).
    pub fn admit(&self, tid: ThreadId, now: Cycle) -> Admission {
        if self.is_busy(now) {
            Admission::Busy
        } else if matches!(self.lock_holder, Some(h) if h != tid && now <= self.lock_until) {
            Admission::Locked
        } else {
            Admission::Ok
        }
    }

    pub fn lock(&mut self, tid: ThreadId, until: Cycle) {
        match self.lock_holder {
            None => {
                self.lock_holder = Some(tid);
                self.lock_until = until;
            }
            Some(h) if h == tid => self.lock_until = self.lock_until.max(until),
            Some(h) => panic!("thread {tid} locking a unit held by thread {h}"),
        }
    }

    pub fn unlock(&mut self, tid: ThreadId) {
        match self.lock_holder {
            Some(h) if h == tid => self.lock_holder = None,
            other => panic!("thread {tid} unlocking a unit it does not hold ({other:?})"),
        }
    }

    /// Release an expired TAS lock. Called once per cycle by the core.
    pub fn expire_lock(&mut self, now: Cycle) {
        if self.lock_holder.is_some() && now > self.lock_until {
            self.lock_holder = None;
        }
    }

    /// Service a granted request at cycle `now`. The caller has already run
    /// admission and arbitration. Hits respond at now+1; misses make the
    /// whole unit busy for the miss penalty and respond at now+1+penalty.
    pub fn service(&mut self, req: &MemRequest, now: Cycle) -> Result<MemResponse, MemFault> {
        if req.addr % req.width as u32 != 0 {
            return Err(MemFault::Misaligned(req.addr, req.width));
        }
        match req.kind {
            ReqKind::IFetch => {
                debug_assert_eq!(req.addr % 8, 0, "fetch-pair misaligned");
                let (way, hit) = self.ensure_line(true, req.addr, now)?;
                let data = self.icache.read(req.addr, 8, way);
                Ok(self.respond(data, hit, now))
            }
            ReqKind::Load => {
                let (way, hit) = self.ensure_line(false, req.addr, now)?;
                let data = self.dcache.read(req.addr, req.width, way);
                Ok(self.respond(data, hit, now))
            }
            ReqKind::Store => {
                // write-through-allocate: the line is brought in on a miss,
                // then both the line and backing memory are written
                let (way, hit) = self.ensure_line(false, req.addr, now)?;
                self.dcache.write(req.addr, req.width, req.data, way);
                self.mem.write(req.addr, req.width, req.data)?;
                Ok(self.respond(0, hit, now))
            }
            ReqKind::Tas => {
                // locked byte read-modify-write; occupies the dcache port for
                // two cycles and holds the unit lock for the duration
                let (way, hit) = self.ensure_line(false, req.addr, now)?;
                let old = self.dcache.read(req.addr, 1, way);
                self.dcache.write(req.addr, 1, 1, way);
                self.mem.write(req.addr, 1, 1)?;
                let base = if hit { now } else { now + self.dcache.config().miss_penalty as Cycle };
                self.lock(req.tid, base + 1);
                self.dport_free = base + 2;
                Ok(MemResponse {
                    data: old,
                    hit,
                    ready_at: base + 2,
                })
            }
        }
    }

    fn respond(&self, data: u64, hit: bool, now: Cycle) -> MemResponse {
        let ready_at = if hit { now + 1 } else { self.busy_free };
        MemResponse { data, hit, ready_at }
    }

    fn ensure_line(&mut self, icache: bool, addr: u32, now: Cycle) -> Result<(usize, bool), MemFault> {
        let cache = if icache { &mut self.icache } else { &mut self.dcache };
        if let Some(way) = cache.lookup(addr) {
            return Ok((way, true));
        }
        let line_addr = addr & !(LINE_BYTES - 1);
        let data = self.mem.read_line(line_addr)?;
        let penalty = cache.config().miss_penalty as Cycle;
        let way = cache.fill(line_addr, data);
        self.busy_free = now + penalty + 1;
        Ok((way, false))
    }

    /// Host-side image load: writes backing memory directly, no timing.
    pub fn load_image(&mut self, p: &Program) {
        self.mem.map_region(p.base_address, 4 * p.words.len() as u32);
        for (k, w) in p.words.iter().enumerate() {
            self.mem
                .write_u32(p.base_address + 4 * k as u32, *w)
                .expect("just mapped");
        }
    }
}
