//! Per-thread pipeline front end and execution semantics: register file,
//! branch predictor (2-bit BHT + BTB + return-address stack), the 128-entry
//! instruction buffer, and the functional/timing model for one instruction.
//!
//! Each hardware thread is single-issue and in-order; the only shared
//! resource is the memory unit, so everything in this module is private
//! per-thread state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isa::{Instruction, Op, OpClass, LINK_REG};
use crate::memunit::{ReqKind, ThreadId};

pub const IBUF_ENTRIES: usize = 128;
const BHT_ENTRIES: usize = 256;
const BTB_ENTRIES: usize = 64;
const RAS_ENTRIES: usize = 8;

/// 32 integer registers (r0 wired to zero) and 16 double-precision
/// FP registers.
#[derive(Clone)]
pub struct RegFile {
    iregs: [u32; 32],
    fregs: [f64; 16],
}

impl Default for RegFile {
    fn default() -> Self {
        RegFile {
            iregs: [0; 32],
            fregs: [0.0; 16],
        }
    }
}

impl RegFile {
    pub fn get(&self, r: u8) -> u32 {
        self.iregs[r as usize]
    }

    pub fn set(&mut self, r: u8, v: u32) {
        if r != 0 {
            self.iregs[r as usize] = v;
        }
    }

    pub fn getf(&self, r: u8) -> f64 {
        self.fregs[r as usize]
    }

    pub fn setf(&mut self, r: u8, v: f64) {
        self.fregs[r as usize] = v;
    }
}

#[derive(Clone, Copy, Default)]
struct BtbEntry {
    valid: bool,
    tag: u32,
    target: u32,
}

/// Branch predictor: 256-entry 2-bit bimodal history table, 64-entry
/// direct-mapped branch target buffer, 8-entry wrapping return-address
/// stack. JAL is treated as a call (it clobbers the link register) and
/// `jalr r0, 0(r31)` as a return.
pub struct Predictor {
    bht: [u8; BHT_ENTRIES],
    btb: [BtbEntry; BTB_ENTRIES],
    ras: [u32; RAS_ENTRIES],
    ras_top: usize,
}

impl Default for Predictor {
    fn default() -> Self {
        Predictor {
            bht: [1; BHT_ENTRIES], // weakly not-taken
            btb: [BtbEntry::default(); BTB_ENTRIES],
            ras: [0; RAS_ENTRIES],
            ras_top: 0,
        }
    }
}

impl Predictor {
    fn bht_idx(pc: u32) -> usize {
        ((pc >> 2) as usize) & (BHT_ENTRIES - 1)
    }

    fn btb_lookup(&self, pc: u32) -> Option<u32> {
        let e = &self.btb[((pc >> 2) as usize) & (BTB_ENTRIES - 1)];
        (e.valid && e.tag == pc).then_some(e.target)
    }

    fn btb_insert(&mut self, pc: u32, target: u32) {
        self.btb[((pc >> 2) as usize) & (BTB_ENTRIES - 1)] = BtbEntry {
            valid: true,
            tag: pc,
            target,
        };
    }

    fn ras_push(&mut self, ret: u32) {
        self.ras_top = (self.ras_top + 1) % RAS_ENTRIES;
        self.ras[self.ras_top] = ret;
    }

    fn ras_pop(&mut self) -> u32 {
        let v = self.ras[self.ras_top];
        self.ras_top = (self.ras_top + RAS_ENTRIES - 1) % RAS_ENTRIES;
        v
    }

    /// Resolve a conditional branch: returns true on mispredict and trains
    /// the tables on the actual outcome.
    pub fn resolve_branch(&mut self, pc: u32, taken: bool, actual_next: u32) -> bool {
        let idx = Self::bht_idx(pc);
        let pred_taken = self.bht[idx] >= 2;
        let predicted = if pred_taken {
            self.btb_lookup(pc)
        } else {
            Some(pc.wrapping_add(4))
        };
        let mispredict = predicted != Some(actual_next);
        self.bht[idx] = if taken {
            (self.bht[idx] + 1).min(3)
        } else {
            self.bht[idx].saturating_sub(1)
        };
        if taken {
            self.btb_insert(pc, actual_next);
        }
        mispredict
    }

    /// Resolve a direct call (JAL): target comes from the BTB, so the first
    /// encounter mispredicts. Pushes the return address.
    pub fn resolve_call(&mut self, pc: u32, target: u32) -> bool {
        let mispredict = self.btb_lookup(pc) != Some(target);
        self.btb_insert(pc, target);
        self.ras_push(pc.wrapping_add(4));
        mispredict
    }

    /// Resolve an indirect jump (JALR). The return idiom consults the RAS;
    /// anything else goes through the BTB.
    pub fn resolve_indirect(&mut self, pc: u32, is_return: bool, target: u32) -> bool {
        if is_return {
            self.ras_pop() != target
        } else {
            let mispredict = self.btb_lookup(pc) != Some(target);
            self.btb_insert(pc, target);
            mispredict
        }
    }
}

#[derive(Clone, Copy)]
struct IbufEntry {
    valid: bool,
    pc: u32,
    instr: Instruction,
}

impl Default for IbufEntry {
    fn default() -> Self {
        IbufEntry {
            valid: false,
            pc: 0,
            instr: Instruction::default(),
        }
    }
}

/// Direct-mapped instruction buffer, one decoded instruction per entry,
/// indexed by word address. A hit consumes no icache bandwidth; a miss
/// fetches the enclosing 8-byte-aligned pair and fills both entries.
pub struct InstrBuffer {
    entries: [IbufEntry; IBUF_ENTRIES],
}

impl Default for InstrBuffer {
    fn default() -> Self {
        InstrBuffer {
            entries: [IbufEntry::default(); IBUF_ENTRIES],
        }
    }
}

impl InstrBuffer {
    fn idx(pc: u32) -> usize {
        ((pc >> 2) as usize) & (IBUF_ENTRIES - 1)
    }

    pub fn lookup(&self, pc: u32) -> Option<Instruction> {
        let e = &self.entries[Self::idx(pc)];
        (e.valid && e.pc == pc).then_some(e.instr)
    }

    /// Fill both halves of an 8-byte fetch pair.
    pub fn fill_pair(&mut self, pair_addr: u32, data: u64) {
        debug_assert_eq!(pair_addr % 8, 0);
        for k in 0..2 {
            let pc = pair_addr + 4 * k;
            let word = (data >> (32 * k)) as u32;
            self.entries[Self::idx(pc)] = IbufEntry {
                valid: true,
                pc,
                instr: crate::isa::decode(word),
            };
        }
    }

    /// Does any valid entry cover `addr`? Used to diagnose stores into
    /// buffered text (self-modifying code is unsupported).
    pub fn covers(&self, addr: u32) -> bool {
        let pc = addr & !3;
        let e = &self.entries[Self::idx(pc)];
        e.valid && e.pc == pc
    }

    /// Drop any entry covering `addr` (store-to-text hygiene).
    pub fn invalidate(&mut self, addr: u32) {
        let pc = addr & !3;
        let e = &mut self.entries[Self::idx(pc)];
        if e.valid && e.pc == pc {
            e.valid = false;
        }
    }

    pub fn clear(&mut self) {
        for e in &mut self.entries {
            e.valid = false;
        }
    }
}

/// Fixed per-core timing parameters for non-memory instruction costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub mispredict_penalty: u32,
    pub int_div_cycles: u32,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            mispredict_penalty: 4,
            int_div_cycles: 24,
        }
    }
}

const FP_SHORT_CYCLES: u64 = 2;
const FP_LONG_DOUBLE_CYCLES: u64 = 24;
const FP_LONG_SINGLE_CYCLES: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ExecFault {
    #[error("illegal instruction at {0:#010x}")]
    Illegal(u32),
}

/// Where a memory response goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dest {
    None,
    Ireg(u8),
    IregSext8(u8),
    Freg(u8),
}

/// A data-memory operation produced by one instruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemOp {
    pub kind: ReqKind,
    pub addr: u32,
    pub width: u8,
    pub data: u64,
    pub dest: Dest,
}

/// Everything the core needs to retire one instruction.
pub struct Exec {
    pub next_pc: u32,
    /// busy cycles beyond the issue cycle for non-memory work
    /// (0 for single-cycle ops; includes any mispredict penalty)
    pub extra_cycles: u64,
    pub mem: Option<MemOp>,
    pub halt: bool,
    pub mispredict: bool,
}

/// Execute one instruction functionally and compute its timing. Memory
/// operations are returned as a `MemOp` for the core to schedule; register
/// effects of loads happen when the response arrives.
pub fn execute(
    i: &Instruction,
    pc: u32,
    tid: ThreadId,
    regs: &mut RegFile,
    pred: &mut Predictor,
    timing: &Timing,
) -> Result<Exec, ExecFault> {
    use Op::*;

    let mut e = Exec {
        next_pc: pc.wrapping_add(4),
        extra_cycles: 0,
        mem: None,
        halt: false,
        mispredict: false,
    };
    let rs1 = regs.get(i.rs1);
    let rs2 = regs.get(i.rs2);
    let sext = i.imm as i32 as u32;
    let zext = i.imm as u16 as u32;

    match i.op {
        Add => regs.set(i.rd, rs1.wrapping_add(rs2)),
        Sub => regs.set(i.rd, rs1.wrapping_sub(rs2)),
        And => regs.set(i.rd, rs1 & rs2),
        Or => regs.set(i.rd, rs1 | rs2),
        Xor => regs.set(i.rd, rs1 ^ rs2),
        Sll => regs.set(i.rd, rs1.wrapping_shl(rs2 & 31)),
        Srl => regs.set(i.rd, rs1.wrapping_shr(rs2 & 31)),
        Sra => regs.set(i.rd, ((rs1 as i32).wrapping_shr(rs2 & 31)) as u32),
        Slt => regs.set(i.rd, ((rs1 as i32) < (rs2 as i32)) as u32),
        Mul => regs.set(i.rd, rs1.wrapping_mul(rs2)),
        Addi => regs.set(i.rd, rs1.wrapping_add(sext)),
        Andi => regs.set(i.rd, rs1 & zext),
        Ori => regs.set(i.rd, rs1 | zext),
        Xori => regs.set(i.rd, rs1 ^ zext),
        Slti => regs.set(i.rd, ((rs1 as i32) < (sext as i32)) as u32),
        Lui => regs.set(i.rd, zext << 16),
        Div | Rem => {
            // RISC-style quiet division: x/0 = -1, x%0 = x
            let (a, b) = (rs1 as i32, rs2 as i32);
            let v = if i.op == Div {
                if b == 0 { -1 } else { a.wrapping_div(b) }
            } else if b == 0 {
                a
            } else {
                a.wrapping_rem(b)
            };
            regs.set(i.rd, v as u32);
            e.extra_cycles = timing.int_div_cycles.saturating_sub(1) as u64;
        }
        Lw => {
            e.mem = Some(MemOp {
                kind: ReqKind::Load,
                addr: rs1.wrapping_add(sext),
                width: 4,
                data: 0,
                dest: Dest::Ireg(i.rd),
            })
        }
        Lb => {
            e.mem = Some(MemOp {
                kind: ReqKind::Load,
                addr: rs1.wrapping_add(sext),
                width: 1,
                data: 0,
                dest: Dest::IregSext8(i.rd),
            })
        }
        Sw | Sb => {
            // S format: field a is the data register, decoded into rs2
            e.mem = Some(MemOp {
                kind: ReqKind::Store,
                addr: rs1.wrapping_add(sext),
                width: if i.op == Sw { 4 } else { 1 },
                data: (regs.get(i.rs2) & if i.op == Sb { 0xff } else { u32::MAX }) as u64,
                dest: Dest::None,
            })
        }
        Tas => {
            e.mem = Some(MemOp {
                kind: ReqKind::Tas,
                addr: rs1.wrapping_add(sext),
                width: 1,
                data: 0,
                dest: Dest::Ireg(i.rd),
            })
        }
        Beq | Bne | Blt | Bge => {
            // B format: fields a/b are the two source registers, decoded
            // into rs1/rs2; rs1 above read the wrong field, reread
            let a = regs.get(i.rs1);
            let b = regs.get(i.rs2);
            let taken = match i.op {
                Beq => a == b,
                Bne => a != b,
                Blt => (a as i32) < (b as i32),
                _ => (a as i32) >= (b as i32),
            };
            if taken {
                e.next_pc = pc.wrapping_add((sext as i32 as i64 * 4) as u32);
            }
            e.mispredict = pred.resolve_branch(pc, taken, e.next_pc);
        }
        Jal => {
            regs.set(LINK_REG, pc.wrapping_add(4));
            e.next_pc = pc.wrapping_add((i.target as i64 * 4) as u32);
            e.mispredict = pred.resolve_call(pc, e.next_pc);
        }
        Jalr => {
            let is_return = i.rd == 0 && i.rs1 == LINK_REG && i.imm == 0;
            e.next_pc = rs1.wrapping_add(sext) & !3;
            regs.set(i.rd, pc.wrapping_add(4));
            e.mispredict = pred.resolve_indirect(pc, is_return, e.next_pc);
        }
        Fadd | Fsub | Fmul => {
            let (a, b) = (regs.getf(i.fs1), regs.getf(i.fs2));
            let v = match i.op {
                Fadd => a + b,
                Fsub => a - b,
                _ => a * b,
            };
            regs.setf(i.fd, v);
            e.extra_cycles = FP_SHORT_CYCLES - 1;
        }
        Fcvt => {
            // round to single precision, keep double representation
            regs.setf(i.fd, regs.getf(i.fs1) as f32 as f64);
            e.extra_cycles = FP_SHORT_CYCLES - 1;
        }
        Fdiv | Fsqrt => {
            let v = if i.op == Fdiv {
                if i.single {
                    (regs.getf(i.fs1) as f32 / regs.getf(i.fs2) as f32) as f64
                } else {
                    regs.getf(i.fs1) / regs.getf(i.fs2)
                }
            } else if i.single {
                (regs.getf(i.fs1) as f32).sqrt() as f64
            } else {
                regs.getf(i.fs1).sqrt()
            };
            regs.setf(i.fd, v);
            e.extra_cycles = if i.single {
                FP_LONG_SINGLE_CYCLES - 1
            } else {
                FP_LONG_DOUBLE_CYCLES - 1
            };
        }
        Fld => {
            e.mem = Some(MemOp {
                kind: ReqKind::Load,
                addr: rs1.wrapping_add(sext),
                width: 8,
                data: 0,
                dest: Dest::Freg(i.fs2),
            })
        }
        Fst => {
            e.mem = Some(MemOp {
                kind: ReqKind::Store,
                addr: rs1.wrapping_add(sext),
                width: 8,
                data: regs.getf(i.fs2).to_bits(),
                dest: Dest::None,
            })
        }
        Tid => regs.set(i.rd, tid as u32),
        Nop => {}
        Halt => e.halt = true,
        Illegal => return Err(ExecFault::Illegal(pc)),
    }

    if e.mispredict {
        e.extra_cycles += timing.mispredict_penalty as u64;
    }
    debug_assert!(
        e.mem.is_none()
            || matches!(
                i.op.class(),
                OpClass::Load | OpClass::Store | OpClass::Atomic | OpClass::FpMem
            )
    );
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::decode;

    fn exec(i: Instruction, pc: u32, regs: &mut RegFile, pred: &mut Predictor) -> Exec {
        execute(&i, pc, 0, regs, pred, &Timing::default()).unwrap()
    }

    fn instr(op: Op) -> Instruction {
        Instruction {
            op,
            ..Default::default()
        }
    }

    #[test]
    fn r0_stays_zero() {
        let mut regs = RegFile::default();
        let mut pred = Predictor::default();
        let mut i = instr(Op::Addi);
        i.rd = 0;
        i.imm = 7;
        exec(i, 0, &mut regs, &mut pred);
        assert_eq!(regs.get(0), 0);
    }

    #[test]
    fn alu_spot_checks() {
        let mut regs = RegFile::default();
        let mut pred = Predictor::default();
        regs.set(1, 0xffff_fff0); // -16
        regs.set(2, 3);
        let mut i = instr(Op::Sra);
        (i.rd, i.rs1, i.rs2) = (3, 1, 2);
        exec(i, 0, &mut regs, &mut pred);
        assert_eq!(regs.get(3) as i32, -2);

        let mut i = instr(Op::Slt);
        (i.rd, i.rs1, i.rs2) = (4, 1, 2);
        exec(i, 0, &mut regs, &mut pred);
        assert_eq!(regs.get(4), 1);

        let mut i = instr(Op::Lui);
        (i.rd, i.imm) = (5, 0x1234u16 as i16);
        exec(i, 0, &mut regs, &mut pred);
        assert_eq!(regs.get(5), 0x1234_0000);
    }

    #[test]
    fn quiet_division_by_zero() {
        let mut regs = RegFile::default();
        let mut pred = Predictor::default();
        regs.set(1, 42);
        let mut i = instr(Op::Div);
        (i.rd, i.rs1, i.rs2) = (3, 1, 2);
        let e = exec(i, 0, &mut regs, &mut pred);
        assert_eq!(regs.get(3) as i32, -1);
        assert_eq!(e.extra_cycles, 23);
        let mut i = instr(Op::Rem);
        (i.rd, i.rs1, i.rs2) = (4, 1, 2);
        exec(i, 0, &mut regs, &mut pred);
        assert_eq!(regs.get(4), 42);
    }

    #[test]
    fn fp_timing_and_single_rounding() {
        let mut regs = RegFile::default();
        let mut pred = Predictor::default();
        regs.setf(1, 2.0);
        regs.setf(2, 3.0);
        let mut i = instr(Op::Fdiv);
        (i.fd, i.fs1, i.fs2) = (3, 1, 2);
        let e = exec(i, 0, &mut regs, &mut pred);
        assert_eq!(e.extra_cycles, 23);
        assert_eq!(regs.getf(3), 2.0 / 3.0);

        i.single = true;
        let e = exec(i, 0, &mut regs, &mut pred);
        assert_eq!(e.extra_cycles, 15);
        assert_eq!(regs.getf(3), (2.0f32 / 3.0f32) as f64);

        let mut i = instr(Op::Fadd);
        (i.fd, i.fs1, i.fs2) = (4, 1, 2);
        let e = exec(i, 0, &mut regs, &mut pred);
        assert_eq!(e.extra_cycles, 1);
        assert_eq!(regs.getf(4), 5.0);
    }

    #[test]
    fn loads_and_stores_become_memops() {
        let mut regs = RegFile::default();
        let mut pred = Predictor::default();
        regs.set(1, 0x1000);
        regs.set(2, 0xabcd_0123);
        let mut i = instr(Op::Sw);
        (i.rs2, i.rs1, i.imm) = (2, 1, 8);
        let e = exec(i, 0, &mut regs, &mut pred);
        assert_eq!(
            e.mem,
            Some(MemOp {
                kind: ReqKind::Store,
                addr: 0x1008,
                width: 4,
                data: 0xabcd_0123,
                dest: Dest::None,
            })
        );

        let mut i = instr(Op::Lb);
        (i.rd, i.rs1, i.imm) = (3, 1, -1);
        let e = exec(i, 0, &mut regs, &mut pred);
        assert_eq!(
            e.mem.unwrap(),
            MemOp {
                kind: ReqKind::Load,
                addr: 0xfff,
                width: 1,
                data: 0,
                dest: Dest::IregSext8(3),
            }
        );
    }

    #[test]
    fn branch_predictor_learns_a_loop() {
        let mut regs = RegFile::default();
        let mut pred = Predictor::default();
        regs.set(1, 0);
        regs.set(2, 100);
        let mut bne = instr(Op::Bne);
        (bne.rs1, bne.rs2, bne.imm) = (1, 2, -5);
        let mut mispredicts = 0;
        for k in 0..100 {
            regs.set(1, k + 1);
            let e = exec(bne, 0x40, &mut regs, &mut pred);
            if k < 99 {
                assert_eq!(e.next_pc, 0x40u32.wrapping_sub(20));
            } else {
                assert_eq!(e.next_pc, 0x44);
            }
            if e.mispredict {
                mispredicts += 1;
            }
        }
        // warm-up mispredicts plus the final fall-through
        assert!(mispredicts <= 3, "got {mispredicts}");
        assert!(mispredicts >= 1);
    }

    #[test]
    fn call_return_uses_ras() {
        let mut regs = RegFile::default();
        let mut pred = Predictor::default();
        let mut jal = instr(Op::Jal);
        jal.target = 0x40;
        let mut ret = instr(Op::Jalr);
        (ret.rd, ret.rs1, ret.imm) = (0, LINK_REG, 0);

        // first call mispredicts (cold BTB), its return does not
        let e = exec(jal, 0x100, &mut regs, &mut pred);
        assert!(e.mispredict);
        assert_eq!(e.next_pc, 0x200);
        assert_eq!(regs.get(LINK_REG), 0x104);
        let e = exec(ret, 0x240, &mut regs, &mut pred);
        assert!(!e.mispredict);
        assert_eq!(e.next_pc, 0x104);

        // second call around: everything predicted
        let e = exec(jal, 0x100, &mut regs, &mut pred);
        assert!(!e.mispredict);
        let e = exec(ret, 0x240, &mut regs, &mut pred);
        assert!(!e.mispredict);
        // mispredict adds the penalty to the busy time
        let mut cold = instr(Op::Jal);
        cold.target = 0x10;
        let e2 = exec(cold, 0x300, &mut regs, &mut pred);
        assert!(e2.mispredict);
        assert_eq!(e2.extra_cycles, Timing::default().mispredict_penalty as u64);
        let _ = e;
    }

    #[test]
    fn ibuf_pair_fill_and_invalidate() {
        let mut ib = InstrBuffer::default();
        let lo = crate::isa::encode(&{
            let mut i = instr(Op::Addi);
            (i.rd, i.rs1, i.imm) = (1, 0, 5);
            i
        })
        .unwrap();
        let hi = crate::isa::encode(&instr(Op::Halt)).unwrap();
        assert!(ib.lookup(0x1000).is_none());
        ib.fill_pair(0x1000, (hi as u64) << 32 | lo as u64);
        assert_eq!(ib.lookup(0x1000).unwrap().op, Op::Addi);
        assert_eq!(ib.lookup(0x1004).unwrap().op, Op::Halt);
        // aliasing address maps to the same entry but must not hit
        assert!(ib.lookup(0x1000 + 4 * IBUF_ENTRIES as u32).is_none());
        ib.invalidate(0x1004);
        assert!(ib.lookup(0x1004).is_none());
        assert!(ib.lookup(0x1000).is_some());
    }

    #[test]
    fn decoded_halt_executes() {
        let mut regs = RegFile::default();
        let mut pred = Predictor::default();
        let w = crate::isa::encode(&instr(Op::Halt)).unwrap();
        let e = exec(decode(w), 0, &mut regs, &mut pred);
        assert!(e.halt);
    }
}
