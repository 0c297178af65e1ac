//! Two-pass assembler and disassembler for AJT-lite assembly.
//!
//! Syntax:
//!   label:  mnemonic op1, op2, ...   ; comment  (# also starts a comment)
//!
//! Registers are r0..r31 (aliases: zero, ra) and f0..f15. Memory operands
//! are written `offset(base)`. Branch and jump targets are labels (resolved
//! PC-relative) or `#N` raw word offsets, which is what the disassembler
//! emits so its output re-assembles bit-identically.
//!
//! Directives: .org ADDR, .word V, .double V (two words, little-endian word
//! order), .space N, .global LABEL.
//!
//! Pseudo-instructions: li, la (always lui+ori, 2 words), mv, j, ret.

use std::collections::BTreeMap;
use std::fmt;

use crate::isa::{decode, encode, Format, Instruction, Op, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsmErrorKind {
    UnknownMnemonic,
    DuplicateLabel,
    UndefinedLabel,
    OperandCount,
    ImmediateRange,
    BadDirective,
    BadOperand,
}

#[derive(Debug, Clone)]
pub struct AsmError {
    /// 1-based source line.
    pub line: usize,
    pub kind: AsmErrorKind,
    pub message: String,
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {:?}: {}", self.line, self.kind, self.message)
    }
}

impl std::error::Error for AsmError {}

fn err(line: usize, kind: AsmErrorKind, msg: impl Into<String>) -> AsmError {
    AsmError {
        line,
        kind,
        message: msg.into(),
    }
}

#[derive(Debug, Clone)]
enum Item {
    Instr { mnemonic: String, operands: Vec<String> },
    Org(u32),
    Word(u32),
    Double(f64),
    Space(u32),
    Global(String),
}

#[derive(Debug, Clone)]
struct Line {
    num: usize,
    label: Option<String>,
    item: Option<Item>,
}

fn parse_int(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let v = if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(h, 16).ok()?
    } else {
        body.parse::<i64>().ok()?
    };
    Some(if neg { -v } else { v })
}

fn parse_ireg(s: &str) -> Option<u8> {
    match s {
        "zero" => return Some(0),
        "ra" => return Some(31),
        _ => {}
    }
    let n: u8 = s.strip_prefix('r')?.parse().ok()?;
    (n < 32).then_some(n)
}

fn parse_freg(s: &str) -> Option<u8> {
    let n: u8 = s.strip_prefix('f')?.parse().ok()?;
    (n < 16).then_some(n)
}

/// Split a source line into label / item, stripping comments.
fn scan_line(num: usize, raw: &str, errors: &mut Vec<AsmError>) -> Line {
    // `#` starts a comment unless immediately followed by a digit or '-'
    // (that form is a raw branch offset operand).
    let mut cut = raw.len();
    let bytes = raw.as_bytes();
    for (pos, ch) in raw.char_indices() {
        let is_comment = match ch {
            ';' => true,
            '/' => bytes.get(pos + 1) == Some(&b'/'),
            '#' => !matches!(bytes.get(pos + 1), Some(c) if c.is_ascii_digit() || *c == b'-'),
            _ => false,
        };
        if is_comment {
            cut = pos;
            break;
        }
    }
    let mut text = raw[..cut].trim();
    let mut label = None;
    if let Some(pos) = text.find(':') {
        let (l, rest) = text.split_at(pos);
        let l = l.trim();
        if !l.is_empty() && l.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') && !l.starts_with('.') {
            label = Some(l.to_string());
            text = rest[1..].trim();
        }
    }
    if text.is_empty() {
        return Line { num, label, item: None };
    }
    let (head, tail) = match text.split_once(char::is_whitespace) {
        Some((h, t)) => (h, t.trim()),
        None => (text, ""),
    };
    let item = if let Some(dir) = head.strip_prefix('.') {
        match dir {
            "org" => match parse_int(tail) {
                Some(v) if v >= 0 && v % 4 == 0 && v <= u32::MAX as i64 => Some(Item::Org(v as u32)),
                _ => {
                    errors.push(err(num, AsmErrorKind::BadDirective, format!(".org needs a word-aligned address, got '{tail}'")));
                    None
                }
            },
            "word" => match parse_int(tail) {
                Some(v) if (-(1i64 << 31)..1i64 << 32).contains(&v) => Some(Item::Word(v as u32)),
                _ => {
                    errors.push(err(num, AsmErrorKind::BadDirective, format!("bad .word value '{tail}'")));
                    None
                }
            },
            "double" => match tail.parse::<f64>() {
                Ok(v) => Some(Item::Double(v)),
                Err(_) => {
                    // allow raw bit pattern via 0x literal
                    match parse_int(tail) {
                        Some(v) => Some(Item::Double(f64::from_bits(v as u64))),
                        None => {
                            errors.push(err(num, AsmErrorKind::BadDirective, format!("bad .double value '{tail}'")));
                            None
                        }
                    }
                }
            },
            "space" => match parse_int(tail) {
                Some(v) if v >= 0 && v % 4 == 0 => Some(Item::Space(v as u32)),
                _ => {
                    errors.push(err(num, AsmErrorKind::BadDirective, format!(".space needs a non-negative multiple of 4, got '{tail}'")));
                    None
                }
            },
            "global" => {
                if tail.is_empty() {
                    errors.push(err(num, AsmErrorKind::BadDirective, ".global needs a label"));
                    None
                } else {
                    Some(Item::Global(tail.to_string()))
                }
            }
            _ => {
                errors.push(err(num, AsmErrorKind::BadDirective, format!("unknown directive .{dir}")));
                None
            }
        }
    } else {
        let operands: Vec<String> = if tail.is_empty() {
            vec![]
        } else {
            tail.split(',').map(|s| s.trim().to_string()).collect()
        };
        Some(Item::Instr {
            mnemonic: head.to_ascii_lowercase(),
            operands,
        })
    };
    Line { num, label, item }
}

/// Words occupied by an instruction (pass 1).
fn instr_words(mnemonic: &str) -> usize {
    match mnemonic {
        "la" => 2,
        _ => 1,
    }
}

struct Encoder<'a> {
    labels: &'a BTreeMap<String, u32>,
}

enum Target {
    Label(String),
    RawOffset(i32),
}

impl<'a> Encoder<'a> {
    fn ireg(&self, line: usize, s: &str) -> Result<u8, AsmError> {
        parse_ireg(s).ok_or_else(|| err(line, AsmErrorKind::BadOperand, format!("expected integer register, got '{s}'")))
    }

    fn freg(&self, line: usize, s: &str) -> Result<u8, AsmError> {
        parse_freg(s).ok_or_else(|| err(line, AsmErrorKind::BadOperand, format!("expected fp register, got '{s}'")))
    }

    fn imm16(&self, line: usize, s: &str) -> Result<i16, AsmError> {
        let v = parse_int(s).ok_or_else(|| err(line, AsmErrorKind::BadOperand, format!("expected immediate, got '{s}'")))?;
        if (-32768..=32767).contains(&v) {
            Ok(v as i16)
        } else {
            Err(err(line, AsmErrorKind::ImmediateRange, format!("immediate {v} out of 16-bit signed range")))
        }
    }

    /// Immediate for logical ops / LUI: accepts 0..=0xffff or -32768..=32767.
    fn uimm16(&self, line: usize, s: &str) -> Result<i16, AsmError> {
        let v = parse_int(s).ok_or_else(|| err(line, AsmErrorKind::BadOperand, format!("expected immediate, got '{s}'")))?;
        if (0..=0xffff).contains(&v) {
            Ok(v as u16 as i16)
        } else if (-32768..0).contains(&v) {
            Ok(v as i16)
        } else {
            Err(err(line, AsmErrorKind::ImmediateRange, format!("immediate {v} out of 16-bit range")))
        }
    }

    /// `offset(base)` memory operand.
    fn mem(&self, line: usize, s: &str) -> Result<(i16, u8), AsmError> {
        let open = s.find('(').ok_or_else(|| err(line, AsmErrorKind::BadOperand, format!("expected offset(base), got '{s}'")))?;
        if !s.ends_with(')') {
            return Err(err(line, AsmErrorKind::BadOperand, format!("expected offset(base), got '{s}'")));
        }
        let off = s[..open].trim();
        let off = if off.is_empty() { 0 } else { self.imm16(line, off)? as i64 as i16 };
        let base = self.ireg(line, s[open + 1..s.len() - 1].trim())?;
        Ok((off, base))
    }

    fn target(&self, line: usize, s: &str) -> Result<Target, AsmError> {
        if let Some(n) = s.strip_prefix('#') {
            let v = parse_int(n).ok_or_else(|| err(line, AsmErrorKind::BadOperand, format!("bad raw offset '{s}'")))?;
            Ok(Target::RawOffset(v as i32))
        } else if parse_int(s).is_some() {
            Err(err(line, AsmErrorKind::BadOperand, format!("branch target must be a label or #offset, got '{s}'")))
        } else {
            Ok(Target::Label(s.to_string()))
        }
    }

    fn resolve_branch(&self, line: usize, t: Target, pc: u32) -> Result<i16, AsmError> {
        match t {
            Target::RawOffset(v) => {
                if (-32768..=32767).contains(&v) {
                    Ok(v as i16)
                } else {
                    Err(err(line, AsmErrorKind::ImmediateRange, format!("branch offset {v} out of range")))
                }
            }
            Target::Label(l) => {
                let addr = *self.labels.get(&l).ok_or_else(|| err(line, AsmErrorKind::UndefinedLabel, format!("undefined label '{l}'")))?;
                let off = (addr as i64 - pc as i64) / 4;
                if (-32768..=32767).contains(&off) {
                    Ok(off as i16)
                } else {
                    Err(err(line, AsmErrorKind::ImmediateRange, format!("label '{l}' out of branch reach ({off} words)")))
                }
            }
        }
    }

    fn resolve_jump(&self, line: usize, t: Target, pc: u32) -> Result<i32, AsmError> {
        match t {
            Target::RawOffset(v) => Ok(v),
            Target::Label(l) => {
                let addr = *self.labels.get(&l).ok_or_else(|| err(line, AsmErrorKind::UndefinedLabel, format!("undefined label '{l}'")))?;
                Ok(((addr as i64 - pc as i64) / 4) as i32)
            }
        }
    }

    fn expect_ops(&self, line: usize, ops: &[String], n: usize) -> Result<(), AsmError> {
        if ops.len() == n {
            Ok(())
        } else {
            Err(err(line, AsmErrorKind::OperandCount, format!("expected {n} operands, got {}", ops.len())))
        }
    }

    /// Encode one (possibly pseudo) instruction at `pc`. Returns 1 or 2 words.
    fn encode_instr(&self, line: usize, mnemonic: &str, ops: &[String], pc: u32) -> Result<Vec<u32>, AsmError> {
        use Op::*;
        let mut i = Instruction::default();
        let one = |i: Instruction| -> Result<Vec<u32>, AsmError> {
            encode(&i).map(|w| vec![w]).map_err(|e| err(line, AsmErrorKind::ImmediateRange, e.to_string()))
        };
        let op = match mnemonic {
            "add" => Add, "sub" => Sub, "and" => And, "or" => Or, "xor" => Xor,
            "sll" => Sll, "srl" => Srl, "sra" => Sra, "slt" => Slt, "mul" => Mul,
            "div" => Div, "rem" => Rem,
            "addi" => Addi, "andi" => Andi, "ori" => Ori, "xori" => Xori, "slti" => Slti,
            "lui" => Lui,
            "lw" => Lw, "lb" => Lb, "sw" => Sw, "sb" => Sb,
            "beq" => Beq, "bne" => Bne, "blt" => Blt, "bge" => Bge,
            "jal" => Jal, "jalr" => Jalr, "tas" => Tas,
            "fadd" => Fadd, "fsub" => Fsub, "fmul" => Fmul, "fcvt" => Fcvt,
            "fdiv" | "fdivs" => Fdiv, "fsqrt" | "fsqrts" => Fsqrt,
            "fld" => Fld, "fst" => Fst,
            "tid" => Tid, "nop" => Nop, "halt" => Halt,
            // pseudo-instructions
            "li" => {
                self.expect_ops(line, ops, 2)?;
                i.op = Addi;
                i.rd = self.ireg(line, &ops[0])?;
                let v = parse_int(&ops[1]).ok_or_else(|| err(line, AsmErrorKind::BadOperand, format!("bad li value '{}'", ops[1])))?;
                if (-32768..=32767).contains(&v) {
                    i.imm = v as i16;
                    return one(i);
                } else if (0..=0xffff).contains(&v) {
                    i.op = Ori;
                    i.imm = v as u16 as i16;
                    return one(i);
                }
                return Err(err(line, AsmErrorKind::ImmediateRange, format!("li value {v} needs la")));
            }
            "la" => {
                self.expect_ops(line, ops, 2)?;
                let rd = self.ireg(line, &ops[0])?;
                let v = if let Some(addr) = self.labels.get(ops[1].as_str()) {
                    *addr
                } else if let Some(v) = parse_int(&ops[1]) {
                    v as u32
                } else {
                    return Err(err(line, AsmErrorKind::UndefinedLabel, format!("undefined label '{}'", ops[1])));
                };
                let hi = Instruction { op: Lui, rd, imm: (v >> 16) as u16 as i16, ..Default::default() };
                let lo = Instruction { op: Ori, rd, rs1: rd, imm: (v & 0xffff) as u16 as i16, ..Default::default() };
                return Ok(vec![encode(&hi).unwrap(), encode(&lo).unwrap()]);
            }
            "mv" => {
                self.expect_ops(line, ops, 2)?;
                i.op = Addi;
                i.rd = self.ireg(line, &ops[0])?;
                i.rs1 = self.ireg(line, &ops[1])?;
                return one(i);
            }
            "j" => {
                self.expect_ops(line, ops, 1)?;
                i.op = Beq;
                i.imm = self.resolve_branch(line, self.target(line, &ops[0])?, pc)?;
                return one(i);
            }
            "ret" => {
                self.expect_ops(line, ops, 0)?;
                i.op = Jalr;
                i.rs1 = 31;
                return one(i);
            }
            _ => return Err(err(line, AsmErrorKind::UnknownMnemonic, format!("unknown mnemonic '{mnemonic}'"))),
        };
        i.op = op;
        i.single = matches!(mnemonic, "fdivs" | "fsqrts");
        match op.format() {
            Format::R => {
                self.expect_ops(line, ops, 3)?;
                i.rd = self.ireg(line, &ops[0])?;
                i.rs1 = self.ireg(line, &ops[1])?;
                i.rs2 = self.ireg(line, &ops[2])?;
            }
            Format::I if matches!(op, Lw | Lb | Tas) => {
                self.expect_ops(line, ops, 2)?;
                i.rd = self.ireg(line, &ops[0])?;
                (i.imm, i.rs1) = self.mem(line, &ops[1])?;
            }
            Format::I if op == Jalr => {
                self.expect_ops(line, ops, 2)?;
                i.rd = self.ireg(line, &ops[0])?;
                (i.imm, i.rs1) = self.mem(line, &ops[1])?;
            }
            Format::I => {
                self.expect_ops(line, ops, 3)?;
                i.rd = self.ireg(line, &ops[0])?;
                i.rs1 = self.ireg(line, &ops[1])?;
                i.imm = if matches!(op, Andi | Ori | Xori) {
                    self.uimm16(line, &ops[2])?
                } else {
                    self.imm16(line, &ops[2])?
                };
            }
            Format::U => {
                self.expect_ops(line, ops, 2)?;
                i.rd = self.ireg(line, &ops[0])?;
                i.imm = self.uimm16(line, &ops[1])?;
            }
            Format::S => {
                self.expect_ops(line, ops, 2)?;
                i.rs2 = self.ireg(line, &ops[0])?;
                (i.imm, i.rs1) = self.mem(line, &ops[1])?;
            }
            Format::B => {
                self.expect_ops(line, ops, 3)?;
                i.rs1 = self.ireg(line, &ops[0])?;
                i.rs2 = self.ireg(line, &ops[1])?;
                i.imm = self.resolve_branch(line, self.target(line, &ops[2])?, pc)?;
            }
            Format::J => {
                self.expect_ops(line, ops, 1)?;
                i.target = self.resolve_jump(line, self.target(line, &ops[0])?, pc)?;
            }
            Format::Fr => {
                self.expect_ops(line, ops, 3)?;
                i.fd = self.freg(line, &ops[0])?;
                i.fs1 = self.freg(line, &ops[1])?;
                i.fs2 = self.freg(line, &ops[2])?;
            }
            Format::F2 => {
                self.expect_ops(line, ops, 2)?;
                i.fd = self.freg(line, &ops[0])?;
                i.fs1 = self.freg(line, &ops[1])?;
            }
            Format::Fm => {
                self.expect_ops(line, ops, 2)?;
                i.fs2 = self.freg(line, &ops[0])?;
                (i.imm, i.rs1) = self.mem(line, &ops[1])?;
            }
            Format::Rd => {
                self.expect_ops(line, ops, 1)?;
                i.rd = self.ireg(line, &ops[0])?;
            }
            Format::None => {
                self.expect_ops(line, ops, 0)?;
            }
        }
        one(i)
    }
}

/// Assemble a source file into a Program. All diagnosable errors are
/// collected and reported together; one bad line does not suppress later
/// diagnostics.
pub fn assemble(source: &str) -> Result<Program, Vec<AsmError>> {
    let mut errors = Vec::new();
    let lines: Vec<Line> = source
        .lines()
        .enumerate()
        .map(|(i, raw)| scan_line(i + 1, raw, &mut errors))
        .collect();

    // pass 1: layout + label collection
    let mut labels: BTreeMap<String, u32> = BTreeMap::new();
    let mut globals: Vec<(usize, String)> = Vec::new();
    let mut base: Option<u32> = None;
    let mut loc: u32 = 0;
    for line in &lines {
        if let Some(l) = &line.label {
            if labels.insert(l.clone(), loc).is_some() {
                errors.push(err(line.num, AsmErrorKind::DuplicateLabel, format!("duplicate label '{l}'")));
            }
        }
        match &line.item {
            Some(Item::Org(addr)) => {
                match base {
                    None => {
                        base = Some(*addr);
                        loc = *addr;
                    }
                    Some(_) if *addr >= loc => loc = *addr,
                    Some(_) => {
                        errors.push(err(line.num, AsmErrorKind::BadDirective, format!(".org {addr:#x} moves backwards (location is {loc:#x})")));
                    }
                }
                // a label on the .org line names the new location
                if let Some(l) = &line.label {
                    labels.insert(l.clone(), loc);
                }
            }
            Some(Item::Instr { mnemonic, .. }) => loc += 4 * instr_words(mnemonic) as u32,
            Some(Item::Word(_)) => loc += 4,
            Some(Item::Double(_)) => loc += 8,
            Some(Item::Space(n)) => loc += n,
            Some(Item::Global(l)) => globals.push((line.num, l.clone())),
            None => {}
        }
        if base.is_none() && line.item.is_some() && !matches!(line.item, Some(Item::Global(_))) {
            base = Some(0);
        }
    }
    let base = base.unwrap_or(0);

    // pass 2: encode
    let enc = Encoder { labels: &labels };
    let mut words: Vec<u32> = Vec::new();
    let mut loc = base;
    let push = |words: &mut Vec<u32>, loc: &mut u32, w: u32| {
        words.push(w);
        *loc += 4;
    };
    for line in &lines {
        match &line.item {
            Some(Item::Org(addr)) => {
                if *addr >= loc {
                    while loc < *addr {
                        push(&mut words, &mut loc, 0);
                    }
                }
            }
            Some(Item::Instr { mnemonic, operands }) => {
                match enc.encode_instr(line.num, mnemonic, operands, loc) {
                    Ok(ws) => {
                        for w in ws {
                            push(&mut words, &mut loc, w);
                        }
                    }
                    Err(e) => {
                        errors.push(e);
                        for _ in 0..instr_words(mnemonic) {
                            push(&mut words, &mut loc, 0);
                        }
                    }
                }
            }
            Some(Item::Word(w)) => push(&mut words, &mut loc, *w),
            Some(Item::Double(v)) => {
                let bits = v.to_bits();
                push(&mut words, &mut loc, bits as u32);
                push(&mut words, &mut loc, (bits >> 32) as u32);
            }
            Some(Item::Space(n)) => {
                for _ in 0..n / 4 {
                    push(&mut words, &mut loc, 0);
                }
            }
            _ => {}
        }
    }

    let mut entry_points = BTreeMap::new();
    for (num, g) in globals {
        match labels.get(&g) {
            Some(addr) => {
                entry_points.insert(g, *addr);
            }
            None => errors.push(err(num, AsmErrorKind::UndefinedLabel, format!(".global of undefined label '{g}'"))),
        }
    }

    if errors.is_empty() {
        Ok(Program {
            base_address: base,
            words,
            entry_points,
        })
    } else {
        errors.sort_by_key(|e| e.line);
        Err(errors)
    }
}

fn ireg_name(r: u8) -> String {
    format!("r{r}")
}

fn render(i: &Instruction) -> String {
    use Op::*;
    let m = match i.op {
        Add => "add", Sub => "sub", And => "and", Or => "or", Xor => "xor",
        Sll => "sll", Srl => "srl", Sra => "sra", Slt => "slt", Mul => "mul",
        Div => "div", Rem => "rem",
        Addi => "addi", Andi => "andi", Ori => "ori", Xori => "xori", Slti => "slti",
        Lui => "lui",
        Lw => "lw", Lb => "lb", Sw => "sw", Sb => "sb",
        Beq => "beq", Bne => "bne", Blt => "blt", Bge => "bge",
        Jal => "jal", Jalr => "jalr", Tas => "tas",
        Fadd => "fadd", Fsub => "fsub", Fmul => "fmul", Fcvt => "fcvt",
        Fdiv => if i.single { "fdivs" } else { "fdiv" },
        Fsqrt => if i.single { "fsqrts" } else { "fsqrt" },
        Fld => "fld", Fst => "fst",
        Tid => "tid", Nop => "nop", Halt => "halt",
        Illegal => unreachable!(),
    };
    match i.op.format() {
        Format::R => format!("{m} r{}, r{}, r{}", i.rd, i.rs1, i.rs2),
        Format::I if matches!(i.op, Lw | Lb | Tas | Jalr) => {
            format!("{m} r{}, {}({})", i.rd, i.imm, ireg_name(i.rs1))
        }
        Format::I if matches!(i.op, Andi | Ori | Xori) => {
            format!("{m} r{}, r{}, {:#x}", i.rd, i.rs1, i.imm as u16)
        }
        Format::I => format!("{m} r{}, r{}, {}", i.rd, i.rs1, i.imm),
        Format::U => format!("{m} r{}, {:#x}", i.rd, i.imm as u16),
        Format::S => format!("{m} r{}, {}({})", i.rs2, i.imm, ireg_name(i.rs1)),
        Format::B => format!("{m} r{}, r{}, #{}", i.rs1, i.rs2, i.imm),
        Format::J => format!("{m} #{}", i.target),
        Format::Fr => format!("{m} f{}, f{}, f{}", i.fd, i.fs1, i.fs2),
        Format::F2 => format!("{m} f{}, f{}", i.fd, i.fs1),
        Format::Fm => format!("{m} f{}, {}({})", i.fs2, i.imm, ireg_name(i.rs1)),
        Format::Rd => format!("{m} r{}", i.rd),
        Format::None => m.to_string(),
    }
}

/// Disassemble a program to re-assemblable text. Words that do not decode
/// are rendered as .word literals.
pub fn disassemble(p: &Program) -> String {
    let mut out = String::new();
    out.push_str(&format!(".org {:#x}\n", p.base_address));
    for w in &p.words {
        let i = decode(*w);
        if i.op == Op::Illegal {
            out.push_str(&format!(".word {:#010x}\n", w));
        } else {
            out.push_str(&render(&i));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nop_halt_program() {
        let p = assemble("nop\nhalt\n").unwrap();
        assert_eq!(p.base_address, 0);
        assert_eq!(p.words.len(), 2);
        assert_eq!(decode(p.words[0]).op, Op::Nop);
        assert_eq!(decode(p.words[1]).op, Op::Halt);
    }

    #[test]
    fn undefined_label_reported_at_branch_line() {
        let e = assemble("nop\nbeq r1, r2, nowhere\n").unwrap_err();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].line, 2);
        assert_eq!(e[0].kind, AsmErrorKind::UndefinedLabel);
    }

    #[test]
    fn errors_do_not_suppress_later_errors() {
        let e = assemble("bogus r1\nnop\nalso_bogus\n").unwrap_err();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].line, 1);
        assert_eq!(e[1].line, 3);
    }

    #[test]
    fn duplicate_label() {
        let e = assemble("x: nop\nx: nop\n").unwrap_err();
        assert_eq!(e[0].kind, AsmErrorKind::DuplicateLabel);
    }

    #[test]
    fn immediate_range() {
        let e = assemble("addi r1, r0, 40000\n").unwrap_err();
        assert_eq!(e[0].kind, AsmErrorKind::ImmediateRange);
    }

    #[test]
    fn branch_back_and_forward() {
        let src = "\
.org 0x100
top: addi r1, r1, 1
     bne r1, r2, top
     beq r0, r0, done
     nop
done: halt
";
        let p = assemble(src).unwrap();
        assert_eq!(p.base_address, 0x100);
        let bne = decode(p.words[1]);
        assert_eq!(bne.imm, -1);
        let beq = decode(p.words[2]);
        assert_eq!(beq.imm, 2);
    }

    #[test]
    fn la_emits_lui_ori() {
        let p = assemble(".org 0x1000\nla r5, data\n.org 0x2000\ndata: .word 7\n").unwrap();
        let lui = decode(p.words[0]);
        let ori = decode(p.words[1]);
        assert_eq!((lui.op, lui.rd, lui.imm as u16), (Op::Lui, 5, 0));
        assert_eq!((ori.op, ori.rd, ori.rs1, ori.imm as u16), (Op::Ori, 5, 5, 0x2000));
    }

    #[test]
    fn double_little_endian_word_order() {
        let p = assemble(".double 1.0\n").unwrap();
        let bits = 1.0f64.to_bits();
        assert_eq!(p.words, vec![bits as u32, (bits >> 32) as u32]);
    }

    #[test]
    fn globals_become_entry_points() {
        let p = assemble(".org 0x40\n.global main\nnop\nmain: halt\n").unwrap();
        assert_eq!(p.entry_points["main"], 0x44);
    }

    #[test]
    fn disassemble_round_trip_basics() {
        let src = "\
.org 0x200
start: addi r1, r0, 5
  lw r2, 8(r1)
  fld f3, 0(r2)
  fadd f3, f3, f3
  fdivs f1, f2, f3
  sw r2, -4(r1)
  tas r4, 0(r5)
  beq r1, r2, start
  jal start
  jalr r31, 0(r6)
  lui r7, 0xbeef
  tid r8
  .word 0x00000000
  halt
";
        let p = assemble(src).unwrap();
        let text = disassemble(&p);
        let q = assemble(&text).unwrap();
        assert_eq!(p.words, q.words, "disassembly:\n{text}");
        // idempotence: a second round trip is stable
        let text2 = disassemble(&q);
        assert_eq!(text, text2);
    }
}
