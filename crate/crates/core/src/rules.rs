//! Rule-based x86-64 (gcc `-O0`, AT&T) to ARMv5 translator.
//!
//! This is a harness oracle for integer scalar code, not a competing
//! transpiler. Every x86 register maps to a fixed ARM register and every
//! instruction to a fixed template. The ARM stack pointer mirrors `%rsp`
//! relative to the frame pointer, so rbp-relative stack slots keep their
//! offsets.
//!
//! | x86 | ARM |
//! |-----|-----|
//! | eax | r0  |
//! | ecx | r1  |
//! | edx | r2  |
//! | ebx | r4  |
//! | esi | r3  |
//! | edi | ip  |
//! | rbp | fp  |
//! | rsp | sp  |
//!
//! `lr`, `r5` and `r6` are scratch. Arguments arrive in r0–r3 and are moved
//! into the registers their x86 counterparts (edi, esi, edx, ecx) map to;
//! calls do the reverse shuffle.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;

use crate::asmtext::{AssemblyUnit, Instruction, LineKind, MemoryRef, Operand, OperandKind};
use crate::isa::IsaName;

const T_SRC: &str = "lr";
const T_ADDR: &str = "r5";
const T_DST: &str = "r6";
/// High word of the last 64-bit multiply.
const HIGH: &str = "r7";
const SAVED: &str = "{r4, r5, r6, r7, fp, lr}";
const RESTORE: &str = "{r4, r5, r6, r7, fp, pc}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleError {
    NotX86(IsaName),
    UnsupportedInstruction { mnemonic: String, line: usize },
    UnsupportedOperand { mnemonic: String, operand: String, line: usize },
}

impl fmt::Display for RuleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleError::NotX86(isa) => write!(f, "rule translator expects X86_64 input, got {isa}"),
            RuleError::UnsupportedInstruction { mnemonic, line } => {
                write!(f, "line {line}: instruction `{mnemonic}` is outside the rule subset")
            }
            RuleError::UnsupportedOperand { mnemonic, operand, line } => {
                write!(f, "line {line}: operand `{operand}` of `{mnemonic}` is outside the rule subset")
            }
        }
    }
}

impl core::error::Error for RuleError {}

/// Maps an x86 register (any width) to its ARM home.
pub fn arm_register(x86: &str) -> Option<&'static str> {
    Some(match x86 {
        "rax" | "eax" | "ax" | "al" => "r0",
        "rcx" | "ecx" | "cx" | "cl" => "r1",
        "rdx" | "edx" | "dx" | "dl" => "r2",
        "rbx" | "ebx" | "bx" | "bl" => "r4",
        "rsi" | "esi" | "si" | "sil" => "r3",
        "rdi" | "edi" | "di" | "dil" => "ip",
        "rbp" | "ebp" => "fp",
        "rsp" | "esp" => "sp",
        _ => return None,
    })
}

/// True when `v` is an 8-bit value rotated right by an even amount.
pub fn arm_imm_encodable(v: u32) -> bool {
    (0..16).any(|r| v.rotate_left(2 * r) <= 0xff)
}

fn condition(cc: &str) -> Option<&'static str> {
    Some(match cc {
        "e" | "z" => "eq",
        "ne" | "nz" => "ne",
        "l" | "nge" => "lt",
        "le" | "ng" => "le",
        "g" | "nle" => "gt",
        "ge" | "nl" => "ge",
        "b" | "c" | "nae" => "lo",
        "be" | "na" => "ls",
        "a" | "nbe" => "hi",
        "ae" | "nc" | "nb" => "hs",
        "s" => "mi",
        "ns" => "pl",
        _ => return None,
    })
}

const SUFFIXED: [&str; 19] = [
    "mov", "add", "sub", "imul", "cmp", "test", "and", "or", "xor", "neg", "not", "sal", "shl", "sar", "shr", "lea",
    "idiv", "div", "push",
];

/// Splits an operand-size suffix: `addl` → (`add`, Some(32)).
fn split_suffix(m: &str) -> (&str, Option<u32>) {
    for base in SUFFIXED.iter().chain(["pop", "inc", "dec"].iter()) {
        if m == *base {
            return (base, None);
        }
        if let Some(s) = m.strip_prefix(base) {
            let w = match s {
                "b" => 8,
                "w" => 16,
                "l" => 32,
                "q" => 64,
                _ => continue,
            };
            return (base, Some(w));
        }
    }
    (m, None)
}

#[derive(Debug, Clone)]
enum Val {
    Reg(&'static str),
    Imm(i64),
    Mem(MemoryRef),
    /// `$sym`: address of a symbol.
    Addr(String),
}

struct Out {
    text: String,
    used_literals: bool,
    /// Register written by a sign extension in the previous instruction.
    sext: Option<&'static str>,
    /// Register whose 64-bit product has its high word in `HIGH`.
    high: Option<&'static str>,
}

impl Out {
    fn ins(&mut self, m: &str, ops: &str) {
        self.text.push('\t');
        self.text.push_str(m);
        if !ops.is_empty() {
            self.text.push('\t');
            self.text.push_str(ops);
        }
        self.text.push('\n');
    }

    fn raw(&mut self, line: &str) {
        self.text.push_str(line);
        self.text.push('\n');
    }

    fn load_imm(&mut self, rd: &str, v: i64) {
        let u = v as u32;
        if arm_imm_encodable(u) {
            self.ins("mov", &format!("{rd}, #{u}"));
        } else if arm_imm_encodable(!u) {
            self.ins("mvn", &format!("{rd}, #{}", !u));
        } else {
            self.used_literals = true;
            self.ins("ldr", &format!("{rd}, ={}", u as i32));
        }
    }

    fn load_addr(&mut self, rd: &str, sym: &str) {
        self.used_literals = true;
        self.ins("ldr", &format!("{rd}, ={sym}"));
    }
}

struct Ctx<'a> {
    out: &'a mut Out,
    mnemonic: &'a str,
    line: usize,
}

impl Ctx<'_> {
    fn unsupported(&self) -> RuleError {
        RuleError::UnsupportedInstruction { mnemonic: self.mnemonic.to_string(), line: self.line }
    }

    fn bad_operand(&self, op: &Operand) -> RuleError {
        RuleError::UnsupportedOperand { mnemonic: self.mnemonic.to_string(), operand: op.text.clone(), line: self.line }
    }

    fn val(&self, op: &Operand) -> Result<Val, RuleError> {
        match &op.kind {
            OperandKind::Register(r) => arm_register(r).map(Val::Reg).ok_or_else(|| self.bad_operand(op)),
            OperandKind::Immediate(v) if op.text.starts_with('$') => Ok(Val::Imm(*v)),
            OperandKind::LabelRef(s) if op.text.starts_with('$') => Ok(Val::Addr(s.clone())),
            OperandKind::LabelRef(s) => Ok(Val::Mem(MemoryRef { symbol: Some(s.clone()), ..Default::default() })),
            OperandKind::Memory(m) if m.segment.is_none() => {
                if m.base.as_deref() == Some("rbp") && m.offset.unwrap_or(0) >= 0 {
                    // stack-passed arguments live above the frame; not mirrored
                    return Err(self.bad_operand(op));
                }
                Ok(Val::Mem(m.clone()))
            }
            _ => Err(self.bad_operand(op)),
        }
    }

    fn reg(&self, op: &Operand) -> Result<&'static str, RuleError> {
        match self.val(op)? {
            Val::Reg(r) => Ok(r),
            _ => Err(self.bad_operand(op)),
        }
    }

    /// Renders an ARM address for `m`, emitting setup into `T_ADDR` when needed.
    /// `narrow` selects the 8-bit offset range of halfword and signed-byte forms.
    fn address(&mut self, m: &MemoryRef, narrow: bool) -> Result<String, RuleError> {
        let limit = if narrow { 255 } else { 4095 };
        let off = m.offset.unwrap_or(0);
        let shift = match m.scale_or_shift.as_deref() {
            None | Some("1") => 0,
            Some("2") => 1,
            Some("4") => 2,
            Some("8") => 3,
            Some(_) => return Err(self.unsupported()),
        };
        let base = match m.base.as_deref() {
            None => None,
            Some("rip") => None,
            Some(b) => Some(arm_register(b).ok_or_else(|| self.unsupported())?),
        };
        let index = match m.index.as_deref() {
            None => None,
            Some(i) => Some(arm_register(i).ok_or_else(|| self.unsupported())?),
        };
        if let Some(sym) = &m.symbol {
            let target = if off != 0 { format!("{sym}+{off}") } else { sym.clone() };
            self.out.load_addr(T_ADDR, &target);
            if let Some(b) = base {
                self.out.ins("add", &format!("{T_ADDR}, {T_ADDR}, {b}"));
            }
            if let Some(i) = index {
                self.out.ins("add", &format!("{T_ADDR}, {T_ADDR}, {i}, lsl #{shift}"));
            }
            return Ok(format!("[{T_ADDR}]"));
        }
        let base = match (base, index) {
            (Some(b), None) => b,
            (Some(b), Some(i)) if off == 0 && !narrow => return Ok(format!("[{b}, {i}, lsl #{shift}]")),
            (Some(b), Some(i)) => {
                self.out.ins("add", &format!("{T_ADDR}, {b}, {i}, lsl #{shift}"));
                T_ADDR
            }
            (None, Some(i)) => {
                self.out.ins("lsl", &format!("{T_ADDR}, {i}, #{shift}"));
                T_ADDR
            }
            (None, None) => {
                self.out.load_imm(T_ADDR, off);
                return Ok(format!("[{T_ADDR}]"));
            }
        };
        if off == 0 {
            Ok(format!("[{base}]"))
        } else if off.abs() <= limit {
            Ok(format!("[{base}, #{off}]"))
        } else {
            self.out.load_imm(T_ADDR, off);
            Ok(format!("[{base}, {T_ADDR}]"))
        }
    }

    fn load(&mut self, width: u32, signed: bool, rd: &str, m: &MemoryRef) -> Result<(), RuleError> {
        let (mn, narrow) = match (width, signed) {
            (8, false) => ("ldrb", false),
            (8, true) => ("ldrsb", true),
            (16, false) => ("ldrh", true),
            (16, true) => ("ldrsh", true),
            _ => ("ldr", false),
        };
        let addr = self.address(m, narrow)?;
        self.out.ins(mn, &format!("{rd}, {addr}"));
        Ok(())
    }

    fn store(&mut self, width: u32, rs: &str, m: &MemoryRef) -> Result<(), RuleError> {
        let (mn, narrow) = match width {
            8 => ("strb", false),
            16 => ("strh", true),
            _ => ("str", false),
        };
        let addr = self.address(m, narrow)?;
        self.out.ins(mn, &format!("{rs}, {addr}"));
        Ok(())
    }

    /// A flexible second operand: register, encodable immediate, or `T_SRC`.
    fn operand2(&mut self, v: &Val, width: u32) -> Result<String, RuleError> {
        Ok(match v {
            Val::Reg(r) => r.to_string(),
            Val::Imm(i) if arm_imm_encodable(*i as u32) => format!("#{}", *i as u32),
            Val::Imm(i) => {
                self.out.load_imm(T_SRC, *i);
                T_SRC.into()
            }
            Val::Mem(m) => {
                self.load(width, width < 32, T_SRC, m)?;
                T_SRC.into()
            }
            Val::Addr(s) => {
                self.out.load_addr(T_SRC, s);
                T_SRC.into()
            }
        })
    }
}

struct FunctionFacts {
    has_call: bool,
    has_push: bool,
    frame: i64,
}

fn function_facts(unit: &AssemblyUnit, start: usize, end: usize) -> FunctionFacts {
    let mut facts = FunctionFacts { has_call: false, has_push: false, frame: 0 };
    for line in &unit.lines[start..=end] {
        let Some(ins) = &line.instruction else { continue };
        let m = ins.mnemonic.as_str();
        if m.starts_with("call") {
            facts.has_call = true;
        }
        if m.starts_with("push") && ins.operands.first().map(|o| o.text.as_str()) != Some("%rbp") {
            facts.has_push = true;
        }
        if (m == "subq" || m == "sub") && ins.operands.get(1).map(|o| o.text.as_str()) == Some("%rsp") {
            facts.has_push = true;
        }
        for op in &ins.operands {
            if let OperandKind::Memory(mem) = &op.kind {
                if mem.base.as_deref() == Some("rbp") {
                    let off = mem.offset.unwrap_or(0);
                    if off < 0 {
                        facts.frame = facts.frame.max(-off);
                    }
                }
            }
        }
    }
    facts.frame = (facts.frame + 7) / 8 * 8;
    facts
}

/// Translates a gcc `-O0` x86-64 unit into ARMv5 assembly text.
pub fn rule_translate(unit: &AssemblyUnit) -> Result<String, RuleError> {
    if unit.isa != IsaName::X86_64 {
        return Err(RuleError::NotX86(unit.isa));
    }
    let starts: BTreeSet<usize> = unit.functions.iter().map(|f| f.start_line).collect();
    let ends: BTreeSet<usize> = unit.functions.iter().map(|f| f.end_line).collect();
    let mut out = Out { text: String::from("\t.syntax unified\n\t.arm\n"), used_literals: false, sext: None, high: None };
    let mut skipping_section = false;

    for (idx, line) in unit.lines.iter().enumerate() {
        let lineno = idx + 1;
        // flush the literal pool before a function's closing `.size`
        if ends.contains(&idx) && out.used_literals && line.directive_name() == Some(".size") {
            out.ins(".ltorg", "");
            out.used_literals = false;
        }
        match line.kind {
            LineKind::Blank | LineKind::Comment => continue,
            LineKind::Directive => {
                let name = line.directive_name().unwrap_or("");
                if name == ".section" || name == ".text" || name == ".data" || name == ".bss" {
                    skipping_section = line.text_normalized.contains(".note.gnu.property");
                }
                if skipping_section {
                    continue;
                }
                if let Some(l) = translate_directive(&line.text_normalized, name) {
                    out.raw(&l);
                }
                continue;
            }
            LineKind::Label | LineKind::Instruction => {}
        }
        if skipping_section {
            continue;
        }
        if let Some(label) = &line.label {
            out.raw(&format!("{label}:"));
            if starts.contains(&idx) {
                let span = unit.functions.iter().find(|f| f.start_line == idx).expect("span for start");
                let facts = function_facts(unit, span.start_line, span.end_line);
                out.ins("push", SAVED);
                out.ins("mov", "fp, sp");
                if !facts.has_call && !facts.has_push && facts.frame > 0 {
                    let frame = facts.frame;
                    if arm_imm_encodable(frame as u32) {
                        out.ins("sub", &format!("sp, sp, #{frame}"));
                    } else {
                        out.load_imm(T_SRC, frame);
                        out.ins("sub", &format!("sp, sp, {T_SRC}"));
                    }
                }
                out.ins("mov", "ip, r0");
                out.ins("mov", "lr, r1");
                out.ins("mov", "r1, r3");
                out.ins("mov", "r3, lr");
            }
        }
        if let Some(ins) = &line.instruction {
            let prev = (out.sext.take(), out.high.take());
            let mut cx = Ctx { out: &mut out, mnemonic: &ins.mnemonic, line: lineno };
            translate_instruction(&mut cx, ins, prev)?;
        }
    }
    if out.used_literals {
        out.ins(".ltorg", "");
    }
    Ok(out.text)
}

fn translate_directive(text: &str, name: &str) -> Option<String> {
    if name == ".file" || name == ".ident" || name.starts_with(".cfi_") || name == ".addrsig" {
        return None;
    }
    let mut t = String::from("\t");
    match name {
        ".type" => t.push_str(&text.replace("@function", "%function").replace("@object", "%object")),
        ".section" => t.push_str(&text.replace(",@", ",%")),
        ".align" => t.push_str(&text.replacen(".align", ".balign", 1)),
        ".value" => t.push_str(&text.replacen(".value", ".short", 1)),
        _ => t.push_str(text),
    }
    Some(t)
}

/// `prev` carries the sign-extension and high-word state left by the previous instruction.
fn translate_instruction(
    cx: &mut Ctx<'_>,
    ins: &Instruction,
    prev: (Option<&'static str>, Option<&'static str>),
) -> Result<(), RuleError> {
    let (prev_sext, prev_high) = prev;
    if ins.prefix.is_some() {
        return Err(cx.unsupported());
    }
    let m = ins.mnemonic.as_str();
    let ops = &ins.operands;

    // control flow and frame management
    match m {
        "endbr64" => return Ok(()),
        "nop" | "nopl" | "nopw" => {
            cx.out.ins("nop", "");
            return Ok(());
        }
        "ret" | "retq" => {
            cx.out.ins("mov", "sp, fp");
            cx.out.ins("pop", RESTORE);
            return Ok(());
        }
        "leave" | "leaveq" => return Ok(()),
        "call" | "callq" => {
            let target = match ops.as_slice() {
                [op] if !op.text.starts_with('*') => match &op.kind {
                    OperandKind::LabelRef(s) => s.trim_end_matches("@PLT").to_string(),
                    _ => return Err(cx.bad_operand(op)),
                },
                _ => return Err(cx.unsupported()),
            };
            cx.out.ins("mov", "r0, ip");
            cx.out.ins("mov", "lr, r1");
            cx.out.ins("mov", "r1, r3");
            cx.out.ins("mov", "r3, lr");
            cx.out.ins("bl", &target);
            return Ok(());
        }
        "cltq" | "cdqe" => {
            cx.out.sext = Some("r0");
            return Ok(());
        }
        "cqto" => return Ok(()),
        "cltd" | "cdq" => {
            cx.out.ins("asr", "r2, r0, #31");
            return Ok(());
        }
        "cwtl" => {
            cx.out.ins("lsl", "r0, r0, #16");
            cx.out.ins("asr", "r0, r0, #16");
            return Ok(());
        }
        _ => {}
    }
    if let Some(cc) = m.strip_prefix('j') {
        let target = match ops.as_slice() {
            [op] => match &op.kind {
                OperandKind::LabelRef(s) if !op.text.starts_with('*') => s.clone(),
                _ => return Err(cx.bad_operand(op)),
            },
            _ => return Err(cx.unsupported()),
        };
        let mn = if cc == "mp" {
            String::from("b")
        } else {
            format!("b{}", condition(cc).ok_or_else(|| cx.unsupported())?)
        };
        cx.out.ins(&mn, &target);
        return Ok(());
    }
    if let Some(cc) = m.strip_prefix("set") {
        let cond = condition(cc).ok_or_else(|| cx.unsupported())?;
        let [op] = ops.as_slice() else { return Err(cx.unsupported()) };
        match cx.val(op)? {
            Val::Reg(r) => {
                cx.out.ins("bic", &format!("{r}, {r}, #255"));
                cx.out.ins(&format!("orr{cond}"), &format!("{r}, {r}, #1"));
            }
            Val::Mem(mem) => {
                cx.out.ins("mov", &format!("{T_DST}, #0"));
                cx.out.ins(&format!("mov{cond}"), &format!("{T_DST}, #1"));
                cx.store(8, T_DST, &mem)?;
            }
            _ => return Err(cx.bad_operand(op)),
        }
        return Ok(());
    }

    // zero/sign extension
    let ext = match m {
        "movzbl" | "movzbw" | "movzbq" => Some((8, false)),
        "movzwl" | "movzwq" => Some((16, false)),
        "movsbl" | "movsbw" | "movsbq" => Some((8, true)),
        "movswl" | "movswq" => Some((16, true)),
        "movslq" | "movsl" => Some((32, true)),
        _ => None,
    };
    if let Some((width, signed)) = ext {
        let [src, dst] = ops.as_slice() else { return Err(cx.unsupported()) };
        let d = cx.reg(dst)?;
        match cx.val(src)? {
            Val::Mem(mem) => cx.load(width, signed, d, &mem)?,
            Val::Reg(s) => match (width, signed) {
                (32, _) => {
                    if s != d {
                        cx.out.ins("mov", &format!("{d}, {s}"));
                    }
                    if signed {
                        cx.out.sext = Some(d);
                    }
                }
                (8, false) => cx.out.ins("and", &format!("{d}, {s}, #255")),
                (bits, signed) => {
                    let sh = 32 - bits;
                    cx.out.ins("lsl", &format!("{d}, {s}, #{sh}"));
                    cx.out.ins(if signed { "asr" } else { "lsr" }, &format!("{d}, {d}, #{sh}"));
                }
            },
            _ => return Err(cx.bad_operand(src)),
        }
        return Ok(());
    }

    let (base, width) = split_suffix(m);
    let w = width.unwrap_or(32);
    match base {
        "mov" => {
            let [src, dst] = ops.as_slice() else { return Err(cx.unsupported()) };
            match (cx.val(src)?, cx.val(dst)?) {
                (Val::Reg("sp"), Val::Reg("fp")) => {}
                (Val::Reg(s), Val::Reg(d)) if w >= 32 => {
                    if s != d {
                        cx.out.ins("mov", &format!("{d}, {s}"));
                    }
                }
                (Val::Imm(v), Val::Reg(d)) if w >= 32 => cx.out.load_imm(d, v),
                (Val::Addr(s), Val::Reg(d)) if w >= 32 => cx.out.load_addr(d, &s),
                (Val::Mem(mem), Val::Reg(d)) => cx.load(w, false, d, &mem)?,
                (Val::Reg(s), Val::Mem(mem)) => cx.store(w, s, &mem)?,
                (Val::Imm(v), Val::Mem(mem)) => {
                    cx.out.load_imm(T_SRC, v);
                    cx.store(w, T_SRC, &mem)?;
                }
                (Val::Addr(s), Val::Mem(mem)) => {
                    cx.out.load_addr(T_SRC, &s);
                    cx.store(w, T_SRC, &mem)?;
                }
                _ => return Err(cx.unsupported()),
            }
        }
        "add" | "sub" | "and" | "or" | "xor" => {
            let arm = match base {
                "add" => "adds",
                "sub" => "subs",
                "and" => "ands",
                "or" => "orrs",
                _ => "eors",
            };
            let [src, dst] = ops.as_slice() else { return Err(cx.unsupported()) };
            let (s, d) = (cx.val(src)?, cx.val(dst)?);
            if d.is_sp() {
                let op2 = cx.operand2(&s, 32)?;
                cx.out.ins(if base == "add" { "add" } else if base == "sub" { "sub" } else { return Err(cx.unsupported()) }, &format!("sp, sp, {op2}"));
                return Ok(());
            }
            if w < 32 {
                return Err(cx.unsupported());
            }
            // flip add/sub so negative immediates stay encodable
            let (arm, s) = match (base, &s) {
                ("add" | "sub", Val::Imm(v)) if !arm_imm_encodable(*v as u32) && arm_imm_encodable(v.wrapping_neg() as u32) => {
                    (if base == "add" { "subs" } else { "adds" }, Val::Imm(v.wrapping_neg()))
                }
                _ => (arm, s),
            };
            match d {
                Val::Reg(d) => {
                    let op2 = cx.operand2(&s, w)?;
                    cx.out.ins(arm, &format!("{d}, {d}, {op2}"));
                }
                Val::Mem(mem) => {
                    let op2 = cx.operand2(&s, w)?;
                    cx.load(w, false, T_DST, &mem)?;
                    cx.out.ins(arm, &format!("{T_DST}, {T_DST}, {op2}"));
                    cx.store(w, T_DST, &mem)?;
                }
                _ => return Err(cx.bad_operand(dst)),
            }
        }
        "inc" | "dec" => {
            let [dst] = ops.as_slice() else { return Err(cx.unsupported()) };
            let arm = if base == "inc" { "adds" } else { "subs" };
            match cx.val(dst)? {
                Val::Reg(d) => cx.out.ins(arm, &format!("{d}, {d}, #1")),
                Val::Mem(mem) if w >= 32 => {
                    cx.load(w, false, T_DST, &mem)?;
                    cx.out.ins(arm, &format!("{T_DST}, {T_DST}, #1"));
                    cx.store(w, T_DST, &mem)?;
                }
                _ => return Err(cx.bad_operand(dst)),
            }
        }
        "neg" | "not" => {
            let [dst] = ops.as_slice() else { return Err(cx.unsupported()) };
            let emit = |cx: &mut Ctx<'_>, r: &str| {
                if base == "neg" {
                    cx.out.ins("rsbs", &format!("{r}, {r}, #0"));
                } else {
                    cx.out.ins("mvn", &format!("{r}, {r}"));
                }
            };
            match cx.val(dst)? {
                Val::Reg(d) if w >= 32 => emit(cx, d),
                Val::Mem(mem) if w >= 32 => {
                    cx.load(w, false, T_DST, &mem)?;
                    emit(cx, T_DST);
                    cx.store(w, T_DST, &mem)?;
                }
                _ => return Err(cx.bad_operand(dst)),
            }
        }
        "imul" => match ops.as_slice() {
            [src, dst] => {
                let d = cx.reg(dst)?;
                match cx.val(src)? {
                    Val::Reg(s) if s != d && w == 64 => {
                        let signed = prev_sext == Some(s) || prev_sext == Some(d);
                        cx.out.ins(if signed { "smull" } else { "umull" }, &format!("{T_SRC}, {HIGH}, {s}, {d}"));
                        cx.out.ins("mov", &format!("{d}, {T_SRC}"));
                        cx.out.high = Some(d);
                    }
                    Val::Reg(s) if s != d => cx.out.ins("mul", &format!("{d}, {s}, {d}")),
                    Val::Reg(s) => {
                        cx.out.ins("mov", &format!("{T_SRC}, {s}"));
                        cx.out.ins("mul", &format!("{d}, {T_SRC}, {d}"));
                    }
                    Val::Mem(mem) => {
                        cx.load(32, false, T_SRC, &mem)?;
                        cx.out.ins("mul", &format!("{d}, {T_SRC}, {d}"));
                    }
                    Val::Imm(v) => {
                        cx.out.load_imm(T_SRC, v);
                        cx.out.ins("mul", &format!("{d}, {T_SRC}, {d}"));
                    }
                    Val::Addr(_) => return Err(cx.bad_operand(src)),
                }
            }
            [imm, src, dst] => {
                let d = cx.reg(dst)?;
                let Val::Imm(v) = cx.val(imm)? else { return Err(cx.bad_operand(imm)) };
                cx.out.load_imm(T_SRC, v);
                let s = match cx.val(src)? {
                    Val::Reg(s) => s,
                    Val::Mem(mem) => {
                        cx.load(32, false, T_DST, &mem)?;
                        T_DST
                    }
                    _ => return Err(cx.bad_operand(src)),
                };
                if w == 64 {
                    // gcc's division by a constant: keep the high word for the `shrq $32` that follows
                    let signed = v < 0 || prev_sext == Some(s);
                    // ARMv5 wants RdLo distinct from Rm
                    let lo = if s == d { T_DST } else { d };
                    cx.out.ins(if signed { "smull" } else { "umull" }, &format!("{lo}, {HIGH}, {s}, {T_SRC}"));
                    if lo != d {
                        cx.out.ins("mov", &format!("{d}, {lo}"));
                    }
                    cx.out.high = Some(d);
                } else {
                    cx.out.ins("mul", &format!("{d}, {T_SRC}, {s}"));
                }
            }
            _ => return Err(cx.unsupported()),
        },
        "cmp" | "test" => {
            let [a, b] = ops.as_slice() else { return Err(cx.unsupported()) };
            let (va, vb) = (cx.val(a)?, cx.val(b)?);
            let signed_narrow = w < 32;
            let lhs = match &vb {
                Val::Reg(r) if !signed_narrow => *r,
                Val::Mem(mem) => {
                    cx.load(w, signed_narrow, T_DST, mem)?;
                    T_DST
                }
                _ => return Err(cx.bad_operand(b)),
            };
            let va = match va {
                Val::Imm(v) if w == 8 => Val::Imm(v as i8 as i64),
                Val::Imm(v) if w == 16 => Val::Imm(v as i16 as i64),
                Val::Reg(_) if signed_narrow => return Err(cx.bad_operand(a)),
                other => other,
            };
            if base == "cmp" {
                match va {
                    Val::Imm(v) if !arm_imm_encodable(v as u32) && arm_imm_encodable(v.wrapping_neg() as u32) => {
                        cx.out.ins("cmn", &format!("{lhs}, #{}", v.wrapping_neg() as u32));
                    }
                    other => {
                        let op2 = cx.operand2(&other, w)?;
                        cx.out.ins("cmp", &format!("{lhs}, {op2}"));
                    }
                }
            } else {
                match va {
                    Val::Reg(r) if r == lhs => cx.out.ins("cmp", &format!("{lhs}, #0")),
                    other => {
                        let op2 = cx.operand2(&other, w)?;
                        cx.out.ins("and", &format!("{T_SRC}, {lhs}, {op2}"));
                        cx.out.ins("cmp", &format!("{T_SRC}, #0"));
                    }
                }
            }
        }
        "sal" | "shl" | "sar" | "shr" => {
            let arm = match base {
                "sar" => "asr",
                "shr" => "lsr",
                _ => "lsl",
            };
            let (count, dst) = match ops.as_slice() {
                [dst] => (Val::Imm(1), dst),
                [count, dst] => (cx.val(count)?, dst),
                _ => return Err(cx.unsupported()),
            };
            if w < 32 {
                return Err(cx.unsupported());
            }
            let (d, mem) = match cx.val(dst)? {
                Val::Reg(d) => (d, None),
                Val::Mem(mem) => {
                    cx.load(32, false, T_DST, &mem)?;
                    (T_DST, Some(mem))
                }
                _ => return Err(cx.bad_operand(dst)),
            };
            match count {
                Val::Imm(n) if w == 64 && n & 63 >= 32 => {
                    if mem.is_some() || prev_high != Some(d) || base == "sal" || base == "shl" {
                        return Err(cx.unsupported());
                    }
                    match (n & 63) - 32 {
                        0 => cx.out.ins("mov", &format!("{d}, {HIGH}")),
                        k => cx.out.ins(arm, &format!("{d}, {HIGH}, #{k}")),
                    }
                }
                Val::Imm(n) => {
                    let n = n & 31;
                    if n != 0 {
                        cx.out.ins(arm, &format!("{d}, {d}, #{n}"));
                    }
                }
                Val::Reg("r1") => {
                    cx.out.ins("and", &format!("{T_SRC}, r1, #31"));
                    cx.out.ins(arm, &format!("{d}, {d}, {T_SRC}"));
                }
                _ => return Err(cx.unsupported()),
            }
            if let Some(mem) = mem {
                cx.store(32, T_DST, &mem)?;
            }
        }
        "lea" => {
            let [src, dst] = ops.as_slice() else { return Err(cx.unsupported()) };
            let d = cx.reg(dst)?;
            let Val::Mem(mem) = cx.val(src)? else { return Err(cx.bad_operand(src)) };
            lea(cx, d, &mem)?;
        }
        "idiv" | "div" => {
            let [src] = ops.as_slice() else { return Err(cx.unsupported()) };
            if w < 32 {
                return Err(cx.unsupported());
            }
            let helper = if base == "idiv" { "__aeabi_idivmod" } else { "__aeabi_uidivmod" };
            let divisor = cx.val(src)?;
            cx.out.ins("push", "{r1, r3, ip, lr}");
            match divisor {
                Val::Reg("r1") => {}
                Val::Reg(s) if s != "r0" && s != "r2" => cx.out.ins("mov", &format!("r1, {s}")),
                Val::Mem(mut mem) => {
                    if mem.base.as_deref() == Some("rsp") {
                        mem.offset = Some(mem.offset.unwrap_or(0) + 16);
                    }
                    cx.load(32, false, "r1", &mem)?;
                }
                _ => return Err(cx.bad_operand(src)),
            }
            cx.out.ins("bl", helper);
            cx.out.ins("mov", "r2, r1");
            cx.out.ins("pop", "{r1, r3, ip, lr}");
        }
        "push" => {
            let [src] = ops.as_slice() else { return Err(cx.unsupported()) };
            match cx.val(src)? {
                Val::Reg("fp") => {}
                Val::Reg(r) => cx.out.ins("str", &format!("{r}, [sp, #-8]!")),
                Val::Imm(v) => {
                    cx.out.load_imm(T_SRC, v);
                    cx.out.ins("str", &format!("{T_SRC}, [sp, #-8]!"));
                }
                _ => return Err(cx.bad_operand(src)),
            }
        }
        "pop" => {
            let [dst] = ops.as_slice() else { return Err(cx.unsupported()) };
            match cx.val(dst)? {
                Val::Reg("fp") => {}
                Val::Reg(r) => cx.out.ins("ldr", &format!("{r}, [sp], #8")),
                _ => return Err(cx.bad_operand(dst)),
            }
        }
        _ => return Err(cx.unsupported()),
    }
    Ok(())
}

fn lea(cx: &mut Ctx<'_>, d: &str, mem: &MemoryRef) -> Result<(), RuleError> {
    if let Some(sym) = &mem.symbol {
        if mem.index.is_some() || !matches!(mem.base.as_deref(), None | Some("rip")) {
            return Err(cx.unsupported());
        }
        let off = mem.offset.unwrap_or(0);
        let target = if off != 0 { format!("{sym}+{off}") } else { sym.clone() };
        cx.out.load_addr(d, &target);
        return Ok(());
    }
    let shift = match mem.scale_or_shift.as_deref() {
        None | Some("1") => 0,
        Some("2") => 1,
        Some("4") => 2,
        Some("8") => 3,
        _ => return Err(cx.unsupported()),
    };
    let base = mem.base.as_deref().map(|b| arm_register(b).ok_or_else(|| cx.unsupported())).transpose()?;
    let index = mem.index.as_deref().map(|i| arm_register(i).ok_or_else(|| cx.unsupported())).transpose()?;
    let off = mem.offset.unwrap_or(0);
    let start = match (base, index) {
        (Some(b), Some(i)) => {
            cx.out.ins("add", &format!("{d}, {b}, {i}, lsl #{shift}"));
            d
        }
        (None, Some(i)) => {
            cx.out.ins("lsl", &format!("{d}, {i}, #{shift}"));
            d
        }
        (Some(b), None) => b,
        (None, None) => {
            cx.out.load_imm(d, off);
            return Ok(());
        }
    };
    if off == 0 {
        if start != d {
            cx.out.ins("mov", &format!("{d}, {start}"));
        }
    } else if arm_imm_encodable(off as u32) {
        cx.out.ins("add", &format!("{d}, {start}, #{off}"));
    } else if arm_imm_encodable(off.wrapping_neg() as u32) {
        cx.out.ins("sub", &format!("{d}, {start}, #{}", off.wrapping_neg()));
    } else {
        cx.out.load_imm(T_SRC, off);
        cx.out.ins("add", &format!("{d}, {start}, {T_SRC}"));
    }
    Ok(())
}

impl Val {
    fn is_sp(&self) -> bool {
        matches!(self, Val::Reg("sp"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asmtext::parse_assembly;
    use alloc::vec::Vec;

    fn x86(body: &str) -> AssemblyUnit {
        parse_assembly(body, &IsaName::X86_64.isa(), "t")
    }

    fn body_of(text: &str) -> Vec<String> {
        text.lines().map(|l| crate::asmtext::canonical_whitespace(l)).collect()
    }

    #[test]
    fn add_register_template() {
        let out = rule_translate(&x86("\taddl\t%ebx, %eax\n")).unwrap();
        assert!(body_of(&out).contains(&"adds r0, r0, r4".to_string()), "{out}");
    }

    #[test]
    fn ret_template() {
        let out = rule_translate(&x86("\tret\n")).unwrap();
        let lines = body_of(&out);
        assert!(lines.contains(&"pop {r4, r5, r6, r7, fp, pc}".to_string()), "{out}");
    }

    #[test]
    fn const_ret_function() {
        let src = "\t.text\n\t.globl\tconst_ret\n\t.type\tconst_ret, @function\nconst_ret:\n\tpushq\t%rbp\n\tmovq\t%rsp, %rbp\n\tmovl\t$5, %eax\n\tpopq\t%rbp\n\tret\n\t.size\tconst_ret, .-const_ret\n";
        let out = rule_translate(&x86(src)).unwrap();
        let lines = body_of(&out);
        assert!(lines.contains(&"mov r0, #5".to_string()), "{out}");
        assert!(lines.contains(&".type const_ret, %function".to_string()));
        assert!(lines.contains(&"push {r4, r5, r6, r7, fp, lr}".to_string()));
        let arm = parse_assembly(&out, &IsaName::Armv5.isa(), "o");
        assert_eq!(arm.fallback_lines, 0);
        assert_eq!(arm.functions.len(), 1);
    }

    #[test]
    fn outside_subset() {
        let err = rule_translate(&x86("f:\n\tcvtsi2sd\t%eax, %xmm0\n")).unwrap_err();
        assert_eq!(err, RuleError::UnsupportedInstruction { mnemonic: "cvtsi2sd".into(), line: 2 });
        assert!(matches!(
            rule_translate(&x86("\tmovl\t%r8d, %eax\n")),
            Err(RuleError::UnsupportedOperand { .. })
        ));
        assert!(matches!(rule_translate(&parse_assembly("", &IsaName::Armv5.isa(), "a")), Err(RuleError::NotX86(_))));
    }

    #[test]
    fn immediates() {
        assert!(arm_imm_encodable(255));
        assert!(arm_imm_encodable(0xff00_0000));
        assert!(arm_imm_encodable(0xf000_000f));
        assert!(!arm_imm_encodable(257));
        let out = rule_translate(&x86("\tmovl\t$-1, %eax\n\tmovl\t$100000, %ecx\n\taddl\t$-4, %edx\n")).unwrap();
        let lines = body_of(&out);
        assert!(lines.contains(&"mvn r0, #0".to_string()));
        assert!(lines.contains(&"ldr r1, =100000".to_string()));
        assert!(lines.contains(&"subs r2, r2, #4".to_string()));
        assert!(lines.contains(&".ltorg".to_string()));
    }

    #[test]
    fn memory_and_compare() {
        let out = rule_translate(&x86("\tsubl\t$1, -20(%rbp)\n\tcmpl\t$1, -20(%rbp)\n\tjg\t.L5\n\tcmpl\t-8(%rbp), %eax\n")).unwrap();
        let lines = body_of(&out);
        for want in [
            "ldr r6, [fp, #-20]",
            "subs r6, r6, #1",
            "str r6, [fp, #-20]",
            "cmp r6, #1",
            "bgt .L5",
            "ldr lr, [fp, #-8]",
            "cmp r0, lr",
        ] {
            assert!(lines.contains(&want.to_string()), "missing {want:?} in\n{out}");
        }
    }

    #[test]
    fn imul_respects_rd_rm_rule() {
        let out = rule_translate(&x86("\timull\t%eax, %eax\n\timull\t%edx, %eax\n")).unwrap();
        let lines = body_of(&out);
        assert!(lines.contains(&"mov lr, r0".to_string()));
        assert!(lines.contains(&"mul r0, lr, r0".to_string()));
        assert!(lines.contains(&"mul r0, r2, r0".to_string()));
    }

    #[test]
    fn division_by_constant_keeps_the_high_word() {
        let signed = "\tmovslq\t%eax, %rdx\n\timulq\t$1717986919, %rdx, %rdx\n\tshrq\t$32, %rdx\n";
        let lines = body_of(&rule_translate(&x86(signed)).unwrap());
        assert!(lines.contains(&"smull r6, r7, r2, lr".to_string()), "{lines:?}");
        assert!(lines.contains(&"mov r2, r7".to_string()), "{lines:?}");

        let unsigned = "\tmovl\t%eax, %edx\n\tmovl\t$3435973837, %eax\n\timulq\t%rdx, %rax\n\tshrq\t$35, %rax\n";
        let lines = body_of(&rule_translate(&x86(unsigned)).unwrap());
        assert!(lines.contains(&"umull lr, r7, r2, r0".to_string()), "{lines:?}");
        assert!(lines.contains(&"lsr r0, r7, #3".to_string()), "{lines:?}");
    }

    #[test]
    fn wide_shift_without_a_product_is_refused() {
        assert!(matches!(
            rule_translate(&x86("	shrq	$32, %rax
")),
            Err(RuleError::UnsupportedInstruction { .. })
        ));
        assert!(matches!(
            rule_translate(&x86("	imulq	$3, %rax, %rax
	addl	$1, %eax
	shrq	$32, %rax
")),
            Err(RuleError::UnsupportedInstruction { .. })
        ));
    }

    #[test]
    fn setcc_and_extend() {
        let out = rule_translate(&x86("\tcmpl\t%edx, %eax\n\tsetl\t%al\n\tmovzbl\t%al, %eax\n")).unwrap();
        let lines = body_of(&out);
        assert!(lines.contains(&"orrlt r0, r0, #1".to_string()));
        assert!(lines.contains(&"and r0, r0, #255".to_string()));
    }

    #[test]
    fn suffixes() {
        assert_eq!(split_suffix("addl"), ("add", Some(32)));
        assert_eq!(split_suffix("orq"), ("or", Some(64)));
        assert_eq!(split_suffix("movb"), ("mov", Some(8)));
        assert_eq!(split_suffix("shrl"), ("shr", Some(32)));
        assert_eq!(split_suffix("popq"), ("pop", Some(64)));
        assert_eq!(split_suffix("cvtsi2sd"), ("cvtsi2sd", None));
    }
}
