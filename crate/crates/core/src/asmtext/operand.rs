use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{canonical_whitespace, is_symbol_char};
use crate::isa::{Isa, IsaName, SyntaxFamily};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operand {
    /// Source text with whitespace canonicalized.
    pub text: String,
    pub kind: OperandKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperandKind {
    Register(String),
    Immediate(i64),
    Memory(MemoryRef),
    LabelRef(String),
    RegisterList(Vec<String>),
    Shift { op: String, by: Option<ShiftBy> },
    /// AArch64 condition operand (`csel w0, w1, w2, lt`).
    Condition(String),
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftBy {
    Immediate(i64),
    Register(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryRef {
    pub base: Option<String>,
    pub offset: Option<i64>,
    pub index: Option<String>,
    /// x86 scale factor, or ARM index shift such as `lsl #2`.
    pub scale_or_shift: Option<String>,
    pub symbol: Option<String>,
    pub segment: Option<String>,
    pub writeback: bool,
    pub subtract_index: bool,
}

impl Operand {
    pub fn parse(text: &str, isa: &Isa) -> Operand {
        let text = canonical_whitespace(text.trim());
        let kind = match isa.syntax_family {
            SyntaxFamily::Att => parse_att(&text, isa),
            SyntaxFamily::ArmUal => parse_arm(&text, isa),
            SyntaxFamily::RiscvStd => parse_riscv(&text, isa),
        };
        Operand { text, kind }
    }

    /// Symbol this operand references, if any.
    pub fn symbol(&self) -> Option<&str> {
        match &self.kind {
            OperandKind::LabelRef(s) => Some(s),
            OperandKind::Memory(m) => m.symbol.as_deref(),
            _ => None,
        }
    }

    /// Every register named by this operand, including address registers.
    pub fn registers(&self) -> Vec<&str> {
        match &self.kind {
            OperandKind::Register(r) => alloc::vec![r.as_str()],
            OperandKind::RegisterList(rs) => rs.iter().map(String::as_str).collect(),
            OperandKind::Memory(m) => m.base.iter().chain(m.index.iter()).map(String::as_str).collect(),
            OperandKind::Shift { by: Some(ShiftBy::Register(r)), .. } => alloc::vec![r.as_str()],
            _ => Vec::new(),
        }
    }
}

/// Splits an operand list at top-level commas.
pub fn split_operands(s: &str) -> Vec<String> {
    let s = s.trim();
    if s.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut in_string = false;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '"' => in_string = !in_string,
            '[' | '(' | '{' if !in_string => depth += 1,
            ']' | ')' | '}' if !in_string => depth -= 1,
            ',' if !in_string && depth == 0 => {
                out.push(s[start..i].trim().to_owned());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim().to_owned());
    out
}

pub(crate) fn parse_int(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() {
        return None;
    }
    let magnitude: i128 = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i128::from_str_radix(hex, 16).ok()?
    } else if let Some(bin) = body.strip_prefix("0b") {
        i128::from_str_radix(bin, 2).ok()?
    } else if body.bytes().all(|b| b.is_ascii_digit()) {
        body.parse::<i128>().ok()?
    } else {
        return None;
    };
    let v = if neg { -magnitude } else { magnitude };
    i64::try_from(v).ok().or_else(|| u64::try_from(v).ok().map(|u| u as i64))
}

fn is_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || matches!(c, '_' | '.' | '$') => {}
        _ => return false,
    }
    chars.all(|c| is_symbol_char(c) || c == '@')
}

/// `sym`, `sym@PLT`, `sym+8`, `.Lend-f` → the leading symbol without relocation suffix.
fn symbol_expr(s: &str) -> Option<String> {
    let s = s.trim();
    let end = s[1.min(s.len())..].find(['+', '-']).map(|i| i + 1).unwrap_or(s.len());
    let (head, tail) = s.split_at(end);
    if !is_symbol(head) {
        return None;
    }
    if !tail.is_empty() {
        let rest = &tail[1..];
        let ok = rest
            .split(['+', '-'])
            .all(|part| parse_int(part).is_some() || symbol_expr(part).is_some());
        if !ok {
            return None;
        }
    }
    let head = head.split('@').next().unwrap_or(head);
    Some(head.to_owned())
}

// ---- AT&T (x86-64) ----

fn att_register(s: &str, isa: &Isa) -> Option<String> {
    let name = s.strip_prefix('%')?;
    isa.is_register(name).then(|| name.to_ascii_lowercase())
}

fn parse_att(text: &str, isa: &Isa) -> OperandKind {
    let text = text.strip_prefix('*').unwrap_or(text);
    if let Some(imm) = text.strip_prefix('$') {
        if let Some(v) = parse_int(imm) {
            return OperandKind::Immediate(v);
        }
        return symbol_expr(imm).map(OperandKind::LabelRef).unwrap_or(OperandKind::Other);
    }
    if let Some(open) = text.find('(') {
        return parse_att_memory(text, open, isa).map(OperandKind::Memory).unwrap_or(OperandKind::Other);
    }
    if text.starts_with('%') {
        if let Some((seg, disp)) = text.split_once(':') {
            if let (Some(seg), Some(off)) = (att_register(seg, isa), parse_int(disp)) {
                return OperandKind::Memory(MemoryRef { segment: Some(seg), offset: Some(off), ..Default::default() });
            }
            return OperandKind::Other;
        }
        return att_register(text, isa).map(OperandKind::Register).unwrap_or(OperandKind::Other);
    }
    if let Some(v) = parse_int(text) {
        return OperandKind::Memory(MemoryRef { offset: Some(v), ..Default::default() });
    }
    symbol_expr(text).map(OperandKind::LabelRef).unwrap_or(OperandKind::Other)
}

fn parse_att_memory(text: &str, open: usize, isa: &Isa) -> Option<MemoryRef> {
    let close = text.rfind(')')?;
    if close != text.len() - 1 {
        return None;
    }
    let mut mem = MemoryRef::default();
    let mut disp = &text[..open];
    if let Some((seg, rest)) = disp.split_once(':') {
        mem.segment = Some(att_register(seg, isa)?);
        disp = rest;
    }
    if !disp.is_empty() {
        if let Some(v) = parse_int(disp) {
            mem.offset = Some(v);
        } else {
            mem.symbol = Some(symbol_expr(disp)?);
        }
    }
    let inner: Vec<&str> = text[open + 1..close].split(',').map(str::trim).collect();
    match inner.as_slice() {
        [base] => mem.base = opt_att_reg(base, isa)?,
        [base, index] => {
            mem.base = opt_att_reg(base, isa)?;
            mem.index = Some(att_register(index, isa)?);
        }
        [base, index, scale] => {
            mem.base = opt_att_reg(base, isa)?;
            mem.index = Some(att_register(index, isa)?);
            parse_int(scale)?;
            mem.scale_or_shift = Some((*scale).to_owned());
        }
        _ => return None,
    }
    Some(mem)
}

fn opt_att_reg(s: &str, isa: &Isa) -> Option<Option<String>> {
    if s.is_empty() {
        Some(None)
    } else {
        att_register(s, isa).map(Some)
    }
}

// ---- ARM unified syntax (ARMv5 and AArch64) ----

const SHIFT_OPS: [&str; 14] = [
    "lsl", "lsr", "asr", "ror", "rrx", "msl", "sxtw", "uxtw", "sxtx", "uxtx", "sxtb", "uxtb", "sxth", "uxth",
];

const A64_CONDITIONS: [&str; 18] = [
    "eq", "ne", "cs", "cc", "hs", "lo", "mi", "pl", "vs", "vc", "hi", "ls", "ge", "lt", "gt", "le", "al", "nv",
];

fn arm_register(s: &str, isa: &Isa) -> Option<String> {
    isa.is_register(s).then(|| s.to_ascii_lowercase())
}

fn arm_immediate(body: &str) -> Option<OperandKind> {
    if let Some(v) = parse_int(body) {
        return Some(OperandKind::Immediate(v));
    }
    // `:lower16:sym`, `:lo12:sym`
    if let Some(rest) = body.strip_prefix(':') {
        let (_, sym) = rest.split_once(':')?;
        return symbol_expr(sym).map(OperandKind::LabelRef);
    }
    symbol_expr(body).map(OperandKind::LabelRef)
}

fn parse_shift(text: &str, isa: &Isa) -> Option<OperandKind> {
    let lower = text.to_ascii_lowercase();
    let (op, rest) = match lower.split_once(' ') {
        Some((op, rest)) => (op, rest.trim()),
        None => (lower.as_str(), ""),
    };
    if !SHIFT_OPS.contains(&op) {
        return None;
    }
    let by = if rest.is_empty() {
        None
    } else if let Some(imm) = rest.strip_prefix('#') {
        Some(ShiftBy::Immediate(parse_int(imm)?))
    } else {
        Some(ShiftBy::Register(arm_register(rest, isa)?))
    };
    Some(OperandKind::Shift { op: op.to_owned(), by })
}

fn parse_arm(text: &str, isa: &Isa) -> OperandKind {
    if let Some(body) = text.strip_prefix('#') {
        return arm_immediate(body).unwrap_or(OperandKind::Other);
    }
    if let Some(body) = text.strip_prefix('=') {
        return arm_immediate(body).unwrap_or(OperandKind::Other);
    }
    if text.starts_with('[') {
        return parse_arm_memory(text, isa).map(OperandKind::Memory).unwrap_or(OperandKind::Other);
    }
    if text.starts_with('{') {
        return parse_register_list(text, isa).map(OperandKind::RegisterList).unwrap_or(OperandKind::Other);
    }
    if let Some(shift) = parse_shift(text, isa) {
        return shift;
    }
    let bare = text.strip_suffix('!').unwrap_or(text);
    if let Some(r) = arm_register(bare, isa) {
        return OperandKind::Register(r);
    }
    if isa.name == IsaName::Armv8 && A64_CONDITIONS.contains(&text.to_ascii_lowercase().as_str()) {
        return OperandKind::Condition(text.to_ascii_lowercase());
    }
    if let Some(v) = parse_int(text) {
        return OperandKind::Immediate(v);
    }
    if let Some(rest) = text.strip_prefix(':') {
        if let Some((_, sym)) = rest.split_once(':') {
            return symbol_expr(sym).map(OperandKind::LabelRef).unwrap_or(OperandKind::Other);
        }
    }
    symbol_expr(text).map(OperandKind::LabelRef).unwrap_or(OperandKind::Other)
}

fn parse_arm_memory(text: &str, isa: &Isa) -> Option<MemoryRef> {
    let (inner, writeback) = match text.strip_suffix('!') {
        Some(t) => (t, true),
        None => (text, false),
    };
    let inner = inner.strip_prefix('[')?.strip_suffix(']')?;
    let parts = split_operands(inner);
    let mut mem = MemoryRef { writeback, ..Default::default() };
    let mut it = parts.iter();
    mem.base = Some(arm_register(it.next()?, isa)?);
    if let Some(second) = it.next() {
        if let Some(body) = second.strip_prefix('#') {
            match arm_immediate(body)? {
                OperandKind::Immediate(v) => mem.offset = Some(v),
                OperandKind::LabelRef(s) => mem.symbol = Some(s),
                _ => return None,
            }
        } else if let Some(rest) = second.strip_prefix(':') {
            let (_, sym) = rest.split_once(':')?;
            mem.symbol = Some(symbol_expr(sym)?);
        } else {
            let (neg, reg) = match second.strip_prefix('-') {
                Some(r) => (true, r),
                None => (false, second.strip_prefix('+').unwrap_or(second)),
            };
            mem.index = Some(arm_register(reg, isa)?);
            mem.subtract_index = neg;
        }
    }
    if let Some(third) = it.next() {
        parse_shift(third, isa)?;
        mem.scale_or_shift = Some(third.to_ascii_lowercase());
    }
    if it.next().is_some() {
        return None;
    }
    Some(mem)
}

fn parse_register_list(text: &str, isa: &Isa) -> Option<Vec<String>> {
    let text = text.strip_suffix('^').unwrap_or(text);
    let inner = text.strip_prefix('{')?.strip_suffix('}')?;
    let mut regs = Vec::new();
    for item in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once('-') {
            Some((lo, hi)) => {
                let lo = arm_register(lo.trim(), isa)?;
                let hi = arm_register(hi.trim(), isa)?;
                let (a, b) = (reg_number(&lo)?, reg_number(&hi)?);
                if a > b {
                    return None;
                }
                for n in a..=b {
                    let mut name = String::from(&lo[..1]);
                    name.push_str(&alloc::format!("{n}"));
                    regs.push(name);
                }
            }
            None => regs.push(arm_register(item, isa)?),
        }
    }
    Some(regs)
}

fn reg_number(name: &str) -> Option<u32> {
    name.get(1..)?.parse().ok()
}

// ---- RISC-V ----

const RISCV_RELOCS: [&str; 7] = ["%hi", "%lo", "%pcrel_hi", "%pcrel_lo", "%tprel_hi", "%tprel_lo", "%got_pcrel_hi"];

fn parse_riscv(text: &str, isa: &Isa) -> OperandKind {
    if let Some(v) = parse_int(text) {
        return OperandKind::Immediate(v);
    }
    if let Some(r) = arm_register(text, isa) {
        return OperandKind::Register(r);
    }
    if text.starts_with('%') {
        return match parse_riscv_reloc(text) {
            Some((sym, rest)) if rest.is_empty() => OperandKind::LabelRef(sym),
            Some((sym, rest)) => match riscv_base(rest, isa) {
                Some(base) => OperandKind::Memory(MemoryRef { base: Some(base), symbol: Some(sym), ..Default::default() }),
                None => OperandKind::Other,
            },
            None => OperandKind::Other,
        };
    }
    if let Some(open) = text.find('(') {
        let disp = &text[..open];
        let Some(base) = riscv_base(&text[open..], isa) else { return OperandKind::Other };
        let mut mem = MemoryRef { base: Some(base), ..Default::default() };
        if !disp.is_empty() {
            match parse_int(disp) {
                Some(v) => mem.offset = Some(v),
                None => match symbol_expr(disp) {
                    Some(s) => mem.symbol = Some(s),
                    None => return OperandKind::Other,
                },
            }
        }
        return OperandKind::Memory(mem);
    }
    symbol_expr(text).map(OperandKind::LabelRef).unwrap_or(OperandKind::Other)
}

/// `%lo(sym)(a0)` → (`sym`, `(a0)`).
fn parse_riscv_reloc(text: &str) -> Option<(String, &str)> {
    let open = text.find('(')?;
    if !RISCV_RELOCS.contains(&&text[..open]) {
        return None;
    }
    let close = open + text[open..].find(')')?;
    let sym = symbol_expr(&text[open + 1..close])?;
    Some((sym, &text[close + 1..]))
}

fn riscv_base(paren: &str, isa: &Isa) -> Option<String> {
    let inner = paren.strip_prefix('(')?.strip_suffix(')')?;
    arm_register(inner.trim(), isa)
}
