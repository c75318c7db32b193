//! Structured view of compiler-emitted assembly text.
//!
//! Parsing is total: every input line lands in [`AssemblyUnit::lines`] with
//! exactly one [`LineKind`]. Operands the grammar cannot place are kept as
//! [`OperandKind::Other`] and counted in [`AssemblyUnit::fallback_lines`].

mod normalize;
mod operand;
mod profile;

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::isa::{Isa, IsaName};

pub use normalize::{canonical_whitespace, normalize, NormalizationPolicy, VOLATILE_DIRECTIVES};
pub use operand::{split_operands, MemoryRef, Operand, OperandKind, ShiftBy};
pub use profile::{canonical_register, static_register_profile, RegisterUsage, RoleEntry, RoleTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineKind {
    Instruction,
    Label,
    Directive,
    Comment,
    Blank,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    /// `rep`, `lock` and similar x86 prefixes.
    pub prefix: Option<String>,
    pub mnemonic: String,
    pub operands: Vec<Operand>,
    pub label_refs: BTreeSet<String>,
}

impl Instruction {
    /// Canonical text: `[prefix ]mnemonic[ op, op, ...]`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.prefix {
            out.push_str(p);
            out.push(' ');
        }
        out.push_str(&self.mnemonic);
        for (i, op) in self.operands.iter().enumerate() {
            out.push_str(if i == 0 { " " } else { ", " });
            out.push_str(&op.text);
        }
        out
    }

    pub fn has_fallback(&self) -> bool {
        self.operands.iter().any(|o| matches!(o.kind, OperandKind::Other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Line {
    pub kind: LineKind,
    pub text_normalized: String,
    /// Label defined on this line, also set for `label: insn` lines.
    pub label: Option<String>,
    pub instruction: Option<Instruction>,
}

impl Line {
    /// Directive name (`.text`, `.word`, ...) for directive lines.
    pub fn directive_name(&self) -> Option<&str> {
        if self.kind != LineKind::Directive {
            return None;
        }
        let body = match &self.label {
            Some(l) => self.text_normalized[l.len() + 1..].trim_start(),
            None => self.text_normalized.as_str(),
        };
        body.split(|c: char| c.is_whitespace()).next()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpan {
    pub name: String,
    /// Index into [`AssemblyUnit::lines`] of the defining label.
    pub start_line: usize,
    /// Inclusive.
    pub end_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyUnit {
    pub isa: IsaName,
    pub source_id: String,
    pub raw_text: String,
    pub lines: Vec<Line>,
    pub functions: Vec<FunctionSpan>,
    /// Instruction lines with at least one operand the grammar could not place.
    pub fallback_lines: usize,
}

impl AssemblyUnit {
    pub fn instructions(&self) -> impl Iterator<Item = (usize, &Instruction)> {
        self.lines
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.instruction.as_ref().map(|ins| (i, ins)))
    }

    pub fn function_lines(&self, span: &FunctionSpan) -> &[Line] {
        &self.lines[span.start_line..=span.end_line]
    }
}

/// Lossy entry point for raw bytes from disk or a subprocess.
pub fn parse_assembly_bytes(bytes: &[u8], isa: &Isa, source_id: &str) -> AssemblyUnit {
    parse_assembly(&String::from_utf8_lossy(bytes), isa, source_id)
}

pub fn parse_assembly(text: &str, isa: &Isa, source_id: &str) -> AssemblyUnit {
    let mut lines = Vec::new();
    let mut fallback_lines = 0;
    if !text.is_empty() {
        for raw in text.lines() {
            let line = parse_line(raw, isa);
            if line.instruction.as_ref().is_some_and(Instruction::has_fallback) {
                fallback_lines += 1;
            }
            lines.push(line);
        }
    }
    let functions = function_spans(&lines);
    AssemblyUnit {
        isa: isa.name,
        source_id: source_id.to_owned(),
        raw_text: text.to_owned(),
        lines,
        functions,
        fallback_lines,
    }
}

const X86_PREFIXES: [&str; 9] = ["rep", "repe", "repz", "repne", "repnz", "lock", "notrack", "data16", "bnd"];

fn parse_line(raw: &str, isa: &Isa) -> Line {
    let (code, had_comment) = strip_comment(raw, &isa.comment_leaders);
    let code = code.trim();
    if code.is_empty() {
        let kind = if had_comment { LineKind::Comment } else { LineKind::Blank };
        let text_normalized = if had_comment { canonical_whitespace(raw.trim()) } else { String::new() };
        return Line { kind, text_normalized, label: None, instruction: None };
    }

    let (label, rest) = split_label(code);
    let rest = rest.trim();
    if rest.is_empty() {
        let label = label.expect("non-empty code without label has a body");
        let mut text = label.clone();
        text.push(':');
        return Line { kind: LineKind::Label, text_normalized: text, label: Some(label), instruction: None };
    }

    let prefix_text = label.as_ref().map(|l| {
        let mut t = l.clone();
        t.push_str(": ");
        t
    });

    if is_directive(rest) {
        let mut text = prefix_text.unwrap_or_default();
        text.push_str(&canonical_whitespace(rest));
        return Line { kind: LineKind::Directive, text_normalized: text, label, instruction: None };
    }

    let instruction = parse_instruction(rest, isa);
    let mut text = prefix_text.unwrap_or_default();
    text.push_str(&instruction.render());
    Line { kind: LineKind::Instruction, text_normalized: text, label, instruction: Some(instruction) }
}

fn is_directive(code: &str) -> bool {
    let mut chars = code.chars();
    chars.next() == Some('.') && chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
}

fn parse_instruction(code: &str, isa: &Isa) -> Instruction {
    let (mut head, mut rest) = split_first_word(code);
    let mut prefix = None;
    if isa.name == IsaName::X86_64 && X86_PREFIXES.contains(&head.to_ascii_lowercase().as_str()) && !rest.is_empty() {
        prefix = Some(head.to_ascii_lowercase());
        let (h, r) = split_first_word(rest);
        head = h;
        rest = r;
    }
    let mnemonic = head.to_ascii_lowercase();
    let operands: Vec<Operand> = split_operands(rest).into_iter().map(|t| Operand::parse(&t, isa)).collect();
    let mut label_refs = BTreeSet::new();
    for op in &operands {
        if let Some(sym) = op.symbol() {
            label_refs.insert(sym.to_owned());
        }
    }
    Instruction { prefix, mnemonic, operands, label_refs }
}

fn split_first_word(s: &str) -> (&str, &str) {
    let s = s.trim();
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], s[i..].trim_start()),
        None => (s, ""),
    }
}

/// Splits `raw` at the first comment leader outside a string literal.
pub(crate) fn strip_comment<'a>(raw: &'a str, leaders: &[&str]) -> (&'a str, bool) {
    let bytes = raw.as_bytes();
    let mut in_string = false;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if in_string {
            if b == b'\\' {
                i += 2;
                continue;
            }
            if b == b'"' {
                in_string = false;
            }
        } else if b == b'"' {
            in_string = true;
        } else if leaders.iter().any(|l| raw[i..].starts_with(l)) {
            return (&raw[..i], true);
        }
        i += 1;
    }
    (raw, false)
}

pub(crate) fn is_symbol_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$')
}

/// Splits a leading `name:` label definition off a line of code.
fn split_label(code: &str) -> (Option<String>, &str) {
    if let Some(rest) = code.strip_prefix('"') {
        if let Some(end) = rest.find('"') {
            let after = &rest[end + 1..];
            if let Some(body) = after.strip_prefix(':') {
                return (Some(code[..end + 2].to_owned()), body);
            }
        }
        return (None, code);
    }
    let end = code.find(|c: char| !is_symbol_char(c)).unwrap_or(code.len());
    if end == 0 {
        return (None, code);
    }
    let after = &code[end..];
    // `a::b` is never a label; `sym:` followed by anything else is
    match after.strip_prefix(':') {
        Some(body) if !body.starts_with(':') => (Some(code[..end].to_owned()), body),
        _ => (None, code),
    }
}

fn function_spans(lines: &[Line]) -> Vec<FunctionSpan> {
    let mut typed: BTreeSet<String> = BTreeSet::new();
    let mut global: BTreeSet<String> = BTreeSet::new();
    for line in lines {
        let Some(name) = line.directive_name() else { continue };
        let args = directive_args(line);
        match name {
            ".type" => {
                let mut parts = args.split(',').map(str::trim);
                let sym = parts.next().unwrap_or("");
                let ty = parts.next().unwrap_or("");
                if ty.trim_start_matches(['@', '%', '#']).trim_matches('"') == "function" && !sym.is_empty() {
                    typed.insert(sym.to_owned());
                }
            }
            ".globl" | ".global" => {
                for sym in args.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    global.insert(sym.to_owned());
                }
            }
            _ => {}
        }
    }
    let names = if typed.is_empty() { global } else { typed };

    let mut starts: Vec<(usize, String)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in lines.iter().enumerate() {
        if let Some(l) = &line.label {
            if names.contains(l) && seen.insert(l.clone()) {
                starts.push((i, l.clone()));
            }
        }
    }

    let mut spans = Vec::new();
    for (k, (start, name)) in starts.iter().enumerate() {
        let limit = starts.get(k + 1).map(|(s, _)| s - 1).unwrap_or(lines.len() - 1);
        let size_end = (*start..=limit).find(|&i| {
            lines[i].directive_name() == Some(".size")
                && directive_args(&lines[i]).split(',').next().map(str::trim) == Some(name.as_str())
        });
        spans.push(FunctionSpan { name: name.clone(), start_line: *start, end_line: size_end.unwrap_or(limit) });
    }
    spans
}

fn directive_args(line: &Line) -> &str {
    let body = match &line.label {
        Some(l) => line.text_normalized[l.len() + 1..].trim_start(),
        None => line.text_normalized.as_str(),
    };
    match body.find(char::is_whitespace) {
        Some(i) => body[i..].trim(),
        None => "",
    }
}
