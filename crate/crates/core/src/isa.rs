//! Instruction-set registry: register files, comment syntax and branch
//! mnemonics for the four architectures the harness understands.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IsaName {
    #[serde(rename = "X86_64")]
    X86_64,
    #[serde(rename = "ARMV5")]
    Armv5,
    #[serde(rename = "ARMV8")]
    Armv8,
    #[serde(rename = "RISCV64")]
    Riscv64,
}

impl IsaName {
    pub const ALL: [IsaName; 4] = [IsaName::X86_64, IsaName::Armv5, IsaName::Armv8, IsaName::Riscv64];

    pub fn as_str(self) -> &'static str {
        match self {
            IsaName::X86_64 => "X86_64",
            IsaName::Armv5 => "ARMV5",
            IsaName::Armv8 => "ARMV8",
            IsaName::Riscv64 => "RISCV64",
        }
    }

    /// Targets a transpiler may emit.
    pub fn is_risc_target(self) -> bool {
        !matches!(self, IsaName::X86_64)
    }

    pub fn isa(self) -> Isa {
        Isa::new(self)
    }
}

impl fmt::Display for IsaName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownIsa(pub String);

impl fmt::Display for UnknownIsa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown ISA `{}` (expected one of X86_64, ARMV5, ARMV8, RISCV64)", self.0)
    }
}

impl core::error::Error for UnknownIsa {}

impl FromStr for IsaName {
    type Err = UnknownIsa;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowered = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        match lowered.as_str() {
            "x8664" | "x86" | "amd64" => Ok(IsaName::X86_64),
            "armv5" | "arm" | "armv5te" => Ok(IsaName::Armv5),
            "armv8" | "aarch64" | "arm64" => Ok(IsaName::Armv8),
            "riscv64" | "riscv" | "rv64" => Ok(IsaName::Riscv64),
            _ => Err(UnknownIsa(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SyntaxFamily {
    Att,
    ArmUal,
    RiscvStd,
}

/// Static description of one architecture as seen in compiler-emitted text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Isa {
    pub name: IsaName,
    pub syntax_family: SyntaxFamily,
    pub comment_leaders: Vec<&'static str>,
    pub register_names: Vec<String>,
    pub branch_mnemonics: BTreeSet<String>,
    register_index: BTreeSet<String>,
}

impl Isa {
    fn new(name: IsaName) -> Self {
        let (syntax_family, comment_leaders, register_names, branch_mnemonics) = match name {
            IsaName::X86_64 => (SyntaxFamily::Att, alloc::vec!["#", ";"], x86_registers(), x86_branches()),
            IsaName::Armv5 => (SyntaxFamily::ArmUal, alloc::vec!["@", "//", ";"], armv5_registers(), armv5_branches()),
            IsaName::Armv8 => (SyntaxFamily::ArmUal, alloc::vec!["//", ";"], armv8_registers(), armv8_branches()),
            IsaName::Riscv64 => (SyntaxFamily::RiscvStd, alloc::vec!["#", ";"], riscv_registers(), riscv_branches()),
        };
        let register_index = register_names.iter().cloned().collect();
        Isa {
            name,
            syntax_family,
            comment_leaders,
            register_names,
            branch_mnemonics,
            register_index,
        }
    }

    /// Case-insensitive register lookup; x86 names are given without `%`.
    pub fn is_register(&self, name: &str) -> bool {
        if self.register_index.contains(name) {
            return true;
        }
        let lower = name.to_ascii_lowercase();
        self.register_index.contains(lower.as_str())
    }

    pub fn is_branch(&self, mnemonic: &str) -> bool {
        self.branch_mnemonics.contains(mnemonic)
    }
}

/// The four built-in architectures, in [`IsaName::ALL`] order.
pub fn isa_registry() -> Vec<Isa> {
    IsaName::ALL.iter().map(|n| n.isa()).collect()
}

fn push_all(out: &mut Vec<String>, names: &[&str]) {
    out.extend(names.iter().map(|s| s.to_string()));
}

fn x86_registers() -> Vec<String> {
    let mut out = Vec::new();
    push_all(
        &mut out,
        &[
            "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp", "eax", "ebx", "ecx", "edx", "esi", "edi", "ebp",
            "esp", "ax", "bx", "cx", "dx", "si", "di", "bp", "sp", "al", "bl", "cl", "dl", "sil", "dil", "bpl", "spl",
            "ah", "bh", "ch", "dh", "rip", "eip",
        ],
    );
    for n in 8..16 {
        out.push(format!("r{n}"));
        out.push(format!("r{n}d"));
        out.push(format!("r{n}w"));
        out.push(format!("r{n}b"));
    }
    for n in 0..16 {
        out.push(format!("xmm{n}"));
    }
    push_all(&mut out, &["cs", "ds", "es", "fs", "gs", "ss"]);
    out
}

const ARM_CONDS: [&str; 16] = [
    "eq", "ne", "cs", "cc", "hs", "lo", "mi", "pl", "vs", "vc", "hi", "ls", "ge", "lt", "gt", "le",
];

fn armv5_registers() -> Vec<String> {
    let mut out: Vec<String> = (0..16).map(|n| format!("r{n}")).collect();
    push_all(&mut out, &["fp", "sp", "lr", "pc", "ip", "sl", "sb"]);
    out
}

fn armv5_branches() -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for base in ["b", "bl", "bx", "blx"] {
        out.insert(base.to_string());
        for c in ARM_CONDS {
            out.insert(format!("{base}{c}"));
        }
    }
    out
}

fn armv8_registers() -> Vec<String> {
    let mut out = Vec::new();
    for n in 0..31 {
        out.push(format!("x{n}"));
        out.push(format!("w{n}"));
    }
    push_all(&mut out, &["sp", "wsp", "xzr", "wzr", "fp", "lr"]);
    for prefix in ["v", "q", "d", "s", "h", "b"] {
        for n in 0..32 {
            out.push(format!("{prefix}{n}"));
        }
    }
    out
}

fn armv8_branches() -> BTreeSet<String> {
    let mut out: BTreeSet<String> = ["b", "bl", "br", "blr", "ret", "cbz", "cbnz", "tbz", "tbnz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for c in ARM_CONDS {
        out.insert(format!("b.{c}"));
    }
    out
}

fn riscv_registers() -> Vec<String> {
    let mut out: Vec<String> = (0..32).map(|n| format!("x{n}")).collect();
    push_all(&mut out, &["zero", "ra", "sp", "gp", "tp", "fp"]);
    out.extend((0..7).map(|n| format!("t{n}")));
    out.extend((0..12).map(|n| format!("s{n}")));
    out.extend((0..8).map(|n| format!("a{n}")));
    out.extend((0..32).map(|n| format!("f{n}")));
    out.extend((0..12).map(|n| format!("ft{n}")));
    out.extend((0..12).map(|n| format!("fs{n}")));
    out.extend((0..8).map(|n| format!("fa{n}")));
    out
}

fn riscv_branches() -> BTreeSet<String> {
    [
        "j", "jal", "jalr", "jr", "ret", "call", "tail", "beq", "bne", "blt", "bge", "bltu", "bgeu", "beqz", "bnez",
        "blez", "bgez", "bltz", "bgtz", "bgt", "ble", "bgtu", "bleu",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn x86_branches() -> BTreeSet<String> {
    [
        "jmp", "jmpq", "je", "jne", "jz", "jnz", "jl", "jle", "jg", "jge", "jb", "jbe", "ja", "jae", "js", "jns",
        "jo", "jno", "jp", "jnp", "call", "callq", "ret", "retq",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn has(isa: &Isa, reg: &str) -> bool {
        isa.register_names.iter().any(|r| r == reg)
    }

    #[test]
    fn armv5_register_file() {
        let arm = IsaName::Armv5.isa();
        for n in 0..16 {
            assert!(has(&arm, &format!("r{n}")));
        }
        for r in ["fp", "sp", "lr", "pc"] {
            assert!(has(&arm, r));
        }
    }

    #[test]
    fn x86_sub_registers() {
        let x86 = IsaName::X86_64.isa();
        assert!(has(&x86, "rax"));
        assert!(has(&x86, "eax"));
        assert!(x86.is_register("EAX"));
    }

    #[test]
    fn riscv_abi_aliases() {
        let rv = IsaName::Riscv64.isa();
        assert!(has(&rv, "a0"));
        assert!(has(&rv, "x10"));
    }

    #[test]
    fn registry_is_total_and_pure() {
        let a = isa_registry();
        let b = isa_registry();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        for isa in &a {
            assert!(!isa.register_names.is_empty());
            assert!(!isa.comment_leaders.is_empty());
            let unique: BTreeSet<_> = isa.register_names.iter().collect();
            assert_eq!(unique.len(), isa.register_names.len(), "{} has duplicate registers", isa.name);
        }
        assert_ne!(a[1], a[2], "ARMv5 and ARMv8 must be distinct");
    }

    #[test]
    fn names_parse_case_insensitively() {
        assert_eq!("armv5".parse::<IsaName>().unwrap(), IsaName::Armv5);
        assert_eq!("RISCV64".parse::<IsaName>().unwrap(), IsaName::Riscv64);
        assert_eq!("x86_64".parse::<IsaName>().unwrap(), IsaName::X86_64);
        assert!("mips".parse::<IsaName>().is_err());
    }
}
