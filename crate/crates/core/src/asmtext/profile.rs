//! Static per-register read/write profile, driven by per-ISA operand-role tables.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{AssemblyUnit, Instruction, OperandKind, ShiftBy};
use crate::isa::IsaName;

const X86_ROLES: &str = include_str!("../../data/roles/x86_64.txt");
const ARMV5_ROLES: &str = include_str!("../../data/roles/armv5.txt");
const ARMV8_ROLES: &str = include_str!("../../data/roles/armv8.txt");
const RISCV_ROLES: &str = include_str!("../../data/roles/riscv64.txt");

const ARM_CONDS: [&str; 16] = [
    "eq", "ne", "cs", "cc", "hs", "lo", "mi", "pl", "vs", "vc", "hi", "ls", "ge", "lt", "gt", "le",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoleEntry {
    /// Operand positions written; negative values count from the end.
    pub writes: Vec<i32>,
    /// Operand positions read; `None` means every position not in `writes`.
    pub reads: Option<Vec<i32>>,
    pub implicit_reads: Vec<String>,
    pub implicit_writes: Vec<String>,
    pub clobbers: Vec<String>,
}

impl RoleEntry {
    fn covers(list: &[i32], index: usize, len: usize) -> bool {
        list.iter().any(|&i| {
            if i >= 0 {
                i as usize == index
            } else {
                len as i64 + i as i64 == index as i64
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleTable {
    pub isa: IsaName,
    entries: BTreeMap<String, RoleEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleParseError {
    pub line: usize,
    pub message: String,
}

impl core::fmt::Display for RoleParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "role table line {}: {}", self.line, self.message)
    }
}

impl core::error::Error for RoleParseError {}

impl RoleTable {
    /// Shipped table for `isa`.
    pub fn builtin(isa: IsaName) -> RoleTable {
        let text = match isa {
            IsaName::X86_64 => X86_ROLES,
            IsaName::Armv5 => ARMV5_ROLES,
            IsaName::Armv8 => ARMV8_ROLES,
            IsaName::Riscv64 => RISCV_ROLES,
        };
        RoleTable::parse(isa, text).expect("builtin role tables are well-formed")
    }

    /// Parses the `mnemonic writes=<indices> ...` text format.
    pub fn parse(isa: IsaName, text: &str) -> Result<RoleTable, RoleParseError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| RoleParseError { line: n + 1, message };
            let mut words = line.split_whitespace();
            let mnemonic = words.next().expect("non-empty line").to_ascii_lowercase();
            let mut entry = RoleEntry::default();
            let mut saw_writes = false;
            for word in words {
                let (key, value) = word.split_once('=').ok_or_else(|| err(format!("expected key=value, got `{word}`")))?;
                let items = value.split(',').map(str::trim).filter(|s| !s.is_empty());
                match key {
                    "writes" | "reads" => {
                        let idx: Result<Vec<i32>, _> = items.map(|s| s.parse::<i32>()).collect();
                        let idx = idx.map_err(|_| err(format!("bad index list `{value}`")))?;
                        if key == "writes" {
                            entry.writes = idx;
                            saw_writes = true;
                        } else {
                            entry.reads = Some(idx);
                        }
                    }
                    "implicit_reads" => entry.implicit_reads = items.map(ToString::to_string).collect(),
                    "implicit_writes" => entry.implicit_writes = items.map(ToString::to_string).collect(),
                    "clobbers" => entry.clobbers = items.map(ToString::to_string).collect(),
                    other => return Err(err(format!("unknown key `{other}`"))),
                }
            }
            if !saw_writes {
                return Err(err(format!("`{mnemonic}` has no writes= field")));
            }
            entries.insert(mnemonic, entry);
        }
        Ok(RoleTable { isa, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Resolves a mnemonic to its role entry and whether it executes conditionally.
    /// `None` means the mnemonic is unknown and the destination-slot default applies.
    pub fn lookup(&self, mnemonic: &str) -> (Option<&RoleEntry>, bool) {
        if let Some(e) = self.entries.get(mnemonic) {
            return (Some(e), false);
        }
        match self.isa {
            IsaName::X86_64 => {
                if let Some(stem) = mnemonic.strip_suffix(['b', 'w', 'l', 'q']) {
                    return (self.entries.get(stem), false);
                }
                (None, false)
            }
            IsaName::Armv5 => {
                let flagless = |m: &str| -> Option<&RoleEntry> {
                    self.entries.get(m).or_else(|| m.strip_suffix('s').and_then(|s| self.entries.get(s)))
                };
                // Condition first so `bls` is b+ls, not bl+s. UAL puts the
                // condition last; pre-UAL puts `s` last.
                let core = mnemonic.strip_suffix('s').unwrap_or(mnemonic);
                for candidate in [mnemonic, core] {
                    if candidate.len() > 2 {
                        let (stem, cond) = candidate.split_at(candidate.len() - 2);
                        if ARM_CONDS.contains(&cond) {
                            if let Some(e) = flagless(stem) {
                                return (Some(e), true);
                            }
                        }
                    }
                }
                (flagless(mnemonic), false)
            }
            IsaName::Armv8 => match mnemonic.split_once('.') {
                Some((stem, _)) => (self.entries.get(stem), false),
                None => (None, false),
            },
            IsaName::Riscv64 => (None, false),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterUsage {
    pub writes: usize,
    pub reads: usize,
    /// 1-based line number of the first write.
    pub first_write_line: Option<usize>,
    /// 1-based line numbers where a pending write was replaced before any read.
    pub overwrite_without_read_lines: Vec<usize>,
}

/// Folds aliases (`eax` → `rax`, `r11` → `fp`, `x10` → `a0`, `w3` → `x3`) onto one name.
pub fn canonical_register(isa: IsaName, name: &str) -> String {
    let name = name.to_ascii_lowercase();
    match isa {
        IsaName::X86_64 => x86_family(&name).unwrap_or(name),
        IsaName::Armv5 => match name.as_str() {
            "r9" | "sb" => "r9".to_owned(),
            "r10" | "sl" => "r10".to_owned(),
            "r11" => "fp".to_owned(),
            "r12" => "ip".to_owned(),
            "r13" => "sp".to_owned(),
            "r14" => "lr".to_owned(),
            "r15" => "pc".to_owned(),
            _ => name,
        },
        IsaName::Armv8 => match name.as_str() {
            "fp" | "w29" => "x29".to_owned(),
            "lr" | "w30" => "x30".to_owned(),
            "wsp" => "sp".to_owned(),
            "wzr" => "xzr".to_owned(),
            n if n.starts_with('w') && n[1..].parse::<u8>().is_ok() => format!("x{}", &n[1..]),
            _ => name,
        },
        IsaName::Riscv64 => match name.strip_prefix('x').and_then(|n| n.parse::<usize>().ok()) {
            Some(n) if n < 32 => RV_ABI[n].to_owned(),
            _ if name == "fp" => "s0".to_owned(),
            _ => name,
        },
    }
}

const RV_ABI: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7",
    "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6",
];

fn x86_family(name: &str) -> Option<String> {
    const FAMILIES: [(&str, [&str; 4]); 8] = [
        ("rax", ["eax", "ax", "al", "ah"]),
        ("rbx", ["ebx", "bx", "bl", "bh"]),
        ("rcx", ["ecx", "cx", "cl", "ch"]),
        ("rdx", ["edx", "dx", "dl", "dh"]),
        ("rsi", ["esi", "si", "sil", "sil"]),
        ("rdi", ["edi", "di", "dil", "dil"]),
        ("rbp", ["ebp", "bp", "bpl", "bpl"]),
        ("rsp", ["esp", "sp", "spl", "spl"]),
    ];
    for (root, aliases) in FAMILIES {
        if name == root || aliases.contains(&name) {
            return Some(root.to_owned());
        }
    }
    if name == "eip" {
        return Some("rip".to_owned());
    }
    let stripped = name.strip_suffix(['d', 'w', 'b']).unwrap_or(name);
    if let Some(n) = stripped.strip_prefix('r').and_then(|n| n.parse::<u8>().ok()) {
        if (8..16).contains(&n) {
            return Some(format!("r{n}"));
        }
    }
    None
}

fn untracked(isa: IsaName, reg: &str) -> bool {
    matches!(
        (isa, reg),
        (IsaName::Riscv64, "zero") | (IsaName::Armv8, "xzr") | (_, "pc") | (IsaName::X86_64, "rip")
    )
}

struct Access {
    reads: Vec<String>,
    writes: Vec<String>,
    clobbers: Vec<String>,
}

fn classify_access(isa: IsaName, table: &RoleTable, ins: &Instruction) -> Access {
    let (entry, conditional) = table.lookup(&ins.mnemonic);
    let len = ins.operands.len();
    let default_writes: Vec<i32> = match (isa, len) {
        (_, 0) => Vec::new(),
        (IsaName::X86_64, _) => alloc::vec![-1],
        _ => alloc::vec![0],
    };
    let writes = entry.map(|e| e.writes.clone()).unwrap_or(default_writes);
    let reads = entry.and_then(|e| e.reads.clone());

    let mut acc = Access { reads: Vec::new(), writes: Vec::new(), clobbers: Vec::new() };
    for (i, op) in ins.operands.iter().enumerate() {
        let is_write = RoleEntry::covers(&writes, i, len);
        let is_read = match &reads {
            Some(r) => RoleEntry::covers(r, i, len),
            None => !is_write,
        } || (is_write && conditional);
        match &op.kind {
            OperandKind::Register(r) => {
                if is_read {
                    acc.reads.push(canonical_register(isa, r));
                }
                if is_write {
                    acc.writes.push(canonical_register(isa, r));
                }
            }
            OperandKind::RegisterList(rs) => {
                for r in rs {
                    if is_write {
                        acc.writes.push(canonical_register(isa, r));
                    } else {
                        acc.reads.push(canonical_register(isa, r));
                    }
                }
            }
            OperandKind::Memory(m) => {
                for r in m.base.iter().chain(m.index.iter()) {
                    acc.reads.push(canonical_register(isa, r));
                }
            }
            OperandKind::Shift { by: Some(ShiftBy::Register(r)), .. } => acc.reads.push(canonical_register(isa, r)),
            _ => {}
        }
    }
    if let Some(e) = entry {
        acc.reads.extend(e.implicit_reads.iter().map(|r| canonical_register(isa, r)));
        acc.writes.extend(e.implicit_writes.iter().map(|r| canonical_register(isa, r)));
        acc.clobbers.extend(e.clobbers.iter().map(|r| canonical_register(isa, r)));
    }
    acc
}

/// Per-register read/write counts over a unit, using the shipped role table.
pub fn static_register_profile(unit: &AssemblyUnit) -> BTreeMap<String, RegisterUsage> {
    static_register_profile_with(unit, &RoleTable::builtin(unit.isa))
}

pub fn static_register_profile_with(unit: &AssemblyUnit, table: &RoleTable) -> BTreeMap<String, RegisterUsage> {
    let mut usage: BTreeMap<String, RegisterUsage> = BTreeMap::new();
    // register → line of a write that has not been read yet
    let mut pending: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, line) in unit.lines.iter().enumerate() {
        let line_no = idx + 1;
        if line.label.is_some() {
            // control may join here from elsewhere
            pending.clear();
        }
        let Some(ins) = &line.instruction else { continue };
        let acc = classify_access(unit.isa, table, ins);
        let mut seen_read = BTreeSet::new();
        for r in acc.reads {
            if untracked(unit.isa, &r) || !seen_read.insert(r.clone()) {
                continue;
            }
            usage.entry(r.clone()).or_default().reads += 1;
            pending.remove(&r);
        }
        let mut seen_write = BTreeSet::new();
        for r in acc.writes {
            if untracked(unit.isa, &r) || !seen_write.insert(r.clone()) {
                continue;
            }
            let u = usage.entry(r.clone()).or_default();
            u.writes += 1;
            u.first_write_line.get_or_insert(line_no);
            if pending.contains_key(&r) {
                u.overwrite_without_read_lines.push(line_no);
            }
            pending.insert(r, line_no);
        }
        for r in acc.clobbers {
            pending.remove(&r);
        }
    }
    usage
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asmtext::parse_assembly;

    fn profile(text: &str, isa: IsaName) -> BTreeMap<String, RegisterUsage> {
        static_register_profile(&parse_assembly(text, &isa.isa(), "t"))
    }

    #[test]
    fn back_to_back_writes_flagged() {
        let p = profile("mov r3, r0\nmov r3, r1", IsaName::Armv5);
        assert_eq!(p["r3"].overwrite_without_read_lines, alloc::vec![2]);
        assert_eq!(p["r3"].writes, 2);
        assert_eq!(p["r3"].first_write_line, Some(1));
    }

    #[test]
    fn intervening_read_clears_flag() {
        let p = profile("mov r3, r0\nadd r1, r3, r2", IsaName::Armv5);
        assert!(p["r3"].overwrite_without_read_lines.is_empty());
        assert_eq!(p["r3"].reads, 1);
    }

    // Loop body from a factorial-style accumulation: the accumulator is loaded
    // into r2 and copied to r0 before the multiply in the reference; the
    // faulty variant loads it straight into r0 and then loads the array
    // element over it.
    const P63_TRUTH: &str = "ldr r2, [fp, #-8]\nmov r0, r2\nldr r1, [r3, r1, lsl #2]\nmul r0, r0, r1\n";
    const P63_PREDICTED: &str = "ldr r0, [fp, #-8]\nldr r0, [r3, r1, lsl #2]\nmul r0, r0, r1\n";

    #[test]
    fn p63_register_clobber() {
        let truth = profile(P63_TRUTH, IsaName::Armv5);
        assert!(truth.values().all(|u| u.overwrite_without_read_lines.is_empty()));
        let predicted = profile(P63_PREDICTED, IsaName::Armv5);
        assert_eq!(predicted["r0"].overwrite_without_read_lines, alloc::vec![2]);
    }

    #[test]
    fn x86_destination_is_last() {
        let p = profile("movl $1, %eax\nmovl $2, %eax\n", IsaName::X86_64);
        assert_eq!(p["rax"].overwrite_without_read_lines, alloc::vec![2]);
        let p = profile("movl $1, %eax\naddl %eax, %edx\nmovl $2, %eax\n", IsaName::X86_64);
        assert!(p["rax"].overwrite_without_read_lines.is_empty());
        assert_eq!(p["rdx"].reads, 1);
    }

    #[test]
    fn calls_read_arguments_and_clobber() {
        let p = profile("mov r0, #1\nbl f\nmov r0, #2\nmov r1, r0\n", IsaName::Armv5);
        assert!(p["r0"].overwrite_without_read_lines.is_empty());
    }

    #[test]
    fn conditional_writes_do_not_flag() {
        let p = profile("mov r0, #0\nmovgt r0, #1\nbx lr\n", IsaName::Armv5);
        assert!(p["r0"].overwrite_without_read_lines.is_empty());
    }

    #[test]
    fn labels_reset_pending_writes() {
        let p = profile("mov r0, #1\n.L2:\nmov r0, #2\n", IsaName::Armv5);
        assert!(p["r0"].overwrite_without_read_lines.is_empty());
    }

    #[test]
    fn aliases_fold() {
        assert_eq!(canonical_register(IsaName::X86_64, "al"), "rax");
        assert_eq!(canonical_register(IsaName::X86_64, "r9d"), "r9");
        assert_eq!(canonical_register(IsaName::Armv5, "r11"), "fp");
        assert_eq!(canonical_register(IsaName::Riscv64, "x10"), "a0");
        assert_eq!(canonical_register(IsaName::Armv8, "w3"), "x3");
    }

    #[test]
    fn arm_lookup_strips_suffixes() {
        let t = RoleTable::builtin(IsaName::Armv5);
        assert_eq!(t.lookup("rsblt").1, true);
        assert!(t.lookup("rsblt").0.is_some());
        assert!(t.lookup("adds").0.is_some());
        assert_eq!(t.lookup("adds").1, false);
        assert!(t.lookup("ldrbeq").0.is_some());
        assert!(t.lookup("teq").0.is_some());
        assert_eq!(t.lookup("bls"), (t.lookup("b").0, true));
        assert_eq!(t.lookup("movs"), (t.lookup("mov").0, false));
        assert_eq!(t.lookup("addeqs"), (t.lookup("add").0, true));
        assert!(t.lookup("frobnicate").0.is_none());
    }

    #[test]
    fn role_table_format_errors() {
        assert!(RoleTable::parse(IsaName::Armv5, "mov reads=1").is_err());
        assert!(RoleTable::parse(IsaName::Armv5, "mov writes=x").is_err());
        assert!(RoleTable::parse(IsaName::Armv5, "mov writes=0 bogus=1").is_err());
        let t = RoleTable::parse(IsaName::Armv5, "# c\nmov writes=0\n\n").unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn builtin_tables_parse() {
        for isa in IsaName::ALL {
            assert!(!RoleTable::builtin(isa).is_empty());
        }
    }
}
