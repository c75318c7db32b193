use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::{AssemblyUnit, LineKind};

/// Directives whose content varies between otherwise identical compiles.
pub const VOLATILE_DIRECTIVES: [&str; 2] = [".file", ".ident"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationPolicy {
    /// Comments, blank lines and volatile directives dropped; whitespace canonical.
    #[default]
    Normalized,
    /// Raw text, untouched.
    Raw,
}

/// Deterministic text for edit-distance and exact-match scoring.
pub fn normalize(unit: &AssemblyUnit, policy: NormalizationPolicy) -> String {
    if policy == NormalizationPolicy::Raw {
        return unit.raw_text.clone();
    }
    let mut out = String::new();
    for line in &unit.lines {
        match line.kind {
            LineKind::Comment | LineKind::Blank => continue,
            LineKind::Directive => {
                if line.label.is_none() && line.directive_name().is_some_and(|d| VOLATILE_DIRECTIVES.contains(&d)) {
                    continue;
                }
            }
            LineKind::Label | LineKind::Instruction => {}
        }
        out.push_str(&line.text_normalized);
        out.push('\n');
    }
    out
}

/// Collapses whitespace runs to one space outside string literals; tabs count as whitespace.
pub fn canonical_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut pending_space = false;
    for c in s.trim().chars() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        if c == '"' {
            in_string = true;
        }
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asmtext::parse_assembly;
    use crate::isa::IsaName;

    fn norm(text: &str, isa: IsaName) -> String {
        normalize(&parse_assembly(text, &isa.isa(), "t"), NormalizationPolicy::Normalized)
    }

    #[test]
    fn strips_comment_lines() {
        assert_eq!(norm("@ comment\nmov r0, #0", IsaName::Armv5), "mov r0, #0\n");
    }

    #[test]
    fn drops_volatile_directives_only() {
        let text = "\t.file\t\"a.c\"\n\t.text\n.L8:\n\t.word\t2147483647\n\t.ident\t\"GCC: 11\"\n";
        assert_eq!(norm(text, IsaName::Armv5), ".text\n.L8:\n.word 2147483647\n");
    }

    #[test]
    fn whitespace_inside_strings_survives() {
        assert_eq!(canonical_whitespace("  .string\t\"a  b\"  "), ".string \"a  b\"");
        assert_eq!(canonical_whitespace(".ascii \"q\\\"  x\""), ".ascii \"q\\\"  x\"");
    }

    #[test]
    fn idempotent_on_compiler_output() {
        let text = "\t.text\n\t.globl\tf @ -- Begin\n\t.type\tf,%function\nf:\n\tsub\tsp, sp, #8\n\tstr\tr0, [sp, #4]\n\tbx\tlr\n\t.ident\t\"clang\"\n";
        let once = norm(text, IsaName::Armv5);
        assert_eq!(norm(&once, IsaName::Armv5), once);
    }

    #[test]
    fn ident_churn_is_invisible() {
        let body = "\t.text\n\t.globl\tf\nf:\n\tmovl\t$5, %eax\n\tret\n";
        let a = alloc::format!("\t.file\t\"a.c\"\n{body}\t.ident\t\"GCC: (Ubuntu 11.4.0) 11.4.0\"\n");
        let b = alloc::format!("\t.file\t\"a.c\"\n{body}\t.ident\t\"GCC: (Debian 12.2.0) 12.2.0\"\n# banner comment\n");
        assert_eq!(norm(&a, IsaName::X86_64), norm(&b, IsaName::X86_64));
    }

    #[test]
    fn raw_policy_is_identity() {
        let text = "@ c\n  mov r0,  #0\n";
        let u = parse_assembly(text, &IsaName::Armv5.isa(), "t");
        assert_eq!(normalize(&u, NormalizationPolicy::Raw), text);
    }
}
