//! Failure taxonomy: addressing, register allocation, everything else.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::asmtext::{static_register_profile, AssemblyUnit};
use crate::eval::{ErrorClass, TestOutcome};

const BUILTIN_RULES: &str = include_str!("../data/classifier_rules.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifierRules {
    pub version: String,
    pub addressing_signals: Vec<String>,
    pub addressing_text: Vec<String>,
    pub register_signals: Vec<String>,
    pub register_text: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RulesParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RulesParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "classifier rules line {}: {}", self.line, self.message)
    }
}

impl core::error::Error for RulesParseError {}

impl ClassifierRules {
    pub fn builtin() -> Self {
        ClassifierRules::parse(BUILTIN_RULES).expect("shipped classifier rules parse")
    }

    pub fn parse(text: &str) -> Result<Self, RulesParseError> {
        let mut rules = ClassifierRules {
            version: String::new(),
            addressing_signals: Vec::new(),
            addressing_text: Vec::new(),
            register_signals: Vec::new(),
            register_text: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| RulesParseError { line: i + 1, message: m.to_owned() };
            if let Some(v) = line.strip_prefix("version ") {
                rules.version = v.trim().to_owned();
                continue;
            }
            let mut parts = line.splitn(3, ' ');
            let (class, kind, pattern) = match (parts.next(), parts.next(), parts.next()) {
                (Some(c), Some(k), Some(p)) if !p.trim().is_empty() => (c, k, p.trim()),
                _ => return Err(err("expected `<class> <signal|text> <pattern>`")),
            };
            let target = match (class, kind) {
                ("addressing", "signal") => &mut rules.addressing_signals,
                ("addressing", "text") => &mut rules.addressing_text,
                ("register", "signal") => &mut rules.register_signals,
                ("register", "text") => &mut rules.register_text,
                _ => return Err(err("class must be addressing|register and kind signal|text")),
            };
            target.push(if kind == "text" { pattern.to_lowercase() } else { pattern.to_owned() });
        }
        if rules.version.is_empty() {
            return Err(RulesParseError { line: 1, message: "missing version line".into() });
        }
        Ok(rules)
    }
}

/// Cascade: memory fault, then register misuse, then other. Total over non-pass outcomes.
pub fn classify_error(outcome: &TestOutcome, logs: &str, candidate: &AssemblyUnit) -> ErrorClass {
    classify_error_with(&ClassifierRules::builtin(), outcome, logs, candidate)
}

pub fn classify_error_with(
    rules: &ClassifierRules,
    outcome: &TestOutcome,
    logs: &str,
    candidate: &AssemblyUnit,
) -> ErrorClass {
    let signal = match outcome {
        TestOutcome::RuntimeCrash { signal } => Some(signal.as_str()),
        _ => None,
    };
    let logs = logs.to_lowercase();
    let hit = |signals: &[String], text: &[String]| {
        signal.is_some_and(|s| signals.iter().any(|x| x == s)) || text.iter().any(|p| logs.contains(p.as_str()))
    };
    if hit(&rules.addressing_signals, &rules.addressing_text) {
        return ErrorClass::Addressing;
    }
    if hit(&rules.register_signals, &rules.register_text) {
        return ErrorClass::RegisterAllocation;
    }
    if static_register_profile(candidate).values().any(|u| !u.overwrite_without_read_lines.is_empty()) {
        return ErrorClass::RegisterAllocation;
    }
    ErrorClass::Other
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asmtext::parse_assembly;
    use crate::isa::IsaName;

    fn arm(text: &str) -> AssemblyUnit {
        parse_assembly(text, &IsaName::Armv5.isa(), "c")
    }

    const CLEAN: &str = "f:\n\tldr r2, [fp, #-8]\n\tmov r0, r2\n\tbx lr\n";

    #[test]
    fn builtin_rules_parse() {
        let r = ClassifierRules::builtin();
        assert_eq!(r.version, "1");
        assert!(r.addressing_signals.contains(&"SIGSEGV".into()));
    }

    #[test]
    fn segv_is_addressing() {
        let crash = TestOutcome::RuntimeCrash { signal: "SIGSEGV".into() };
        assert_eq!(classify_error(&crash, "uemu: Invalid address 0x0", &arm(CLEAN)), ErrorClass::Addressing);
        // the signal alone is enough
        assert_eq!(classify_error(&crash, "", &arm(CLEAN)), ErrorClass::Addressing);
    }

    #[test]
    fn clobber_is_register_allocation() {
        let pred = arm("f:\n\tldr r0, [fp, #-8]\n\tldr r0, [r3, r1, lsl #2]\n\tmul r0, r0, r1\n");
        let out = TestOutcome::TestFailed { failed_count: 1 };
        assert_eq!(classify_error(&out, "", &pred), ErrorClass::RegisterAllocation);
    }

    #[test]
    fn addressing_wins_over_register() {
        let pred = arm("f:\n\tmov r3, r0\n\tmov r3, r1\n");
        let crash = TestOutcome::RuntimeCrash { signal: "SIGSEGV".into() };
        assert_eq!(classify_error(&crash, "", &pred), ErrorClass::Addressing);
    }

    #[test]
    fn fpe_and_timeouts_are_other() {
        let fpe = TestOutcome::RuntimeCrash { signal: "SIGFPE".into() };
        assert_eq!(classify_error(&fpe, "uncaught target signal 8 (Floating point exception)", &arm(CLEAN)), ErrorClass::Other);
        assert_eq!(classify_error(&TestOutcome::Timeout, "", &arm(CLEAN)), ErrorClass::Other);
        assert_eq!(classify_error(&TestOutcome::NoCandidate, "", &arm("")), ErrorClass::Other);
    }

    #[test]
    fn assembler_register_diagnostic() {
        let out = TestOutcome::AssembleError;
        let log = "cand.s:4: Error: Rd and Rm should be different in mul";
        assert_eq!(classify_error(&out, log, &arm(CLEAN)), ErrorClass::RegisterAllocation);
    }

    #[test]
    fn malformed_rules() {
        assert!(ClassifierRules::parse("addressing signal SIGSEGV\n").is_err());
        assert!(ClassifierRules::parse("version 1\nmemory text x\n").is_err());
        assert!(ClassifierRules::parse("version 1\naddressing text\n").is_err());
    }
}
