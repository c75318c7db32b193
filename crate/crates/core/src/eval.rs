//! Evaluation records, suite aggregation and cross-run agreement.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestOutcome {
    Pass,
    TestFailed { failed_count: u32 },
    AssembleError,
    LinkError,
    RuntimeCrash { signal: String },
    Timeout,
    /// The backend produced nothing to run.
    NoCandidate,
}

impl TestOutcome {
    pub fn is_pass(&self) -> bool {
        matches!(self, TestOutcome::Pass)
    }

    pub fn label(&self) -> String {
        match self {
            TestOutcome::Pass => "pass".into(),
            TestOutcome::TestFailed { failed_count } => format!("test_failed({failed_count})"),
            TestOutcome::AssembleError => "assemble_error".into(),
            TestOutcome::LinkError => "link_error".into(),
            TestOutcome::RuntimeCrash { signal } => format!("runtime_crash({signal})"),
            TestOutcome::Timeout => "timeout".into(),
            TestOutcome::NoCandidate => "no_candidate".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorClass {
    RegisterAllocation,
    Addressing,
    Other,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 3] = [ErrorClass::RegisterAllocation, ErrorClass::Addressing, ErrorClass::Other];
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorClass::RegisterAllocation => "RegisterAllocation",
            ErrorClass::Addressing => "Addressing",
            ErrorClass::Other => "Other",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalResult {
    pub pair_id: String,
    pub backend_id: String,
    pub edit_distance: u64,
    pub line_edit_distance: u64,
    pub exact_match: bool,
    pub outcome: TestOutcome,
    pub error_class: Option<ErrorClass>,
    /// Beam index whose candidate decided the outcome; `None` without candidates.
    pub candidate_index_used: Option<u32>,
    pub latency_ms: u64,
    pub logs: String,
}

impl EvalResult {
    /// Checks the record-level invariants.
    pub fn check(&self) -> Result<(), &'static str> {
        if self.exact_match && self.edit_distance != 0 {
            return Err("exact match with non-zero edit distance");
        }
        if self.error_class.is_some() == self.outcome.is_pass() {
            return Err("error class must be present exactly when the outcome is not a pass");
        }
        Ok(())
    }
}

/// An exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub num: u64,
    pub den: u64,
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Self {
        Rate { num, den }
    }

    pub fn value(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }

    /// Percentage rounded half-up to `decimals` places using integer arithmetic.
    pub fn percent(&self, decimals: u32) -> String {
        if self.den == 0 {
            return String::from("n/a");
        }
        let scale = 10u128.pow(decimals);
        let scaled = self.num as u128 * 100 * scale;
        let den = self.den as u128;
        let mut q = scaled / den;
        if 2 * (scaled % den) >= den {
            q += 1;
        }
        if decimals == 0 {
            format!("{q}%")
        } else {
            format!("{}.{:0width$}%", q / scale, q % scale, width = decimals as usize)
        }
    }

    /// Fraction rounded half-up to `decimals` places, e.g. `0.768`.
    pub fn fraction(&self, decimals: u32) -> String {
        if self.den == 0 {
            return String::from("n/a");
        }
        let scale = 10u128.pow(decimals);
        let scaled = self.num as u128 * scale;
        let den = self.den as u128;
        let mut q = scaled / den;
        if 2 * (scaled % den) >= den {
            q += 1;
        }
        if decimals == 0 {
            format!("{q}")
        } else {
            format!("{}.{:0width$}", q / scale, q % scale, width = decimals as usize)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub n: u64,
    pub passes: u64,
    pub exact_matches: u64,
    pub total_edit_distance: u64,
    pub avg_edit_distance: f64,
    pub exact_match_rate: f64,
    pub test_accuracy: f64,
    pub error_class_histogram: BTreeMap<ErrorClass, u64>,
}

impl SuiteSummary {
    pub fn test_accuracy_rate(&self) -> Rate {
        Rate::new(self.passes, self.n)
    }

    pub fn exact_match_rate_exact(&self) -> Rate {
        Rate::new(self.exact_matches, self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    EmptySuite,
    /// The two result lists do not cover the same pair ids.
    MismatchedSuites { only_a: Vec<String>, only_b: Vec<String> },
    DuplicatePair(String),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::EmptySuite => f.write_str("no results to summarize"),
            EvalError::MismatchedSuites { only_a, only_b } => {
                write!(f, "result sets differ: {} ids only in A, {} only in B", only_a.len(), only_b.len())
            }
            EvalError::DuplicatePair(id) => write!(f, "pair id {id:?} appears more than once"),
        }
    }
}

impl core::error::Error for EvalError {}

pub fn summarize(results: &[EvalResult]) -> Result<SuiteSummary, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptySuite);
    }
    let n = results.len() as u64;
    let passes = results.iter().filter(|r| r.outcome.is_pass()).count() as u64;
    let exact_matches = results.iter().filter(|r| r.exact_match).count() as u64;
    let total_edit_distance: u64 = results.iter().map(|r| r.edit_distance).sum();
    let mut error_class_histogram: BTreeMap<ErrorClass, u64> = ErrorClass::ALL.iter().map(|c| (*c, 0)).collect();
    for class in results.iter().filter_map(|r| r.error_class) {
        *error_class_histogram.entry(class).or_default() += 1;
    }
    Ok(SuiteSummary {
        n,
        passes,
        exact_matches,
        total_edit_distance,
        avg_edit_distance: total_edit_distance as f64 / n as f64,
        exact_match_rate: exact_matches as f64 / n as f64,
        test_accuracy: passes as f64 / n as f64,
        error_class_histogram,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub both_pass: u64,
    pub both_fail: u64,
    pub a_only_fail: u64,
    pub b_only_fail: u64,
    pub agreement: Rate,
}

/// Pass/fail agreement between two runs over the same pairs.
pub fn confusion_matrix(results_a: &[EvalResult], results_b: &[EvalResult]) -> Result<ConfusionMatrix, EvalError> {
    let a = by_id(results_a)?;
    let b = by_id(results_b)?;
    let keys_a: BTreeSet<&str> = a.keys().copied().collect();
    let keys_b: BTreeSet<&str> = b.keys().copied().collect();
    if keys_a != keys_b {
        return Err(EvalError::MismatchedSuites {
            only_a: keys_a.difference(&keys_b).map(|s| String::from(*s)).collect(),
            only_b: keys_b.difference(&keys_a).map(|s| String::from(*s)).collect(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::EmptySuite);
    }
    let mut m = ConfusionMatrix { both_pass: 0, both_fail: 0, a_only_fail: 0, b_only_fail: 0, agreement: Rate::new(0, 0) };
    for (id, pass_a) in &a {
        match (*pass_a, b[id]) {
            (true, true) => m.both_pass += 1,
            (false, false) => m.both_fail += 1,
            (false, true) => m.a_only_fail += 1,
            (true, false) => m.b_only_fail += 1,
        }
    }
    m.agreement = Rate::new(m.both_pass + m.both_fail, a.len() as u64);
    Ok(m)
}

fn by_id(results: &[EvalResult]) -> Result<BTreeMap<&str, bool>, EvalError> {
    let mut map = BTreeMap::new();
    for r in results {
        if map.insert(r.pair_id.as_str(), r.outcome.is_pass()).is_some() {
            return Err(EvalError::DuplicatePair(r.pair_id.clone()));
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn result(id: &str, pass: bool) -> EvalResult {
        EvalResult {
            pair_id: id.into(),
            backend_id: "test".into(),
            edit_distance: if pass { 0 } else { 7 },
            line_edit_distance: if pass { 0 } else { 1 },
            exact_match: pass,
            outcome: if pass { TestOutcome::Pass } else { TestOutcome::TestFailed { failed_count: 1 } },
            error_class: if pass { None } else { Some(ErrorClass::Other) },
            candidate_index_used: Some(0),
            latency_ms: 0,
            logs: String::new(),
        }
    }

    #[test]
    fn rounding_is_exact() {
        assert_eq!(Rate::new(130, 164).percent(2), "79.27%");
        assert_eq!(Rate::new(126, 164).fraction(3), "0.768");
        assert_eq!(Rate::new(126, 164).percent(1), "76.8%");
        assert_eq!(Rate::new(1, 2).percent(0), "50%");
        assert_eq!(Rate::new(1, 8).percent(1), "12.5%");
        assert_eq!(Rate::new(1, 16).percent(1), "6.3%");
        assert_eq!(Rate::new(0, 3).percent(2), "0.00%");
        assert_eq!(Rate::new(3, 3).fraction(1), "1.0");
        assert_eq!(Rate::new(1, 0).percent(2), "n/a");
    }

    #[test]
    fn summary_counts() {
        let rs: Vec<_> = (0..164).map(|i| result(&format!("p{i:03}"), i < 130)).collect();
        let s = summarize(&rs).unwrap();
        assert_eq!(s.test_accuracy_rate(), Rate::new(130, 164));
        assert_eq!(s.error_class_histogram[&ErrorClass::Other], 34);
        assert_eq!(s.error_class_histogram[&ErrorClass::Addressing], 0);
        assert_eq!(summarize(&[]), Err(EvalError::EmptySuite));
    }

    #[test]
    fn agreement_from_unique_failures() {
        // 15 fail only under A, 23 only under B, the rest all pass
        let a: Vec<_> = (0..164).map(|i| result(&format!("p{i}"), !(i < 15))).collect();
        let b: Vec<_> = (0..164).map(|i| result(&format!("p{i}"), !((15..38).contains(&i)))).collect();
        let m = confusion_matrix(&a, &b).unwrap();
        assert_eq!((m.a_only_fail, m.b_only_fail, m.both_pass, m.both_fail), (15, 23, 126, 0));
        assert_eq!(m.agreement, Rate::new(126, 164));
        assert_eq!(m.agreement.fraction(3), "0.768");
    }

    #[test]
    fn mismatched_and_duplicate() {
        let a = [result("x", true)];
        let b = [result("y", true)];
        assert!(matches!(confusion_matrix(&a, &b), Err(EvalError::MismatchedSuites { .. })));
        let d = [result("x", true), result("x", false)];
        assert_eq!(confusion_matrix(&d, &a), Err(EvalError::DuplicatePair("x".into())));
    }

    #[test]
    fn record_invariants() {
        assert!(result("a", true).check().is_ok());
        assert!(result("a", false).check().is_ok());
        let mut bad = result("a", true);
        bad.edit_distance = 3;
        assert!(bad.check().is_err());
        let mut bad = result("a", false);
        bad.error_class = None;
        assert!(bad.check().is_err());
    }

    proptest! {
        #[test]
        fn identical_lists_fully_agree(passes in proptest::collection::vec(any::<bool>(), 1..50)) {
            let rs: Vec<_> = passes.iter().enumerate().map(|(i, p)| result(&format!("p{i}"), *p)).collect();
            let m = confusion_matrix(&rs, &rs).unwrap();
            prop_assert_eq!(m.agreement.num, m.agreement.den);
            prop_assert_eq!(m.a_only_fail + m.b_only_fail, 0);
        }

        #[test]
        fn summary_is_reproducible(passes in proptest::collection::vec(any::<bool>(), 1..50)) {
            let rs: Vec<_> = passes.iter().enumerate().map(|(i, p)| result(&format!("p{i}"), *p)).collect();
            let s = summarize(&rs).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.test_accuracy));
            prop_assert_eq!(s.passes as usize, passes.iter().filter(|p| **p).count());
            let failures: u64 = s.error_class_histogram.values().sum();
            prop_assert_eq!(failures, s.n - s.passes);
            let mut reversed = rs.clone();
            reversed.reverse();
            prop_assert_eq!(summarize(&reversed).unwrap(), s);
        }
    }
}
