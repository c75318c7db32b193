//! Edit distance and exact match over normalized assembly.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::asmtext::{normalize, parse_assembly, NormalizationPolicy};
use crate::isa::Isa;

/// Levenshtein distance over arbitrary sequences.
///
/// O(|a|·|b|) time; one row of the shorter sequence's length plus one.
pub fn levenshtein_seq<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, x) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in short.iter().enumerate() {
            let above = row[j + 1];
            let cost = usize::from(x != y);
            row[j + 1] = (diag + cost).min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[short.len()]
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    if a == b {
        return 0;
    }
    if a.is_ascii() && b.is_ascii() {
        return levenshtein_seq(a.as_bytes(), b.as_bytes());
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_seq(&a, &b)
}

/// Levenshtein distance where each line is one symbol.
pub fn line_edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<&str> = a.lines().collect();
    let b: Vec<&str> = b.lines().collect();
    levenshtein_seq(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntacticScore {
    pub edit_distance: usize,
    pub exact_match: bool,
    pub line_edit_distance: usize,
}

/// Normalizes both texts under `policy` and compares them.
pub fn score_syntactic(candidate: &str, ground_truth: &str, isa: &Isa, policy: NormalizationPolicy) -> SyntacticScore {
    let c = normalize(&parse_assembly(candidate, isa, "candidate"), policy);
    let g = normalize(&parse_assembly(ground_truth, isa, "ground_truth"), policy);
    SyntacticScore {
        edit_distance: levenshtein(&c, &g),
        exact_match: c == g,
        line_edit_distance: line_edit_distance(&c, &g),
    }
}
