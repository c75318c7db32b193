//! Block-aware segmentation of long functions into token-budgeted windows.
//!
//! A block starts at each label definition. Whole blocks are packed greedily;
//! a block larger than the budget is cut between lines and its pieces carry
//! `violation = true`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::asmtext::{AssemblyUnit, Line, LineKind};
use crate::tokenizer::{count_tokens, TokenizerSpec};

/// Default window, matching a 1024-token encoder context.
pub const DEFAULT_BUDGET: usize = 1024;

/// Function name used when a unit declares no functions.
pub const WHOLE_UNIT: &str = "<unit>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub function_name: String,
    pub index: usize,
    pub lines: Vec<Line>,
    pub token_count: usize,
    /// Label opening this segment, or the function name at function start.
    pub leading_label: Option<String>,
    /// Label opening the next segment; `None` at function end.
    pub trailing_label: Option<String>,
    /// Set when the segment splits a block that alone exceeds the budget.
    pub violation: bool,
}

impl Segment {
    pub fn text(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(&l.text_normalized);
            s.push('\n');
        }
        s
    }
}

/// Tokens for one line plus its newline.
pub fn line_tokens(line: &Line, spec: &TokenizerSpec) -> usize {
    count_tokens(&line.text_normalized, spec) + 1
}

pub fn segment_unit(unit: &AssemblyUnit, spec: &TokenizerSpec, budget: usize) -> Vec<Segment> {
    let mut out = Vec::new();
    if unit.functions.is_empty() {
        if !unit.lines.is_empty() {
            segment_lines(WHOLE_UNIT, &unit.lines, spec, budget, &mut out);
        }
        return out;
    }
    for f in &unit.functions {
        segment_lines(&f.name, unit.function_lines(f), spec, budget, &mut out);
    }
    out
}

fn segment_lines(name: &str, lines: &[Line], spec: &TokenizerSpec, budget: usize, out: &mut Vec<Segment>) {
    let costs: Vec<usize> = lines.iter().map(|l| line_tokens(l, spec)).collect();
    // block = [start, end)
    let mut blocks = Vec::new();
    let mut start = 0;
    for (i, l) in lines.iter().enumerate() {
        if i > start && l.kind == LineKind::Label {
            blocks.push((start, i));
            start = i;
        }
    }
    if start < lines.len() {
        blocks.push((start, lines.len()));
    }

    // (start, end, violation)
    let mut pieces: Vec<(usize, usize, bool)> = Vec::new();
    let mut open: Option<(usize, usize, usize)> = None; // start, end, tokens
    for (bs, be) in blocks {
        let cost: usize = costs[bs..be].iter().sum();
        if cost > budget {
            if let Some((s, e, _)) = open.take() {
                pieces.push((s, e, false));
            }
            let mut s = bs;
            let mut acc = 0;
            for i in bs..be {
                if i > s && acc + costs[i] > budget {
                    pieces.push((s, i, true));
                    s = i;
                    acc = 0;
                }
                acc += costs[i];
            }
            pieces.push((s, be, true));
            continue;
        }
        open = match open {
            Some((s, _, t)) if t + cost <= budget => Some((s, be, t + cost)),
            Some((s, e, _)) => {
                pieces.push((s, e, false));
                Some((bs, be, cost))
            }
            None => Some((bs, be, cost)),
        };
    }
    if let Some((s, e, _)) = open {
        pieces.push((s, e, false));
    }

    let label_at = |i: usize| -> Option<String> {
        lines.get(i).and_then(|l| if l.kind == LineKind::Label { l.label.clone() } else { None })
    };
    let first = out.len();
    for (k, (s, e, violation)) in pieces.iter().copied().enumerate() {
        let leading_label = if k == 0 { Some(String::from(name)) } else { label_at(s) };
        out.push(Segment {
            function_name: String::from(name),
            index: k,
            lines: lines[s..e].to_vec(),
            token_count: costs[s..e].iter().sum(),
            leading_label,
            trailing_label: if e < lines.len() { label_at(e) } else { None },
            violation,
        });
    }
    debug_assert!(out[first..].iter().all(|s| s.violation || s.token_count <= budget));
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedSegmentPair {
    pub source: Segment,
    pub target: Segment,
    pub function_name: String,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmatchedTail {
    pub function_name: String,
    pub side: Side,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub pairs: Vec<AlignedSegmentPair>,
    pub unmatched: Vec<UnmatchedTail>,
}

/// Pairs segments by (function name, index) and reports whatever is left over.
pub fn align_pairs(source: &[Segment], target: &[Segment]) -> Alignment {
    let group = |segs: &[Segment]| {
        let mut order: Vec<String> = Vec::new();
        let mut map: BTreeMap<String, Vec<Segment>> = BTreeMap::new();
        for s in segs {
            if !map.contains_key(&s.function_name) {
                order.push(s.function_name.clone());
            }
            map.entry(s.function_name.clone()).or_default().push(s.clone());
        }
        for v in map.values_mut() {
            v.sort_by_key(|s| s.index);
        }
        (order, map)
    };
    let (src_order, src) = group(source);
    let (tgt_order, tgt) = group(target);
    let mut names = src_order;
    names.extend(tgt_order.into_iter().filter(|n| !src.contains_key(n)));

    let empty = Vec::new();
    let mut out = Alignment::default();
    for name in names {
        let s = src.get(&name).unwrap_or(&empty);
        let t = tgt.get(&name).unwrap_or(&empty);
        let common = s.len().min(t.len());
        for k in 0..common {
            out.pairs.push(AlignedSegmentPair {
                source: s[k].clone(),
                target: t[k].clone(),
                function_name: name.clone(),
                index: k,
            });
        }
        for (side, longer) in [(Side::Source, s), (Side::Target, t)] {
            if longer.len() > common {
                out.unmatched.push(UnmatchedTail {
                    function_name: name.clone(),
                    side,
                    indices: longer[common..].iter().map(|x| x.index).collect(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asmtext::parse_assembly;
    use crate::isa::IsaName;
    use crate::tokenizer::Fallback;
    use alloc::format;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn byte_spec() -> TokenizerSpec {
        TokenizerSpec::fallback_only(Fallback::ByteLevel)
    }

    /// A block costing exactly `tokens` under byte fallback:
    /// label line (len + 2) plus `mov r0, r1` (11) and `bx lr` (6) lines.
    fn block(label: &str, tokens: usize) -> String {
        let body = tokens - (label.len() + 2);
        let bx = (0..11).find(|b| (body - 6 * b) % 11 == 0).expect("representable size");
        let mut s = format!("{label}:\n");
        for _ in 0..(body - 6 * bx) / 11 {
            s.push_str("mov r0, r1\n");
        }
        for _ in 0..bx {
            s.push_str("bx lr\n");
        }
        s
    }

    fn func(blocks: &[String]) -> AssemblyUnit {
        let mut text = String::from("\t.globl f\n\t.type f, %function\n");
        for b in blocks {
            text.push_str(b);
        }
        text.push_str("\t.size f, .-f\n");
        parse_assembly(&text, &IsaName::Armv5.isa(), "t")
    }

    #[test]
    fn fits_in_one() {
        let u = func(&[block("f", 25)]);
        let segs = segment_unit(&u, &byte_spec(), 1024);
        assert_eq!(segs.len(), 1);
        assert!(!segs[0].violation);
    }

    #[test]
    fn packs_two_of_three() {
        // the trailing `.size f, .-f` line (13 tokens) belongs to the last block
        let u = func(&[block("f", 400), block(".L1", 400), block(".L2", 387)]);
        let spec = byte_spec();
        let costs: Vec<usize> = u.function_lines(&u.functions[0]).iter().map(|l| line_tokens(l, &spec)).collect();
        assert_eq!(costs.iter().sum::<usize>(), 1200);
        let segs = segment_unit(&u, &spec, 1024);
        assert_eq!(segs.len(), 2);
        assert_eq!((segs[0].token_count, segs[1].token_count), (800, 400));
        assert_eq!(segs[0].leading_label.as_deref(), Some("f"));
        assert_eq!(segs[0].trailing_label.as_deref(), Some(".L2"));
        assert_eq!(segs[1].lines[0].label.as_deref(), Some(".L2"));
        assert!(segs.iter().all(|s| !s.violation));
    }

    #[test]
    fn oversized_block_is_split_with_flag() {
        let big = block("f", 1487); // 1500 with the .size line
        let u = func(&[big]);
        let segs = segment_unit(&u, &byte_spec(), 1024);
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(|s| s.violation));
        assert!(segs.iter().all(|s| s.token_count <= 1024));
    }

    #[test]
    fn token_count_matches_joined_text() {
        let text = "\t.globl f\n\t.type f, %function\nf:\n\tldr r1, [fp, #-8]\n.L2:\n\tbx lr\n\t.size f, .-f\n";
        let u = parse_assembly(text, &IsaName::Armv5.isa(), "t");
        let spec = crate::tokenizer::TokenizerSpec::new(
            Default::default(),
            ["ldr", "r1", "fp", "bx", "lr"].iter().map(|s| String::from(*s)),
            Fallback::CharClass,
            "v",
        )
        .unwrap();
        for s in segment_unit(&u, &spec, 5) {
            assert_eq!(s.token_count, count_tokens(&s.text(), &spec));
        }
    }

    #[test]
    fn no_functions_means_whole_unit() {
        let u = parse_assembly("mov r0, #1\nbx lr\n", &IsaName::Armv5.isa(), "t");
        let segs = segment_unit(&u, &byte_spec(), 1024);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].function_name, WHOLE_UNIT);
        assert!(segment_unit(&parse_assembly("", &IsaName::Armv5.isa(), "t"), &byte_spec(), 8).is_empty());
    }

    fn seg(name: &str, index: usize) -> Segment {
        Segment {
            function_name: name.into(),
            index,
            lines: Vec::new(),
            token_count: 0,
            leading_label: None,
            trailing_label: None,
            violation: false,
        }
    }

    #[test]
    fn alignment_reports_tails() {
        let src = [seg("f", 0), seg("f", 1), seg("f", 2), seg("g", 0)];
        let tgt = [seg("f", 0), seg("f", 1), seg("g", 0), seg("h", 0)];
        let a = align_pairs(&src, &tgt);
        assert_eq!(a.pairs.len(), 3);
        assert_eq!(
            a.unmatched,
            [
                UnmatchedTail { function_name: "f".into(), side: Side::Source, indices: alloc::vec![2] },
                UnmatchedTail { function_name: "h".into(), side: Side::Target, indices: alloc::vec![0] },
            ]
        );
        let same = align_pairs(&src, &src);
        assert_eq!(same.pairs.len(), 4);
        assert!(same.unmatched.is_empty());
    }

    #[test]
    fn cross_isa_single_function_pair() {
        let x86 = "\t.globl\tadd2\n\t.type\tadd2, @function\nadd2:\n\tpushq\t%rbp\n\tmovq\t%rsp, %rbp\n\tmovl\t%edi, -4(%rbp)\n\tmovl\t%esi, -8(%rbp)\n\tmovl\t-4(%rbp), %edx\n\tmovl\t-8(%rbp), %eax\n\taddl\t%edx, %eax\n\tpopq\t%rbp\n\tret\n\t.size\tadd2, .-add2\n";
        let arm = "\t.globl\tadd2\n\t.type\tadd2, %function\nadd2:\n\tstr\tfp, [sp, #-4]!\n\tadd\tfp, sp, #0\n\tsub\tsp, sp, #12\n\tstr\tr0, [fp, #-8]\n\tstr\tr1, [fp, #-12]\n\tldr\tr2, [fp, #-8]\n\tldr\tr3, [fp, #-12]\n\tadd\tr3, r2, r3\n\tmov\tr0, r3\n\tadd\tsp, fp, #0\n\tldr\tfp, [sp], #4\n\tbx\tlr\n\t.size\tadd2, .-add2\n";
        let spec = byte_spec();
        let s = segment_unit(&parse_assembly(x86, &IsaName::X86_64.isa(), "x"), &spec, 1024);
        let t = segment_unit(&parse_assembly(arm, &IsaName::Armv5.isa(), "a"), &spec, 1024);
        let a = align_pairs(&s, &t);
        assert_eq!(a.pairs.len(), 1);
        assert!(a.unmatched.is_empty());
    }

    fn random_function() -> impl Strategy<Value = String> {
        let line = prop_oneof![
            3 => Just("\tmov r0, r1".to_string()),
            2 => Just("\tldr r2, [fp, #-8]".to_string()),
            1 => (0u32..50).prop_map(|n| format!(".L{n}:")),
            1 => Just("\t@ note".to_string()),
            1 => Just(String::new()),
        ];
        proptest::collection::vec(line, 0..80).prop_map(|ls| {
            let mut t = String::from("\t.globl f\n\t.type f, %function\nf:\n");
            for l in ls {
                t.push_str(&l);
                t.push('\n');
            }
            t.push_str("\t.size f, .-f\n");
            t
        })
    }

    proptest! {
        #[test]
        fn reconstruction_and_budget(text in random_function(), budget in 1usize..200) {
            let u = parse_assembly(&text, &IsaName::Armv5.isa(), "p");
            let segs = segment_unit(&u, &byte_spec(), budget);
            let rebuilt: Vec<Line> = segs.iter().flat_map(|s| s.lines.iter().cloned()).collect();
            let expected: Vec<Line> = u.functions.iter().flat_map(|f| u.function_lines(f).iter().cloned()).collect();
            prop_assert_eq!(rebuilt, expected);
            for s in &segs {
                prop_assert!(s.violation || s.token_count <= budget);
                prop_assert!(!s.lines.is_empty());
            }
            prop_assert_eq!(segment_unit(&u, &byte_spec(), budget), segs);
        }
    }
}
