//! Instruction-aware tokenizer.
//!
//! The extended vocabulary holds whole opcodes and register names so that
//! `ldr r1, r2` becomes `ldr`, ` `, `r1`, `,`, ` `, `r2` instead of a run of
//! sub-word pieces. Matching is greedy longest-first and only fires at
//! identifier boundaries, so `ldr` never matches inside `ldrb`.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::asmtext::{AssemblyUnit, OperandKind};
use crate::isa::IsaName;

/// Default number of mnemonics kept per vocabulary build.
pub const DEFAULT_TOP_K: usize = 512;

const VOCAB_MAGIC: &str = "# asmx-vocab 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// One token per character.
    ByteLevel,
    /// One token per identifier run, whitespace run, or punctuation character.
    CharClass,
}

impl Fallback {
    pub fn as_str(self) -> &'static str {
        match self {
            Fallback::ByteLevel => "byte",
            Fallback::CharClass => "char_class",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenizerError {
    EmptyCorpus,
    ZeroTopK,
    InvalidEntry(String),
    /// Malformed vocabulary file; line is 1-based.
    Format { line: usize, message: String },
}

impl fmt::Display for TokenizerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenizerError::EmptyCorpus => f.write_str("corpus is empty"),
            TokenizerError::ZeroTopK => f.write_str("top_k must be at least 1"),
            TokenizerError::InvalidEntry(e) => write!(f, "vocabulary entry {e:?} is empty or contains whitespace"),
            TokenizerError::Format { line, message } => write!(f, "vocabulary file line {line}: {message}"),
        }
    }
}

impl core::error::Error for TokenizerError {}

/// Identifier characters for the boundary rule.
pub fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizerSpec {
    isa_scope: BTreeSet<IsaName>,
    extended_entries: Vec<String>,
    base_fallback: Fallback,
    version: String,
    index: BTreeSet<String>,
    max_entry_chars: usize,
}

impl TokenizerSpec {
    /// Entries are deduplicated and put in greedy order (longest first, then lexicographic).
    pub fn new(
        isa_scope: BTreeSet<IsaName>,
        entries: impl IntoIterator<Item = String>,
        base_fallback: Fallback,
        version: impl Into<String>,
    ) -> Result<Self, TokenizerError> {
        let index: BTreeSet<String> = entries.into_iter().collect();
        if let Some(bad) = index.iter().find(|e| e.is_empty() || e.chars().any(char::is_whitespace)) {
            return Err(TokenizerError::InvalidEntry(bad.clone()));
        }
        let mut extended_entries: Vec<String> = index.iter().cloned().collect();
        extended_entries.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then_with(|| a.cmp(b)));
        let max_entry_chars = extended_entries.first().map(|e| e.chars().count()).unwrap_or(0);
        Ok(TokenizerSpec {
            isa_scope,
            extended_entries,
            base_fallback,
            version: version.into(),
            index,
            max_entry_chars,
        })
    }

    /// A spec with no extended entries: pure fallback tokenization.
    pub fn fallback_only(fallback: Fallback) -> Self {
        TokenizerSpec::new(BTreeSet::new(), Vec::new(), fallback, format!("base-{}", fallback.as_str()))
            .expect("empty vocabulary is valid")
    }

    pub fn isa_scope(&self) -> &BTreeSet<IsaName> {
        &self.isa_scope
    }

    pub fn extended_entries(&self) -> &[String] {
        &self.extended_entries
    }

    pub fn base_fallback(&self) -> Fallback {
        self.base_fallback
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn contains(&self, entry: &str) -> bool {
        self.index.contains(entry)
    }

    /// Same vocabulary plus `extra` entries; the version string is recomputed.
    pub fn extended_with(&self, extra: impl IntoIterator<Item = String>) -> Result<Self, TokenizerError> {
        let entries: Vec<String> = self.extended_entries.iter().cloned().chain(extra).collect();
        let version = vocab_version(&self.isa_scope, &entries, self.base_fallback);
        TokenizerSpec::new(self.isa_scope.clone(), entries, self.base_fallback, version)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<String>,
    pub source_len_chars: usize,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn concat(&self) -> String {
        self.tokens.concat()
    }
}

pub fn tokenize(text: &str, spec: &TokenizerSpec) -> TokenStream {
    let mut tokens = Vec::new();
    let source_len_chars = for_each_token(text, spec, |t| tokens.push(t.to_owned()));
    TokenStream { tokens, source_len_chars }
}

/// Token count without materializing the tokens.
pub fn count_tokens(text: &str, spec: &TokenizerSpec) -> usize {
    let mut n = 0;
    for_each_token(text, spec, |_| n += 1);
    n
}

/// Drives the tokenizer, returning the number of characters consumed.
fn for_each_token<'a>(text: &'a str, spec: &TokenizerSpec, mut emit: impl FnMut(&'a str)) -> usize {
    // byte offsets of each char, plus the end
    let offsets: Vec<usize> = text.char_indices().map(|(i, _)| i).chain(core::iter::once(text.len())).collect();
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut i = 0;
    while i < n {
        let at_boundary = i == 0 || !is_ident_char(chars[i - 1]);
        let mut matched = None;
        if at_boundary && spec.max_entry_chars > 0 {
            let longest = spec.max_entry_chars.min(n - i);
            for len in (1..=longest).rev() {
                let end = i + len;
                if end < n && is_ident_char(chars[end]) {
                    continue;
                }
                if spec.index.contains(&text[offsets[i]..offsets[end]]) {
                    matched = Some(end);
                    break;
                }
            }
        }
        let end = matched.unwrap_or_else(|| fallback_end(&chars, i, spec.base_fallback));
        emit(&text[offsets[i]..offsets[end]]);
        i = end;
    }
    n
}

fn fallback_end(chars: &[char], start: usize, fallback: Fallback) -> usize {
    match fallback {
        Fallback::ByteLevel => start + 1,
        Fallback::CharClass => {
            let class = |c: char| {
                if is_ident_char(c) {
                    0
                } else if c.is_whitespace() {
                    1
                } else {
                    2
                }
            };
            let first = class(chars[start]);
            if first == 2 {
                return start + 1;
            }
            let mut end = start + 1;
            while end < chars.len() && class(chars[end]) == first {
                end += 1;
            }
            end
        }
    }
}

/// Corpus-driven vocabulary: the `top_k` most frequent mnemonics plus every
/// register name observed, independent of corpus order.
pub fn build_vocab<'a>(
    corpus: impl IntoIterator<Item = &'a AssemblyUnit>,
    top_k: usize,
    fallback: Fallback,
) -> Result<TokenizerSpec, TokenizerError> {
    if top_k == 0 {
        return Err(TokenizerError::ZeroTopK);
    }
    let mut mnemonic_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut registers: BTreeSet<String> = BTreeSet::new();
    let mut scope = BTreeSet::new();
    let mut units = 0usize;
    for unit in corpus {
        units += 1;
        scope.insert(unit.isa);
        for (_, ins) in unit.instructions() {
            *mnemonic_counts.entry(ins.mnemonic.clone()).or_default() += 1;
            for op in &ins.operands {
                match &op.kind {
                    OperandKind::Register(_)
                    | OperandKind::RegisterList(_)
                    | OperandKind::Memory(_)
                    | OperandKind::Shift { .. } => {
                        registers.extend(op.registers().into_iter().map(ToString::to_string));
                    }
                    _ => {}
                }
            }
        }
    }
    if units == 0 {
        return Err(TokenizerError::EmptyCorpus);
    }
    let mut ranked: Vec<(String, usize)> = mnemonic_counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let entries: Vec<String> = ranked
        .into_iter()
        .take(top_k)
        .map(|(m, _)| m)
        .chain(registers)
        .filter(|e| !e.is_empty() && !e.chars().any(char::is_whitespace))
        .collect();
    let version = vocab_version(&scope, &entries, fallback);
    TokenizerSpec::new(scope, entries, fallback, version)
}

fn vocab_version(scope: &BTreeSet<IsaName>, entries: &[String], fallback: Fallback) -> String {
    let mut sorted: Vec<&String> = entries.iter().collect();
    sorted.sort();
    sorted.dedup();
    let mut h = Fnv1a::new();
    for isa in scope {
        h.write(isa.as_str().as_bytes());
        h.write(b",");
    }
    h.write(fallback.as_str().as_bytes());
    for e in sorted {
        h.write(b"\n");
        h.write(e.as_bytes());
    }
    format!("vocab-{:016x}", h.finish())
}

/// 1 − mean(extended tokens) / mean(base tokens) over the corpus.
pub fn token_reduction_ratio<'a>(
    corpus: impl IntoIterator<Item = &'a str>,
    base: &TokenizerSpec,
    extended: &TokenizerSpec,
) -> Result<f64, TokenizerError> {
    let mut items = 0usize;
    let mut base_total = 0usize;
    let mut ext_total = 0usize;
    for text in corpus {
        items += 1;
        base_total += count_tokens(text, base);
        ext_total += count_tokens(text, extended);
    }
    if items == 0 {
        return Err(TokenizerError::EmptyCorpus);
    }
    if base_total == 0 {
        return Ok(0.0);
    }
    // equal item counts cancel out of the two means
    Ok(1.0 - ext_total as f64 / base_total as f64)
}

/// Serializes a spec to the newline-delimited vocabulary file format.
pub fn to_vocab_file(spec: &TokenizerSpec) -> String {
    let scope: Vec<&str> = spec.isa_scope.iter().map(|i| i.as_str()).collect();
    let mut out = format!(
        "{VOCAB_MAGIC}\nversion: {}\nisa_scope: {}\nfallback: {}\n---\n",
        spec.version,
        scope.join(","),
        spec.base_fallback.as_str()
    );
    for e in &spec.extended_entries {
        out.push_str(e);
        out.push('\n');
    }
    out
}

pub fn parse_vocab_file(text: &str) -> Result<TokenizerSpec, TokenizerError> {
    let err = |line: usize, message: &str| TokenizerError::Format { line, message: message.to_owned() };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == VOCAB_MAGIC => {}
        _ => return Err(err(1, "missing `# asmx-vocab 1` header")),
    }
    let mut version = None;
    let mut scope = None;
    let mut fallback = None;
    let mut in_body = false;
    let mut entries = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if in_body {
            if !line.is_empty() {
                entries.push(line.to_owned());
            }
            continue;
        }
        if line.trim() == "---" {
            in_body = true;
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| err(n, "expected `key: value` header"))?;
        let value = value.trim();
        match key.trim() {
            "version" => version = Some(value.to_owned()),
            "isa_scope" => {
                let mut set = BTreeSet::new();
                for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    set.insert(name.parse::<IsaName>().map_err(|e| err(n, &e.to_string()))?);
                }
                scope = Some(set);
            }
            "fallback" => {
                fallback = Some(match value {
                    "byte" => Fallback::ByteLevel,
                    "char_class" => Fallback::CharClass,
                    _ => return Err(err(n, "fallback must be `byte` or `char_class`")),
                })
            }
            _ => return Err(err(n, "unknown header key")),
        }
    }
    if !in_body {
        return Err(err(text.lines().count().max(1), "missing `---` separator"));
    }
    let version = version.ok_or_else(|| err(1, "missing version"))?;
    let scope = scope.ok_or_else(|| err(1, "missing isa_scope"))?;
    let fallback = fallback.ok_or_else(|| err(1, "missing fallback"))?;
    TokenizerSpec::new(scope, entries, fallback, version)
}

/// FNV-1a, 64-bit.
pub(crate) struct Fnv1a(u64);

impl Fnv1a {
    pub(crate) fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}
