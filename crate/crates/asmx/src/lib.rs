//! Cross-ISA assembly transpilation harness.
//!
//! Builds paired x86-64 → ARM/RISC-V corpora from C sources, drives
//! transpiler backends, and scores candidates by edit distance, exact match
//! and emulated unit tests. The pure pieces (parsing, tokenization, metrics,
//! segmentation, the rule translator) live in [`asmx_core`]; this crate adds
//! processes, files, HTTP and the command line.

pub mod backends;
pub mod bench;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod exec;
pub mod functional;
pub mod report;
pub mod runtime;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use asmx_core as core;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ *b as u64).wrapping_mul(0x100_0000_01b3))
}

pub(crate) fn unix_now() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub(crate) fn tmp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes via a sibling temp file and a rename, so readers never see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = tmp_sibling(path);
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    std::fs::rename(&tmp, path)
}
