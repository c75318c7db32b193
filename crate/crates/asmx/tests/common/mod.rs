#![allow(dead_code)]

use std::path::PathBuf;

use asmx::config::ToolchainConfig;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// The default clang + lld setup, emulating with the `uemu` built alongside the tests.
pub fn config() -> ToolchainConfig {
    ToolchainConfig::clang_default(env!("CARGO_BIN_EXE_uemu"))
}

pub fn asmx_bin() -> &'static str {
    env!("CARGO_BIN_EXE_asmx")
}
