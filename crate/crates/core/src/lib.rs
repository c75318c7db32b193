//! Allocation-only core of the asmx transpilation harness.
//!
//! Everything here is pure: parsing and normalizing assembly text, the
//! instruction-aware tokenizer, translation-quality metrics, the failure
//! classifier, block-aware segmentation, the rule-based reference
//! translator and benchmark statistics. Process execution, file formats
//! and the CLI live in the `asmx` crate.

#![no_std]

extern crate alloc;

pub mod asmtext;
pub mod classify;
pub mod eval;
pub mod isa;
pub mod metrics;
pub mod params;
pub mod rules;
pub mod segment;
pub mod stats;
pub mod tokenizer;

pub use isa::{isa_registry, Isa, IsaName, SyntaxFamily};
pub use params::GenerationParams;
