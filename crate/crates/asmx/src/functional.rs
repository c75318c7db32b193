//! Functional evaluation: assemble a candidate, link it with the pair's test
//! driver, run it under the configured emulator, and score whole suites.

use std::path::Path;

use asmx_core::asmtext::{parse_assembly, NormalizationPolicy};
use asmx_core::classify::classify_error;
use asmx_core::eval::{summarize, EvalError, EvalResult, SuiteSummary, TestOutcome};
use asmx_core::metrics::score_syntactic;
use asmx_core::{GenerationParams, IsaName};

use crate::backends::{Backend, TranspileRequest};
use crate::config::{ConfigError, Stage, ToolchainConfig, Vars};
use crate::dataset::{ordered_pool, TranspilePair};
use crate::exec::{self, SpawnError};
use crate::runtime;

/// Failures of the harness itself; these abort a run instead of scoring it.
#[derive(Debug, thiserror::Error)]
pub enum InfraError {
    #[error(transparent)]
    Spawn(#[from] SpawnError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(String),
    #[error("pair {0} has no test program")]
    MissingTest(String),
    #[error("pair {pair_id}: {what}")]
    Invariant { pair_id: String, what: &'static str },
    #[error("{0}")]
    Eval(String),
}

impl From<EvalError> for InfraError {
    fn from(e: EvalError) -> Self {
        InfraError::Eval(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionalRun {
    pub outcome: TestOutcome,
    pub logs: String,
}

fn signal_name(sig: i32) -> String {
    asmx_uemu::signal_abbrev(sig).map(str::to_string).unwrap_or_else(|| format!("SIG{sig}"))
}

/// Assembles, links and runs one candidate against `test_source`.
///
/// Commands run inside a private temp dir with relative file names, so the
/// captured logs do not depend on where that directory lives.
pub fn run_candidate(
    candidate: &str,
    target: IsaName,
    test_source: &Path,
    cfg: &ToolchainConfig,
) -> Result<FunctionalRun, InfraError> {
    cfg.require(target, &[Stage::Assemble, Stage::Link, Stage::Emulate])?;
    let io = |what: &str, e: std::io::Error| InfraError::Io(format!("{what}: {e}"));
    let work = tempfile::Builder::new().prefix("asmx-run-").tempdir().map_err(|e| io("temp dir", e))?;
    let dir = work.path();
    runtime::materialize(dir).map_err(|e| io("runtime", e))?;
    std::fs::write(dir.join("candidate.s"), candidate).map_err(|e| io("candidate.s", e))?;
    std::fs::copy(test_source, dir.join("test.c")).map_err(|e| io(&test_source.display().to_string(), e))?;

    let mut logs = String::new();
    let vars = Vars { input: Some("candidate.s"), output: Some("candidate.o"), runtime: Some(runtime::DIR), test: None };
    let out = exec::run(&cfg.command(target, Stage::Assemble, &vars)?, dir, cfg.compile_timeout())?;
    logs.push_str(&out.transcript());
    if !out.success() {
        return Ok(FunctionalRun { outcome: TestOutcome::AssembleError, logs });
    }
    let vars = Vars {
        input: Some("candidate.o"),
        output: Some("prog"),
        runtime: Some(runtime::DIR),
        test: Some("test.c"),
    };
    let out = exec::run(&cfg.command(target, Stage::Link, &vars)?, dir, cfg.compile_timeout())?;
    logs.push_str(&out.transcript());
    if !out.success() {
        return Ok(FunctionalRun { outcome: TestOutcome::LinkError, logs });
    }
    let vars = Vars { input: Some("./prog"), output: None, runtime: Some(runtime::DIR), test: None };
    let out = exec::run(&cfg.command(target, Stage::Emulate, &vars)?, dir, cfg.run_timeout())?;
    logs.push_str(&out.transcript());
    let outcome = if out.timed_out {
        TestOutcome::Timeout
    } else if let Some(sig) = out.signal() {
        TestOutcome::RuntimeCrash { signal: signal_name(sig) }
    } else {
        match out.code() {
            Some(0) => TestOutcome::Pass,
            Some(n) => TestOutcome::TestFailed { failed_count: n as u32 },
            None => TestOutcome::RuntimeCrash { signal: "unknown".into() },
        }
    };
    Ok(FunctionalRun { outcome, logs })
}

/// Runs `candidate_text` against the pair's test program.
pub fn run_functional(
    candidate_text: &str,
    pair: &TranspilePair,
    cfg: &ToolchainConfig,
) -> Result<FunctionalRun, InfraError> {
    let test = pair.test_source_path.as_deref().ok_or_else(|| InfraError::MissingTest(pair.pair_id.clone()))?;
    run_candidate(candidate_text, pair.target_isa, test, cfg)
}

/// Transpiles, scores and runs one pair.
pub fn evaluate_pair(
    pair: &TranspilePair,
    backend: &dyn Backend,
    params: &GenerationParams,
    cfg: &ToolchainConfig,
    policy: NormalizationPolicy,
) -> Result<EvalResult, InfraError> {
    let isa = pair.target_isa.isa();
    let req = TranspileRequest::new(pair.x86.normalized.clone(), pair.target_isa, *params);
    let (candidates, latency_ms, backend_note) = match backend.transpile(&req) {
        Ok(resp) => (resp.candidates.into_iter().map(|c| c.text).collect::<Vec<_>>(), resp.latency_ms, None),
        Err(e) => (Vec::new(), 0, Some(format!("backend error: {e}\n"))),
    };
    let first = candidates.first().map(String::as_str).unwrap_or("");
    let score = score_syntactic(first, &pair.target.raw, &isa, policy);
    let mut result = EvalResult {
        pair_id: pair.pair_id.clone(),
        backend_id: backend.id().to_string(),
        edit_distance: score.edit_distance as u64,
        line_edit_distance: score.line_edit_distance as u64,
        exact_match: score.exact_match,
        outcome: TestOutcome::NoCandidate,
        error_class: None,
        candidate_index_used: None,
        latency_ms,
        logs: backend_note.unwrap_or_else(|| "backend returned no candidates\n".into()),
    };
    if !candidates.is_empty() {
        let mut logs = String::new();
        let mut first_run = None;
        for (i, text) in candidates.iter().enumerate() {
            let run = run_functional(text, pair, cfg)?;
            logs.push_str(&format!("== candidate {i}: {} ==\n", run.outcome.label()));
            logs.push_str(&run.logs);
            if run.outcome.is_pass() {
                result.outcome = TestOutcome::Pass;
                result.candidate_index_used = Some(i as u32);
                first_run = None;
                break;
            }
            first_run.get_or_insert(run);
        }
        if let Some(run) = first_run {
            // no beam passed: beam 0 speaks for the pair
            result.error_class = Some(classify_error(&run.outcome, &run.logs, &parse_assembly(first, &isa, "candidate")));
            result.outcome = run.outcome;
            result.candidate_index_used = Some(0);
        }
        result.logs = logs;
    } else {
        result.error_class = Some(classify_error(&result.outcome, &result.logs, &parse_assembly("", &isa, "empty")));
    }
    result.check().map_err(|what| InfraError::Invariant { pair_id: pair.pair_id.clone(), what })?;
    Ok(result)
}

/// Evaluates every pair on `jobs` workers; results keep the input order.
pub fn evaluate_suite(
    pairs: &[TranspilePair],
    backend: &dyn Backend,
    params: &GenerationParams,
    cfg: &ToolchainConfig,
    policy: NormalizationPolicy,
    jobs: usize,
) -> Result<(Vec<EvalResult>, SuiteSummary), InfraError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptySuite.into());
    }
    let mut results = Vec::with_capacity(pairs.len());
    let mut err = None;
    ordered_pool(
        pairs,
        jobs,
        |p| evaluate_pair(p, backend, params, cfg, policy),
        |_, r| match r {
            Ok(r) => {
                results.push(r);
                true
            }
            Err(e) => {
                err = Some(e);
                false
            }
        },
    );
    if let Some(e) = err {
        return Err(e);
    }
    let summary = summarize(&results)?;
    Ok((results, summary))
}
