//! Whole-suite evaluation through the real toolchain and emulator.

mod common;

use std::sync::Mutex;

use asmx::backends::{Backend, BackendError, Candidate, ReplayBackend, RuleBackend, TranspileRequest, TranspileResponse};
use asmx::core::asmtext::NormalizationPolicy;
use asmx::core::eval::{ErrorClass, TestOutcome};
use asmx::core::tokenizer::{Fallback, TokenizerSpec};
use asmx::core::{GenerationParams, IsaName};
use asmx::dataset::{load_eval_suite, TranspilePair};
use asmx::functional::{evaluate_pair, evaluate_suite};

fn suite(name: &str, target: IsaName) -> Vec<TranspilePair> {
    let spec = TokenizerSpec::fallback_only(Fallback::ByteLevel);
    load_eval_suite(&common::fixtures().join(name), target, &common::config(), &spec, 4).unwrap()
}

#[test]
fn ground_truth_replay_is_perfect_on_both_targets() {
    for target in [IsaName::Armv5, IsaName::Riscv64] {
        let pairs = suite("suite", target);
        assert!(pairs.len() >= 10);
        let backend = ReplayBackend::new(&pairs);
        let (results, s) = evaluate_suite(
            &pairs,
            &backend,
            &GenerationParams::default(),
            &common::config(),
            NormalizationPolicy::Normalized,
            4,
        )
        .unwrap();
        assert_eq!((s.passes, s.exact_matches, s.total_edit_distance), (s.n, s.n, 0), "{target}");
        assert_eq!(s.test_accuracy, 1.0);
        assert!(results.iter().all(|r| r.candidate_index_used == Some(0) && r.error_class.is_none()));
    }
}

#[test]
fn rule_backend_passes_its_subset() {
    let pairs = suite("rule_suite", IsaName::Armv5);
    assert!(pairs.len() >= 10);
    let (results, s) = evaluate_suite(
        &pairs,
        &RuleBackend,
        &GenerationParams::default(),
        &common::config(),
        NormalizationPolicy::Normalized,
        4,
    )
    .unwrap();
    let failed: Vec<_> = results.iter().filter(|r| !r.outcome.is_pass()).map(|r| (&r.pair_id, &r.logs)).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    assert_eq!(s.test_accuracy_rate().value(), 1.0);
    // the rule output is never the compiler's text
    assert_eq!(s.exact_matches, 0);
}

#[test]
fn results_come_back_in_suite_order() {
    let pairs = suite("suite", IsaName::Riscv64);
    let backend = ReplayBackend::new(&pairs);
    let (results, _) = evaluate_suite(
        &pairs,
        &backend,
        &GenerationParams::default(),
        &common::config(),
        NormalizationPolicy::Normalized,
        8,
    )
    .unwrap();
    let ids: Vec<_> = results.iter().map(|r| r.pair_id.clone()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

/// Serves fixed beams and records the requests it saw.
struct Scripted {
    beams: Vec<String>,
    seen: Mutex<Vec<u32>>,
}

impl Backend for Scripted {
    fn id(&self) -> &str {
        "scripted"
    }

    fn transpile(&self, req: &TranspileRequest) -> Result<TranspileResponse, BackendError> {
        self.seen.lock().unwrap().push(req.params.num_beams);
        let candidates = self
            .beams
            .iter()
            .take(req.params.num_beams as usize)
            .map(|t| Candidate { text: t.clone(), score: None })
            .collect();
        Ok(TranspileResponse { candidates, backend_id: "scripted".into(), latency_ms: 0 })
    }
}

#[test]
fn first_passing_beam_is_reported() {
    let pairs = suite("suite", IsaName::Armv5);
    let pair = pairs.iter().find(|p| p.pair_id == "fib").unwrap();
    let broken = "\t.text\n\t.globl\tfib\nfib:\n\tmov\tr0, #0\n\tbx\tlr\n".to_string();
    let backend = Scripted { beams: vec![broken.clone(), pair.target.raw.clone()], seen: Mutex::new(Vec::new()) };
    let cfg = common::config();

    let one = evaluate_pair(pair, &backend, &GenerationParams::default(), &cfg, NormalizationPolicy::Normalized).unwrap();
    assert_eq!(one.outcome, TestOutcome::TestFailed { failed_count: 3 });
    assert_eq!(one.candidate_index_used, Some(0));
    assert_eq!(one.error_class, Some(ErrorClass::Other));

    let two = evaluate_pair(pair, &backend, &GenerationParams::default().with_beams(2), &cfg, NormalizationPolicy::Normalized)
        .unwrap();
    assert_eq!(two.outcome, TestOutcome::Pass);
    assert_eq!(two.candidate_index_used, Some(1));
    // syntactic scores always describe beam 0
    assert_eq!(two.edit_distance, one.edit_distance);
    assert!(!two.exact_match);
    assert_eq!(*backend.seen.lock().unwrap(), vec![1, 2]);
}

#[test]
fn backend_errors_become_no_candidate() {
    struct Down;
    impl Backend for Down {
        fn id(&self) -> &str {
            "down"
        }
        fn transpile(&self, _: &TranspileRequest) -> Result<TranspileResponse, BackendError> {
            Err(BackendError::Unavailable("connection refused".into()))
        }
    }
    let pairs = suite("suite", IsaName::Riscv64);
    let r = evaluate_pair(&pairs[0], &Down, &GenerationParams::default(), &common::config(), NormalizationPolicy::Normalized)
        .unwrap();
    assert_eq!(r.outcome, TestOutcome::NoCandidate);
    assert_eq!(r.error_class, Some(ErrorClass::Other));
    assert!(r.logs.contains("connection refused"), "{}", r.logs);
}

#[test]
fn corrupted_branch_and_runaway_loop() {
    let pairs = suite("suite", IsaName::Armv5);
    let pair = pairs.iter().find(|p| p.pair_id == "gcd").unwrap();
    let cfg = common::config();
    let params = GenerationParams::default();

    // a branch retargeted to a label that does not exist fails to assemble
    let bad_branch = pair.target.raw.replacen("b\t.LBB0_", "b\t.Lnowhere", 1);
    assert_ne!(bad_branch, pair.target.raw);
    let backend = Scripted { beams: vec![bad_branch], seen: Mutex::new(Vec::new()) };
    let r = evaluate_pair(pair, &backend, &params, &cfg, NormalizationPolicy::Normalized).unwrap();
    assert!(matches!(r.outcome, TestOutcome::AssembleError | TestOutcome::LinkError), "{:?}\n{}", r.outcome, r.logs);
    assert!(r.edit_distance > 0);

    // a self-loop never exits; the run is killed at the time limit
    let mut cfg = cfg;
    cfg.timeout_run = 1.0;
    let spin = "\t.text\n\t.globl\tgcd\ngcd:\n.Lspin:\n\tb\t.Lspin\n".to_string();
    let backend = Scripted { beams: vec![spin], seen: Mutex::new(Vec::new()) };
    let r = evaluate_pair(pair, &backend, &params, &cfg, NormalizationPolicy::Normalized).unwrap();
    assert_eq!(r.outcome, TestOutcome::Timeout, "{}", r.logs);
    assert_eq!(r.error_class, Some(ErrorClass::Other));
}

#[test]
fn missing_test_file_is_a_layout_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("lonely")).unwrap();
    std::fs::write(dir.path().join("lonely/func.c"), "int f(void) { return 1; }\n").unwrap();
    let spec = TokenizerSpec::fallback_only(Fallback::ByteLevel);
    let err = load_eval_suite(dir.path(), IsaName::Armv5, &common::config(), &spec, 1).unwrap_err();
    assert!(err.to_string().contains("lonely: missing test.c"), "{err}");
}
