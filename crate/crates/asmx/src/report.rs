//! Result files (newline-delimited records) and human-readable tables.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use asmx_core::asmtext::NormalizationPolicy;
use asmx_core::eval::{summarize, ConfusionMatrix, ErrorClass, EvalResult, Rate, SuiteSummary};
use asmx_core::IsaName;
use serde::{Deserialize, Serialize};

pub const RESULT_SCHEMA: &str = "asmx.result/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub backend_id: String,
    pub target_isa: IsaName,
    pub num_beams: u32,
    pub policy: NormalizationPolicy,
    #[serde(flatten)]
    pub summary: SuiteSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Result(EvalResult),
    Summary(SummaryRecord),
}

#[derive(Serialize, Deserialize)]
struct Line {
    schema: String,
    #[serde(flatten)]
    record: Record,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{0}: no summary record")]
    NoSummary(String),
}

pub fn render_results(results: &[EvalResult], summary: &SummaryRecord) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&serde_json::to_string(&Line { schema: RESULT_SCHEMA.into(), record: Record::Result(r.clone()) }).expect("serializable"));
        out.push('\n');
    }
    let line = Line { schema: RESULT_SCHEMA.into(), record: Record::Summary(summary.clone()) };
    out.push_str(&serde_json::to_string(&line).expect("serializable"));
    out.push('\n');
    out
}

pub fn write_results(path: &Path, results: &[EvalResult], summary: &SummaryRecord) -> std::io::Result<()> {
    crate::atomic_write(path, render_results(results, summary).as_bytes())
}

pub fn read_results(path: &Path) -> Result<(Vec<EvalResult>, SummaryRecord), ReportError> {
    let p = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| ReportError::Read { path: p.clone(), message: e.to_string() })?;
    let mut results = Vec::new();
    let mut summary = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ReportError::Read { path: p.clone(), message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| ReportError::Parse { path: p.clone(), line: i + 1, message };
        let parsed: Line = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if parsed.schema != RESULT_SCHEMA {
            return Err(bad(format!("unsupported schema {:?}", parsed.schema)));
        }
        match parsed.record {
            Record::Result(r) => results.push(r),
            Record::Summary(s) => summary = Some(s),
        }
    }
    let summary = summary.ok_or(ReportError::NoSummary(p))?;
    Ok((results, summary))
}

/// True when the stored summary equals one recomputed from the stored results.
pub fn summary_consistent(results: &[EvalResult], summary: &SuiteSummary) -> bool {
    summarize(results).is_ok_and(|s| &s == summary)
}

fn pad(s: &str, w: usize) -> String {
    format!("{s:<w$}")
}

/// Table with the standard metric columns, one row per run.
pub fn render_table(runs: &[(String, SummaryRecord)]) -> String {
    let headers = ["Run", "Backend", "Target", "N", "Average Edit Distance", "Exact Match", "Test Accuracy"];
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (label, s) in runs {
        let sum = &s.summary;
        rows.push(vec![
            label.clone(),
            s.backend_id.clone(),
            s.target_isa.to_string(),
            sum.n.to_string(),
            format!("{:.2}", sum.avg_edit_distance),
            sum.exact_match_rate_exact().percent(2),
            sum.test_accuracy_rate().percent(2),
        ]);
    }
    let widths: Vec<usize> =
        (0..headers.len()).map(|c| rows.iter().map(|r| r[c].len()).chain([headers[c].len()]).max().unwrap_or(0)).collect();
    let mut out = String::new();
    let line = |cells: Vec<String>| cells.iter().zip(&widths).map(|(c, w)| pad(c, *w)).collect::<Vec<_>>().join(" | ");
    out.push_str(line(headers.iter().map(|h| h.to_string()).collect()).trim_end());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for r in rows {
        out.push_str(line(r).trim_end());
        out.push('\n');
    }
    out.push('\n');
    for (label, s) in runs {
        let failures: u64 = s.summary.error_class_histogram.values().sum();
        let _ = write!(out, "{label} failures: {failures}");
        for class in ErrorClass::ALL {
            let k = s.summary.error_class_histogram.get(&class).copied().unwrap_or(0);
            let _ = write!(out, "  {class} {k} ({})", Rate::new(k, failures).percent(2));
        }
        out.push('\n');
    }
    out
}

pub fn render_confusion(a: &str, b: &str, m: &ConfusionMatrix) -> String {
    format!(
        "{:<12} {:>10} {:>10}\n{:<12} {:>10} {:>10}\n{:<12} {:>10} {:>10}\nagreement: {}/{} = {}\n",
        format!("{a} \\ {b}"),
        "pass",
        "fail",
        "pass",
        m.both_pass,
        m.b_only_fail,
        "fail",
        m.a_only_fail,
        m.both_fail,
        m.agreement.num,
        m.agreement.den,
        m.agreement.percent(1),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use asmx_core::eval::{confusion_matrix, TestOutcome};

    fn result(id: &str, pass: bool) -> EvalResult {
        EvalResult {
            pair_id: id.into(),
            backend_id: "stub".into(),
            edit_distance: if pass { 0 } else { 7 },
            line_edit_distance: if pass { 0 } else { 1 },
            exact_match: pass,
            outcome: if pass { TestOutcome::Pass } else { TestOutcome::RuntimeCrash { signal: "SIGSEGV".into() } },
            error_class: if pass { None } else { Some(ErrorClass::Addressing) },
            candidate_index_used: Some(0),
            latency_ms: 3,
            logs: String::new(),
        }
    }

    fn record(results: &[EvalResult]) -> SummaryRecord {
        SummaryRecord {
            backend_id: "stub".into(),
            target_isa: IsaName::Armv5,
            num_beams: 1,
            policy: NormalizationPolicy::Normalized,
            summary: summarize(results).unwrap(),
        }
    }

    #[test]
    fn round_trip() {
        let results: Vec<_> = (0..5).map(|i| result(&format!("p{i}"), i % 2 == 0)).collect();
        let s = record(&results);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.ndjson");
        write_results(&p, &results, &s).unwrap();
        let (r2, s2) = read_results(&p).unwrap();
        assert_eq!(r2, results);
        assert_eq!(s2, s);
        assert!(summary_consistent(&r2, &s2.summary));
    }

    #[test]
    fn table_has_metric_columns() {
        let results: Vec<_> = (0..164).map(|i| result(&format!("p{i:03}"), i < 130)).collect();
        let t = render_table(&[("arm".into(), record(&results))]);
        let header = t.lines().next().unwrap();
        for col in ["Average Edit Distance", "Exact Match", "Test Accuracy"] {
            assert!(header.contains(col), "{header}");
        }
        assert!(t.contains("79.27%"), "{t}");
        assert!(t.contains("Addressing 34 (100.00%)"), "{t}");
    }

    #[test]
    fn confusion_rendering() {
        let a: Vec<_> = (0..4).map(|i| result(&format!("p{i}"), i != 0)).collect();
        let b: Vec<_> = (0..4).map(|i| result(&format!("p{i}"), i != 1)).collect();
        let m = confusion_matrix(&a, &b).unwrap();
        let t = render_confusion("A", "B", &m);
        assert!(t.contains("agreement: 2/4 = 50.0%"), "{t}");
    }
}
