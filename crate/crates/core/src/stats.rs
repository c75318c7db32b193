//! Benchmark aggregation by geometric mean and cross-mode ratios.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum StatsError {
    Empty,
    NonPositive(f64),
    AllRunsFailed { runs: usize },
    MissingBaseline(String),
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::Empty => f.write_str("geometric mean of an empty list"),
            StatsError::NonPositive(x) => write!(f, "geometric mean needs positive values, got {x}"),
            StatsError::AllRunsFailed { runs } => write!(f, "all {runs} runs exited non-zero"),
            StatsError::MissingBaseline(m) => write!(f, "baseline mode {m:?} not among the summaries"),
        }
    }
}

impl core::error::Error for StatsError {}

/// exp(mean(ln x)).
pub fn geomean(xs: &[f64]) -> Result<f64, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut acc = 0.0;
    for &x in xs {
        if !(x > 0.0) || !x.is_finite() {
            return Err(StatsError::NonPositive(x));
        }
        acc += libm::log(x);
    }
    // the log/exp round trip is not exact; a constant list is its own mean
    if xs.iter().all(|x| *x == xs[0]) {
        return Ok(xs[0]);
    }
    Ok(libm::exp(acc / xs.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSample {
    pub wall_time: f64,
    pub max_rss: u64,
    pub exit_code: i32,
    /// Energy reported by the optional sampler hook, in its own units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
}

impl BenchSample {
    pub fn is_valid(&self) -> bool {
        self.exit_code == 0 && self.wall_time > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub mode: String,
    pub requested_runs: usize,
    pub n_valid: usize,
    pub n_failed: usize,
    pub geomean_time: f64,
    pub geomean_rss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geomean_energy: Option<f64>,
    pub samples: Vec<BenchSample>,
}

/// Aggregates valid samples; failures are counted but excluded.
pub fn summarize_samples(mode: &str, samples: Vec<BenchSample>) -> Result<BenchSummary, StatsError> {
    let valid: Vec<&BenchSample> = samples.iter().filter(|s| s.is_valid()).collect();
    if valid.is_empty() {
        return Err(StatsError::AllRunsFailed { runs: samples.len() });
    }
    let times: Vec<f64> = valid.iter().map(|s| s.wall_time).collect();
    // a zero RSS report would poison the log; floor at one byte
    let rss: Vec<f64> = valid.iter().map(|s| s.max_rss.max(1) as f64).collect();
    let energy: Option<Vec<f64>> = valid.iter().map(|s| s.energy.filter(|e| *e > 0.0)).collect();
    Ok(BenchSummary {
        mode: String::from(mode),
        requested_runs: samples.len(),
        n_valid: valid.len(),
        n_failed: samples.len() - valid.len(),
        geomean_time: geomean(&times)?,
        geomean_rss: geomean(&rss)?,
        geomean_energy: match energy {
            Some(e) => Some(geomean(&e)?),
            None => None,
        },
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRatio {
    pub mode: String,
    /// baseline time / mode time; above 1 means faster than the baseline.
    pub speedup: f64,
    /// baseline rss / mode rss; above 1 means leaner than the baseline.
    pub memory_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_ratio: Option<f64>,
}

pub fn compare_modes(summaries: &[BenchSummary], baseline_mode: &str) -> Result<Vec<ModeRatio>, StatsError> {
    let base = summaries
        .iter()
        .find(|s| s.mode == baseline_mode)
        .ok_or_else(|| StatsError::MissingBaseline(String::from(baseline_mode)))?;
    Ok(summaries
        .iter()
        .map(|s| ModeRatio {
            mode: s.mode.clone(),
            speedup: base.geomean_time / s.geomean_time,
            memory_ratio: base.geomean_rss / s.geomean_rss,
            energy_ratio: match (base.geomean_energy, s.geomean_energy) {
                (Some(b), Some(m)) => Some(b / m),
                _ => None,
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn closed_forms() {
        assert!(close(geomean(&[1.0, 1.0, 1.0]).unwrap(), 1.0));
        assert!(close(geomean(&[2.0, 8.0]).unwrap(), 4.0));
        assert!(close(geomean(&[3.0, 9.0, 27.0]).unwrap(), 9.0));
        assert_eq!(geomean(&[]), Err(StatsError::Empty));
        assert_eq!(geomean(&[1.0, 0.0]), Err(StatsError::NonPositive(0.0)));
        assert_eq!(geomean(&[-2.0]), Err(StatsError::NonPositive(-2.0)));
    }

    fn summary(mode: &str, time: f64, rss: u64) -> BenchSummary {
        summarize_samples(mode, vec![BenchSample { wall_time: time, max_rss: rss, exit_code: 0, energy: None }]).unwrap()
    }

    #[test]
    fn single_run_is_its_own_mean() {
        let s = summary("native", 0.25, 4096);
        assert_eq!(s.geomean_time, 0.25);
        assert_eq!(s.geomean_rss, 4096.0);
        assert_eq!(s.n_valid, 1);
    }

    #[test]
    fn failures_are_excluded() {
        let samples = vec![
            BenchSample { wall_time: 0.1, max_rss: 10, exit_code: 0, energy: None },
            BenchSample { wall_time: 9.0, max_rss: 99, exit_code: 1, energy: None },
        ];
        let s = summarize_samples("m", samples).unwrap();
        assert_eq!((s.n_valid, s.n_failed, s.requested_runs), (1, 1, 2));
        assert_eq!(s.geomean_time, 0.1);
        let bad = vec![BenchSample { wall_time: 0.1, max_rss: 10, exit_code: 3, energy: None }];
        assert_eq!(summarize_samples("m", bad), Err(StatsError::AllRunsFailed { runs: 1 }));
    }

    #[test]
    fn ratios() {
        let slow = summary("emulated", 1.73, 2_490_000);
        let fast = summary("native", 1.00, 1_034_000);
        let r = compare_modes(&[slow.clone(), fast.clone()], "emulated").unwrap();
        assert!(close(r[0].speedup, 1.0) && close(r[0].memory_ratio, 1.0));
        assert!(close(r[1].speedup, 1.73));
        assert_eq!(libm::round(r[1].memory_ratio * 100.0) / 100.0, 2.41);
        assert_eq!(compare_modes(&[fast], "emulated"), Err(StatsError::MissingBaseline("emulated".into())));
    }

    proptest! {
        #[test]
        fn scale_invariance(xs in proptest::collection::vec(1e-3f64..1e3, 1..40), k in 1e-3f64..1e3) {
            let g = geomean(&xs).unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| x * k).collect();
            let gk = geomean(&scaled).unwrap();
            prop_assert!((gk - k * g).abs() <= 1e-9 * (k * g));
        }

        #[test]
        fn permutation_invariance(mut xs in proptest::collection::vec(1e-3f64..1e3, 1..40)) {
            let g = geomean(&xs).unwrap();
            xs.reverse();
            let k = xs.len() / 3;
            xs.rotate_left(k);
            prop_assert!((geomean(&xs).unwrap() - g).abs() <= 1e-9 * g);
        }

        #[test]
        fn bounded_by_extremes(xs in proptest::collection::vec(1e-3f64..1e3, 1..40)) {
            let g = geomean(&xs).unwrap();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(0.0, f64::max);
            prop_assert!(g >= lo * (1.0 - 1e-12) && g <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn self_comparison_is_unity(t in 1e-4f64..100.0, rss in 1u64..1 << 40) {
            let s = summary("a", t, rss);
            let r = compare_modes(&[s.clone(), s], "a").unwrap();
            prop_assert!(r.iter().all(|m| m.speedup == 1.0 && m.memory_ratio == 1.0));
        }
    }
}
