//! Repeated-run benchmarking: wall time and peak RSS per run, aggregated by
//! geometric mean over the runs that exited cleanly.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Instant;

use asmx_core::stats::{summarize_samples, BenchSample, BenchSummary, StatsError};

pub const DEFAULT_WARMUP: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("benchmark binary {0} does not exist")]
    MissingBinary(PathBuf),
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("cannot start {binary}: {source}")]
    Spawn { binary: PathBuf, source: std::io::Error },
    #[error("wait4 failed: {0}")]
    Wait(std::io::Error),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub mode: String,
    pub runs: usize,
    /// Unmeasured runs before the measured ones.
    pub warmup: usize,
    /// Optional energy sampler run after each measured run. It receives the
    /// run's wall time in `ASMX_BENCH_WALL_TIME` and must print a number on its
    /// last non-empty stdout line.
    pub energy_hook: Option<Vec<String>>,
}

impl BenchOptions {
    pub fn new(mode: impl Into<String>, runs: usize) -> Self {
        BenchOptions { mode: mode.into(), runs, warmup: DEFAULT_WARMUP, energy_hook: None }
    }
}

/// One run: wall time from spawn to reap, peak RSS from the kernel's child accounting.
pub fn measure_once(binary: &Path, args: &[String]) -> Result<BenchSample, BenchError> {
    let start = Instant::now();
    let child = Command::new(binary)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| BenchError::Spawn { binary: binary.to_path_buf(), source: e })?;
    let pid = child.id() as libc::pid_t;
    let mut status = 0;
    // SAFETY: rusage is plain data; wait4 reaps exactly the child we spawned,
    // which std never waits on because `child` is not used again.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let rc = loop {
        let rc = unsafe { libc::wait4(pid, &mut status, 0, &mut usage) };
        if rc == -1 && std::io::Error::last_os_error().kind() == std::io::ErrorKind::Interrupted {
            continue;
        }
        break rc;
    };
    let wall_time = start.elapsed().as_secs_f64();
    drop(child);
    if rc == -1 {
        return Err(BenchError::Wait(std::io::Error::last_os_error()));
    }
    let exit_code = if libc::WIFEXITED(status) { libc::WEXITSTATUS(status) } else { 128 + libc::WTERMSIG(status) };
    Ok(BenchSample {
        wall_time,
        // Linux reports kilobytes
        max_rss: usage.ru_maxrss.max(0) as u64 * 1024,
        exit_code,
        energy: None,
    })
}

fn sample_energy(hook: &[String], wall_time: f64) -> Option<f64> {
    let (prog, args) = hook.split_first()?;
    let out = Command::new(prog).args(args).env("ASMX_BENCH_WALL_TIME", format!("{wall_time}")).output().ok()?;
    let text = String::from_utf8_lossy(&out.stdout);
    let v = text.lines().rev().find(|l| !l.trim().is_empty())?.trim().parse::<f64>().ok();
    if v.is_none() {
        log::warn!("energy hook printed no number");
    }
    v
}

/// Runs `binary` sequentially `warmup + runs` times and aggregates the measured runs.
pub fn bench_run(binary: &Path, args: &[String], opts: &BenchOptions) -> Result<BenchSummary, BenchError> {
    if !binary.exists() {
        return Err(BenchError::MissingBinary(binary.to_path_buf()));
    }
    if opts.runs == 0 {
        return Err(BenchError::NoRuns);
    }
    for _ in 0..opts.warmup {
        measure_once(binary, args)?;
    }
    let mut samples = Vec::with_capacity(opts.runs);
    for _ in 0..opts.runs {
        let mut s = measure_once(binary, args)?;
        if let Some(hook) = &opts.energy_hook {
            s.energy = sample_energy(hook, s.wall_time);
        }
        samples.push(s);
    }
    Ok(summarize_samples(&opts.mode, samples)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str) -> (PathBuf, Vec<String>) {
        (PathBuf::from("/bin/sh"), vec!["-c".into(), script.into()])
    }

    #[test]
    fn failing_binary_is_all_runs_failed() {
        let (bin, args) = sh("exit 3");
        let mut o = BenchOptions::new("m", 3);
        o.warmup = 0;
        match bench_run(&bin, &args, &o) {
            Err(BenchError::Stats(StatsError::AllRunsFailed { runs: 3 })) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_run_is_the_sample() {
        let (bin, args) = sh("exit 0");
        let mut o = BenchOptions::new("m", 1);
        o.warmup = 1;
        let s = bench_run(&bin, &args, &o).unwrap();
        assert_eq!(s.n_valid, 1);
        assert_eq!(s.samples.len(), 1);
        assert_eq!(s.geomean_time, s.samples[0].wall_time);
        assert!(s.geomean_rss > 0.0);
    }

    #[test]
    fn missing_binary() {
        let o = BenchOptions::new("m", 1);
        assert!(matches!(bench_run(Path::new("/no/such/bin"), &[], &o), Err(BenchError::MissingBinary(_))));
    }

    #[test]
    fn signal_deaths_count_as_failures() {
        let (bin, args) = sh("kill -KILL $$");
        let s = measure_once(&bin, &args).unwrap();
        assert_eq!(s.exit_code, 128 + 9);
        assert!(!s.is_valid());
    }

    #[test]
    fn energy_hook_is_parsed() {
        let (bin, args) = sh("exit 0");
        let mut o = BenchOptions::new("m", 2);
        o.warmup = 0;
        o.energy_hook = Some(vec!["sh".into(), "-c".into(), "echo noise; echo 2.5".into()]);
        let s = bench_run(&bin, &args, &o).unwrap();
        assert_eq!(s.geomean_energy, Some(2.5));
    }
}
