//! Subprocess execution with a wall-clock limit and captured output.

use std::io::Read;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::Path;
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

/// Failure to start a tool at all. Always an infrastructure problem.
#[derive(Debug, thiserror::Error)]
#[error("cannot run `{command}`: {source}")]
pub struct SpawnError {
    pub command: String,
    #[source]
    pub source: std::io::Error,
}

#[derive(Debug, Clone)]
pub struct CmdOutput {
    pub command: String,
    pub status: Option<ExitStatus>,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
    pub elapsed: Duration,
}

impl CmdOutput {
    pub fn success(&self) -> bool {
        !self.timed_out && self.status.is_some_and(|s| s.success())
    }

    pub fn code(&self) -> Option<i32> {
        self.status.and_then(|s| s.code())
    }

    pub fn signal(&self) -> Option<i32> {
        self.status.and_then(|s| s.signal())
    }

    /// `$ cmd` followed by the captured streams, for result logs.
    pub fn transcript(&self) -> String {
        let mut s = format!("$ {}\n", self.command);
        s.push_str(&self.stdout);
        if !self.stdout.is_empty() && !self.stdout.ends_with('\n') {
            s.push('\n');
        }
        s.push_str(&self.stderr);
        if !self.stderr.is_empty() && !self.stderr.ends_with('\n') {
            s.push('\n');
        }
        if self.timed_out {
            s.push_str("[killed: time limit exceeded]\n");
        } else if let Some(sig) = self.signal() {
            s.push_str(&format!("[terminated by signal {sig}]\n"));
        } else if let Some(c) = self.code().filter(|c| *c != 0) {
            s.push_str(&format!("[exit status {c}]\n"));
        }
        s
    }
}

/// Shell-style rendering of an argument vector.
pub fn render(argv: &[String]) -> String {
    argv.iter()
        .map(|a| {
            if !a.is_empty() && a.chars().all(|c| c.is_ascii_alphanumeric() || "-_./=+:,@%{}".contains(c)) {
                a.clone()
            } else {
                format!("'{}'", a.replace('\'', r"'\''"))
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

const MAX_CAPTURE: usize = 1 << 20;

fn drain(mut r: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let mut chunk = [0u8; 8192];
        loop {
            match r.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    // keep reading past the cap so the child never blocks on a full pipe
                    let room = MAX_CAPTURE.saturating_sub(buf.len());
                    buf.extend_from_slice(&chunk[..n.min(room)]);
                }
            }
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Runs `argv` in `cwd`, killing its whole process group after `timeout`.
pub fn run(argv: &[String], cwd: &Path, timeout: Duration) -> Result<CmdOutput, SpawnError> {
    let command = render(argv);
    let (prog, args) = argv.split_first().ok_or_else(|| SpawnError {
        command: command.clone(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
    })?;
    let start = Instant::now();
    let mut child = Command::new(prog)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()
        .map_err(|e| SpawnError { command: command.clone(), source: e })?;
    let out = drain(child.stdout.take().expect("piped"));
    let err = drain(child.stderr.take().expect("piped"));
    let deadline = start + timeout;
    let mut timed_out = false;
    let status = loop {
        match child.try_wait() {
            Ok(Some(s)) => break Some(s),
            Ok(None) if Instant::now() >= deadline => {
                timed_out = true;
                // SAFETY: signalling the group we created for this child.
                unsafe {
                    libc::kill(-(child.id() as i32), libc::SIGKILL);
                }
                break child.wait().ok();
            }
            Ok(None) => thread::sleep(Duration::from_millis(2)),
            Err(_) => break None,
        }
    };
    let elapsed = start.elapsed();
    Ok(CmdOutput {
        command,
        status,
        stdout: out.join().unwrap_or_default(),
        stderr: err.join().unwrap_or_default(),
        timed_out,
        elapsed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str, timeout_ms: u64) -> CmdOutput {
        let argv = vec!["sh".to_string(), "-c".to_string(), script.to_string()];
        run(&argv, Path::new("."), Duration::from_millis(timeout_ms)).unwrap()
    }

    #[test]
    fn captures_streams_and_status() {
        let o = sh("echo out; echo err >&2; exit 3", 5000);
        assert_eq!(o.stdout, "out\n");
        assert_eq!(o.stderr, "err\n");
        assert_eq!(o.code(), Some(3));
        assert!(!o.success());
        assert!(o.transcript().ends_with("[exit status 3]\n"));
    }

    #[test]
    fn kills_on_timeout() {
        let o = sh("sleep 5; echo late", 100);
        assert!(o.timed_out);
        assert!(o.elapsed < Duration::from_secs(3));
        assert!(!o.stdout.contains("late"));
    }

    #[test]
    fn reports_signals() {
        let o = sh("kill -SEGV $$", 5000);
        assert_eq!(o.signal(), Some(libc::SIGSEGV));
    }

    #[test]
    fn missing_program_is_a_spawn_error() {
        let e = run(&["/nonexistent/cc".to_string(), "-v".to_string()], Path::new("."), Duration::from_secs(1));
        assert_eq!(e.unwrap_err().command, "/nonexistent/cc -v");
    }

    #[test]
    fn quoting() {
        assert_eq!(render(&["a b".into(), "it's".into(), "-O0".into()]), r"'a b' 'it'\''s' -O0");
    }
}
