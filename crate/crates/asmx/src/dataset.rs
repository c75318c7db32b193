//! Paired corpora: compile each C source to x86-64 and to a RISC target,
//! normalize both sides and persist the pairs as newline-delimited JSON.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use asmx_core::asmtext::{normalize, parse_assembly, NormalizationPolicy};
use asmx_core::tokenizer::{count_tokens, TokenizerSpec};
use asmx_core::IsaName;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Stage, ToolchainConfig, Vars};
use crate::exec::{self, SpawnError};
use crate::runtime;

pub const PAIR_SCHEMA: &str = "asmx.pair/1";
pub const MANIFEST_SCHEMA: &str = "asmx.manifest/1";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{isa} compile failed (exit {code:?}): {stderr}")]
    CompileFailed { isa: IsaName, code: Option<i32>, stderr: String },
    #[error("{0} compile timed out")]
    Timeout(IsaName),
    #[error(transparent)]
    Spawn(#[from] SpawnError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no .c sources under {0}")]
    NoSources(PathBuf),
    #[error("cannot write store {path}: {source}")]
    StoreWriteFailed { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    StoreRead { path: PathBuf, line: usize, message: String },
    #[error("suite layout: {0}")]
    Layout(String),
    #[error("{0}")]
    Io(String),
}

impl DatasetError {
    /// Problems with the machine rather than with one input file.
    pub fn is_infrastructure(&self) -> bool {
        matches!(
            self,
            DatasetError::Spawn(_)
                | DatasetError::Config(_)
                | DatasetError::StoreWriteFailed { .. }
                | DatasetError::Io(_)
                | DatasetError::NoSources(_)
        )
    }
}

fn io_err(context: &str, e: std::io::Error) -> DatasetError {
    DatasetError::Io(format!("{context}: {e}"))
}

/// One side of a pair: the compiler's text and its normalized form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsmText {
    pub raw: String,
    pub normalized: String,
}

impl AsmText {
    pub fn new(raw: String, isa: IsaName, source_id: &str) -> Self {
        let unit = parse_assembly(&raw, &isa.isa(), source_id);
        let normalized = normalize(&unit, NormalizationPolicy::Normalized);
        AsmText { raw, normalized }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranspilePair {
    pub pair_id: String,
    pub c_source_path: PathBuf,
    pub x86: AsmText,
    pub target: AsmText,
    pub target_isa: IsaName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_source_path: Option<PathBuf>,
    pub token_count_x86: u64,
    pub token_count_target: u64,
    pub tokenizer_version: String,
    pub opt_level: String,
    #[serde(default)]
    pub build_log: String,
}

#[derive(Serialize, Deserialize)]
struct PairRecord<T> {
    schema: String,
    #[serde(flatten)]
    pair: T,
}

/// Compiles `c_path` for x86-64 and `target`, with `pair_id` from the file stem.
pub fn compile_pair(
    c_path: &Path,
    target: IsaName,
    cfg: &ToolchainConfig,
    spec: &TokenizerSpec,
) -> Result<TranspilePair, DatasetError> {
    let id = c_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    compile_pair_as(&id, c_path, target, cfg, spec)
}

pub fn compile_pair_as(
    pair_id: &str,
    c_path: &Path,
    target: IsaName,
    cfg: &ToolchainConfig,
    spec: &TokenizerSpec,
) -> Result<TranspilePair, DatasetError> {
    cfg.require(IsaName::X86_64, &[Stage::Compile])?;
    cfg.require(target, &[Stage::Compile])?;
    let work = tempfile::Builder::new().prefix("asmx-pair-").tempdir().map_err(|e| io_err("temp dir", e))?;
    runtime::materialize(work.path()).map_err(|e| io_err("runtime", e))?;
    let name = c_path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input.c".into());
    std::fs::copy(c_path, work.path().join(&name)).map_err(|e| io_err(&c_path.display().to_string(), e))?;

    let mut log = String::new();
    let mut side = |isa: IsaName, out_name: &str| -> Result<String, DatasetError> {
        let vars = Vars { input: Some(&name), output: Some(out_name), runtime: Some(runtime::DIR), test: None };
        let argv = cfg.command(isa, Stage::Compile, &vars)?;
        let out = exec::run(&argv, work.path(), cfg.compile_timeout())?;
        log.push_str(&out.transcript());
        if out.timed_out {
            return Err(DatasetError::Timeout(isa));
        }
        if !out.success() {
            return Err(DatasetError::CompileFailed { isa, code: out.code(), stderr: excerpt(&out.stderr) });
        }
        std::fs::read_to_string(work.path().join(out_name)).map_err(|e| io_err(out_name, e))
    };
    let x86_raw = side(IsaName::X86_64, "x86.s")?;
    let target_raw = side(target, "target.s")?;
    let x86 = AsmText::new(x86_raw, IsaName::X86_64, pair_id);
    let tgt = AsmText::new(target_raw, target, pair_id);
    Ok(TranspilePair {
        pair_id: pair_id.to_string(),
        c_source_path: c_path.to_path_buf(),
        token_count_x86: count_tokens(&x86.normalized, spec) as u64,
        token_count_target: count_tokens(&tgt.normalized, spec) as u64,
        x86,
        target: tgt,
        target_isa: target,
        test_source_path: None,
        tokenizer_version: spec.version().to_string(),
        opt_level: cfg.opt_level.clone(),
        build_log: log,
    })
}

fn excerpt(s: &str) -> String {
    const MAX: usize = 2000;
    match s.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}…", &s[..i]),
        None => s.trim_end().to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolFingerprint {
    pub isa: IsaName,
    pub command: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema: String,
    pub records: u64,
    pub target_isa: IsaName,
    pub opt_level: String,
    pub tokenizer_version: String,
    pub toolchains: Vec<ToolFingerprint>,
    pub created_unix: u64,
    pub seed: u64,
    #[serde(default)]
    pub sample: Option<usize>,
}

/// Records the compiler command and its `--version` banner.
pub fn fingerprint(cfg: &ToolchainConfig, isa: IsaName) -> Result<ToolFingerprint, DatasetError> {
    let vars = Vars { input: Some("{input}"), output: Some("{output}"), runtime: Some(runtime::DIR), test: None };
    let argv = cfg.command(isa, Stage::Compile, &vars)?;
    let probe = vec![argv[0].clone(), "--version".to_string()];
    let out = exec::run(&probe, Path::new("."), cfg.compile_timeout())?;
    let version = out.stdout.lines().chain(out.stderr.lines()).find(|l| !l.trim().is_empty()).unwrap_or("").trim();
    Ok(ToolFingerprint { isa, command: exec::render(&argv), version: version.to_string() })
}

pub fn manifest_path(store: &Path) -> PathBuf {
    let mut s = store.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub sample: Option<usize>,
    pub seed: u64,
    pub jobs: usize,
}

#[derive(Debug)]
pub struct BuildReport {
    pub manifest: CorpusManifest,
    /// Sources that failed to compile, with the reason.
    pub failures: Vec<(PathBuf, String)>,
}

/// Sorted `.c` files under `dir`, recursively.
pub fn list_sources(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    fn walk(d: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(d)? {
            let p = entry?.path();
            if p.is_dir() {
                walk(&p, out)?;
            } else if p.extension().is_some_and(|e| e == "c") {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, &mut out).map_err(|e| io_err(&dir.display().to_string(), e))?;
    out.sort();
    Ok(out)
}

/// Seeded sample without replacement; the chosen files keep sorted order.
pub fn sample_sources(files: Vec<PathBuf>, sample: Option<usize>, seed: u64) -> Vec<PathBuf> {
    let n = match sample {
        Some(n) if n < files.len() => n,
        Some(n) => {
            log::warn!("sample of {n} exceeds the {} available sources; using all", files.len());
            return files;
        }
        None => return files,
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, files.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| files[i].clone()).collect()
}

/// Runs `f` over `items` on `jobs` threads, handing results to `sink` in input order.
pub(crate) fn ordered_pool<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> R + Sync,
    mut sink: impl FnMut(usize, R) -> bool,
) {
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            let tx = tx.clone();
            let (next, stop, f) = (&next, &stop, &f);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() || stop.load(Ordering::SeqCst) {
                    break;
                }
                if tx.send((i, f(&items[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut want = 0;
        for (i, r) in rx {
            if stop.load(Ordering::SeqCst) {
                continue;
            }
            pending.insert(i, r);
            while let Some(r) = pending.remove(&want) {
                want += 1;
                if !sink(want - 1, r) {
                    stop.store(true, Ordering::SeqCst);
                    break;
                }
            }
        }
    });
}

fn relative_id(root: &Path, file: &Path) -> String {
    let rel = file.strip_prefix(root).unwrap_or(file).with_extension("");
    rel.to_string_lossy().replace('\\', "/")
}

/// Builds a corpus store at `store` (plus its manifest, written last).
pub fn build_corpus(
    src_dir: &Path,
    target: IsaName,
    cfg: &ToolchainConfig,
    spec: &TokenizerSpec,
    opts: &BuildOptions,
    store: &Path,
) -> Result<BuildReport, DatasetError> {
    let all = list_sources(src_dir)?;
    if all.is_empty() {
        return Err(DatasetError::NoSources(src_dir.to_path_buf()));
    }
    cfg.require(IsaName::X86_64, &[Stage::Compile])?;
    cfg.require(target, &[Stage::Compile])?;
    let toolchains = vec![fingerprint(cfg, IsaName::X86_64)?, fingerprint(cfg, target)?];
    let chosen = sample_sources(all, opts.sample, opts.seed);

    let mut writer = StoreWriter::create(store)?;
    let mut failures = Vec::new();
    let mut fatal = None;
    ordered_pool(
        &chosen,
        opts.jobs,
        |path| compile_pair_as(&relative_id(src_dir, path), path, target, cfg, spec),
        |i, res| match res {
            Ok(pair) => match writer.append(&pair) {
                Ok(()) => true,
                Err(e) => {
                    fatal = Some(e);
                    false
                }
            },
            Err(e) if e.is_infrastructure() => {
                fatal = Some(e);
                false
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", chosen[i].display());
                failures.push((chosen[i].clone(), e.to_string()));
                true
            }
        },
    );
    if let Some(e) = fatal {
        return Err(e);
    }
    let records = writer.finish()?;
    let manifest = CorpusManifest {
        schema: MANIFEST_SCHEMA.into(),
        records,
        target_isa: target,
        opt_level: cfg.opt_level.clone(),
        tokenizer_version: spec.version().to_string(),
        toolchains,
        created_unix: crate::unix_now(),
        seed: opts.seed,
        sample: opts.sample,
    };
    let body = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
    crate::atomic_write(&manifest_path(store), body.as_bytes())
        .map_err(|e| DatasetError::StoreWriteFailed { path: manifest_path(store), source: e })?;
    Ok(BuildReport { manifest, failures })
}

/// Streams pair records to a temp file that replaces `path` on `finish`.
pub struct StoreWriter {
    path: PathBuf,
    tmp: PathBuf,
    out: BufWriter<File>,
    count: u64,
}

impl StoreWriter {
    pub fn create(path: &Path) -> Result<Self, DatasetError> {
        let tmp = crate::tmp_sibling(path);
        let fail = |e| DatasetError::StoreWriteFailed { path: path.to_path_buf(), source: e };
        let file = File::create(&tmp).map_err(fail)?;
        Ok(StoreWriter { path: path.to_path_buf(), tmp, out: BufWriter::new(file), count: 0 })
    }

    pub fn append(&mut self, pair: &TranspilePair) -> Result<(), DatasetError> {
        let rec = PairRecord { schema: PAIR_SCHEMA.to_string(), pair };
        let line = serde_json::to_string(&rec).expect("serializable");
        writeln!(self.out, "{line}").map_err(|e| DatasetError::StoreWriteFailed { path: self.path.clone(), source: e })?;
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<u64, DatasetError> {
        let fail = |e| DatasetError::StoreWriteFailed { path: self.path.clone(), source: e };
        self.out.flush().map_err(fail)?;
        std::fs::rename(&self.tmp, &self.path).map_err(fail)?;
        Ok(self.count)
    }
}

pub fn write_store(path: &Path, pairs: &[TranspilePair]) -> Result<u64, DatasetError> {
    let mut w = StoreWriter::create(path)?;
    for p in pairs {
        w.append(p)?;
    }
    w.finish()
}

pub fn read_store(path: &Path) -> Result<Vec<TranspilePair>, DatasetError> {
    let file = File::open(path).map_err(|e| io_err(&path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let bad = |message: String| DatasetError::StoreRead { path: path.to_path_buf(), line: i + 1, message };
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairRecord<TranspilePair> = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if rec.schema != PAIR_SCHEMA {
            return Err(bad(format!("unsupported schema {:?}", rec.schema)));
        }
        out.push(rec.pair);
    }
    Ok(out)
}

pub fn read_manifest(store: &Path) -> Result<CorpusManifest, DatasetError> {
    let p = manifest_path(store);
    let text = std::fs::read_to_string(&p).map_err(|e| io_err(&p.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::StoreRead { path: p, line: 1, message: e.to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoreStats {
    pub records: usize,
    pub mean_tokens_x86: f64,
    pub mean_tokens_target: f64,
    /// Pairs whose target side is longer than the x86 side.
    pub target_longer: usize,
}

pub fn store_stats(pairs: &[TranspilePair]) -> StoreStats {
    let n = pairs.len().max(1) as f64;
    StoreStats {
        records: pairs.len(),
        mean_tokens_x86: pairs.iter().map(|p| p.token_count_x86 as f64).sum::<f64>() / n,
        mean_tokens_target: pairs.iter().map(|p| p.token_count_target as f64).sum::<f64>() / n,
        target_longer: pairs.iter().filter(|p| p.token_count_target > p.token_count_x86).count(),
    }
}

/// Loads `<id>/func.c` + `<id>/test.c` problems in ascending id order.
pub fn load_eval_suite(
    dir: &Path,
    target: IsaName,
    cfg: &ToolchainConfig,
    spec: &TokenizerSpec,
    jobs: usize,
) -> Result<Vec<TranspilePair>, DatasetError> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(&dir.display().to_string(), e))?;
    let mut ids = Vec::new();
    for e in entries {
        let p = e.map_err(|e| io_err(&dir.display().to_string(), e))?.path();
        if p.is_dir() {
            ids.push(p);
        }
    }
    ids.sort();
    if ids.is_empty() {
        return Err(DatasetError::Layout(format!("{} has no problem directories", dir.display())));
    }
    for p in &ids {
        for f in ["func.c", "test.c"] {
            if !p.join(f).is_file() {
                let id = p.file_name().unwrap_or_default().to_string_lossy();
                return Err(DatasetError::Layout(format!("{id}: missing {f}")));
            }
        }
    }
    let mut out = Vec::with_capacity(ids.len());
    let mut err = None;
    ordered_pool(
        &ids,
        jobs,
        |p| {
            let id = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let mut pair = compile_pair_as(&id, &p.join("func.c"), target, cfg, spec)?;
            pair.test_source_path = Some(p.join("test.c"));
            Ok::<_, DatasetError>(pair)
        },
        |_, r| match r {
            Ok(p) => {
                out.push(p);
                true
            }
            Err(e) => {
                err = Some(e);
                false
            }
        },
    );
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_seeded_and_sorted() {
        let files: Vec<PathBuf> = (0..20).map(|i| PathBuf::from(format!("f{i:02}.c"))).collect();
        let a = sample_sources(files.clone(), Some(5), 7);
        let b = sample_sources(files.clone(), Some(5), 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(a, sample_sources(files.clone(), Some(5), 8));
        assert_eq!(sample_sources(files.clone(), Some(50), 7), files);
    }

    #[test]
    fn pool_preserves_order() {
        let items: Vec<u64> = (0..100).collect();
        let mut seen = Vec::new();
        ordered_pool(&items, 8, |x| x * 2, |i, r| {
            seen.push((i, r));
            true
        });
        assert_eq!(seen, items.iter().map(|x| (*x as usize, x * 2)).collect::<Vec<_>>());
    }

    #[test]
    fn pool_stops_early() {
        let items: Vec<u64> = (0..1000).collect();
        let mut n = 0;
        ordered_pool(&items, 4, |x| *x, |_, _| {
            n += 1;
            n < 10
        });
        assert_eq!(n, 10);
    }

    #[test]
    fn excerpt_truncates() {
        let long = "x".repeat(3000);
        assert_eq!(excerpt(&long).chars().count(), 2001);
        assert_eq!(excerpt("short\n"), "short");
    }
}
