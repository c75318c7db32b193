//! Transpiler backends: the mapping from x86-64 text to a RISC target.

use std::collections::HashMap;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use asmx_core::asmtext::parse_assembly;
use asmx_core::rules::rule_translate;
use asmx_core::tokenizer::{count_tokens, TokenizerSpec};
use asmx_core::{GenerationParams, IsaName};
use serde::{Deserialize, Serialize};

use crate::config::Prompt;
use crate::dataset::TranspilePair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranspileRequest {
    /// Normalized x86-64 text.
    pub source_text: String,
    pub source_isa: IsaName,
    pub target_isa: IsaName,
    pub params: GenerationParams,
}

impl TranspileRequest {
    pub fn new(source_text: impl Into<String>, target_isa: IsaName, params: GenerationParams) -> Self {
        TranspileRequest { source_text: source_text.into(), source_isa: IsaName::X86_64, target_isa, params }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.source_isa != IsaName::X86_64 {
            return Err(BackendError::InvalidRequest(format!("source ISA must be X86_64, got {}", self.source_isa)));
        }
        if !self.target_isa.is_risc_target() {
            return Err(BackendError::InvalidRequest(format!("{} is not a transpilation target", self.target_isa)));
        }
        self.params.validate().map_err(|e| BackendError::InvalidRequest(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranspileResponse {
    pub candidates: Vec<Candidate>,
    pub backend_id: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend refused the request: {0}")]
    Refused(String),
    #[error("source is {tokens} tokens, context window is {window}")]
    ContextOverflow { tokens: usize, window: u32 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn transpile(&self, req: &TranspileRequest) -> Result<TranspileResponse, BackendError>;
}

fn respond(id: &str, start: Instant, texts: Vec<String>, beams: u32) -> TranspileResponse {
    let candidates = texts.into_iter().take(beams as usize).map(|text| Candidate { text, score: None }).collect();
    TranspileResponse { candidates, backend_id: id.to_string(), latency_ms: start.elapsed().as_millis() as u64 }
}

/// Returns the source unchanged. For plumbing tests.
pub struct IdentityBackend;

impl Backend for IdentityBackend {
    fn id(&self) -> &str {
        "identity"
    }

    fn transpile(&self, req: &TranspileRequest) -> Result<TranspileResponse, BackendError> {
        let start = Instant::now();
        req.validate()?;
        Ok(respond(self.id(), start, vec![req.source_text.clone()], req.params.num_beams))
    }
}

/// Template translator for integer gcc -O0 code, ARMv5 only.
pub struct RuleBackend;

impl Backend for RuleBackend {
    fn id(&self) -> &str {
        "rule"
    }

    fn transpile(&self, req: &TranspileRequest) -> Result<TranspileResponse, BackendError> {
        let start = Instant::now();
        req.validate()?;
        if req.target_isa != IsaName::Armv5 {
            return Err(BackendError::Refused(format!("rule backend only emits ARMV5, not {}", req.target_isa)));
        }
        let unit = parse_assembly(&req.source_text, &IsaName::X86_64.isa(), "request");
        let text = rule_translate(&unit).map_err(|e| BackendError::Refused(e.to_string()))?;
        Ok(respond(self.id(), start, vec![text], req.params.num_beams))
    }
}

/// Answers with the ground truth of a known pair, looked up by source text.
pub struct ReplayBackend {
    truth: HashMap<(String, IsaName), String>,
}

impl ReplayBackend {
    pub fn new<'a>(pairs: impl IntoIterator<Item = &'a TranspilePair>) -> Self {
        let truth =
            pairs.into_iter().map(|p| ((p.x86.normalized.clone(), p.target_isa), p.target.raw.clone())).collect();
        ReplayBackend { truth }
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> &str {
        "replay"
    }

    fn transpile(&self, req: &TranspileRequest) -> Result<TranspileResponse, BackendError> {
        let start = Instant::now();
        req.validate()?;
        let text = self
            .truth
            .get(&(req.source_text.clone(), req.target_isa))
            .ok_or_else(|| BackendError::Refused("no recorded ground truth for this source".into()))?;
        Ok(respond(self.id(), start, vec![text.clone()], req.params.num_beams))
    }
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Server base URL; `/v1/completions` is appended.
    pub endpoint: String,
    pub model: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after the first on transport errors and 5xx/429 replies.
    pub max_retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model: None,
            timeout: Duration::from_secs(120),
            max_retries: 2,
            backoff: Duration::from_millis(250),
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
    prompt: String,
    max_tokens: u32,
    temperature: f64,
    n: u32,
    best_of: u32,
    use_beam_search: bool,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    text: String,
}

/// Counting gate bounding concurrent requests.
struct Gate {
    limit: usize,
    busy: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut busy = self.busy.lock().expect("gate poisoned");
        while *busy >= self.limit {
            busy = self.freed.wait(busy).expect("gate poisoned");
        }
        *busy += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.busy.lock().expect("gate poisoned") -= 1;
        self.0.freed.notify_one();
    }
}

/// Client for an OpenAI-style completions server.
pub struct RemoteBackend {
    cfg: RemoteConfig,
    prompt: Prompt,
    spec: TokenizerSpec,
    agent: ureq::Agent,
    gate: Gate,
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl RemoteBackend {
    pub fn new(cfg: RemoteConfig, prompt: Prompt, spec: TokenizerSpec) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate { limit: cfg.max_in_flight.max(1), busy: Mutex::new(0), freed: Condvar::new() };
        RemoteBackend { cfg, prompt, spec, agent, gate }
    }

    fn url(&self) -> String {
        format!("{}/v1/completions", self.cfg.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, body: &CompletionRequest<'_>) -> Result<Vec<String>, Attempt> {
        let _slot = self.gate.enter();
        let mut resp = self.agent.post(&self.url()).send_json(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}: {}", text.trim())));
        }
        if !(200..300).contains(&status) {
            return Err(Attempt::Fatal(BackendError::Refused(format!("HTTP {status}: {}", text.trim()))));
        }
        let parsed: CompletionResponse = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fatal(BackendError::Refused(format!("malformed completion body: {e}"))))?;
        if parsed.choices.is_empty() {
            return Err(Attempt::Fatal(BackendError::Refused("completion had no choices".into())));
        }
        Ok(parsed.choices.into_iter().map(|c| c.text).collect())
    }
}

impl Backend for RemoteBackend {
    fn id(&self) -> &str {
        "remote"
    }

    fn transpile(&self, req: &TranspileRequest) -> Result<TranspileResponse, BackendError> {
        let start = Instant::now();
        req.validate()?;
        let tokens = count_tokens(&req.source_text, &self.spec);
        if tokens > req.params.context_window as usize {
            return Err(BackendError::ContextOverflow { tokens, window: req.params.context_window });
        }
        let beams = req.params.num_beams;
        let body = CompletionRequest {
            model: self.cfg.model.as_deref(),
            prompt: self.prompt.compose(req.target_isa, &req.source_text),
            max_tokens: req.params.max_new_tokens,
            temperature: if req.params.sampling_enabled { 1.0 } else { 0.0 },
            n: beams,
            best_of: beams,
            use_beam_search: beams > 1 && !req.params.sampling_enabled,
        };
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.cfg.backoff * attempt);
            }
            match self.attempt(&body) {
                Ok(texts) => return Ok(respond(self.id(), start, texts, beams)),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::debug!("completion attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(BackendError::Unavailable(last))
    }
}
