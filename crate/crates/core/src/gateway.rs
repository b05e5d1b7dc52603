//! The single boundary to the language model.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::FocalUnit;
use crate::preprocess::estimate_tokens;
use crate::prompt::{PromptBundle, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Live,
    Replay,
    #[default]
    Stub,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub transport: Transport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub role: String,
    pub content: String,
}

/// The request body as sent to a chat-completions endpoint, which is also what the digest covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<WireMessage>,
}

impl ChatRequest {
    pub fn new(bundle: &PromptBundle, params: &CompletionParams) -> Self {
        let messages = bundle
            .messages
            .iter()
            .map(|m| WireMessage {
                role: match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                }
                .to_string(),
                content: m.content.clone(),
            })
            .collect();
        ChatRequest { model: params.model_id.clone(), temperature: params.temperature, messages }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request_digest: String,
    pub request: ChatRequest,
    pub response: Completion,
    pub sequence_no: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    pub model_id: String,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no recorded response for request {digest} at position {position}")]
    ReplayMiss { digest: String, position: usize },
    #[error("stub script for {focal} has no response for step {step}")]
    StubExhausted { focal: String, step: usize },
    #[error("model returned an empty completion")]
    EmptyCompletion,
    #[error("transcript {path}: {message}")]
    Transcript { path: String, message: String },
    #[error("missing API credential in environment variable {0}")]
    MissingCredential(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("completion contains no code")]
pub struct NoCode;

/// Gateway settings read from the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub mode: Transport,
    pub endpoint: String,
    pub model_id: String,
    pub api_key_env: String,
    /// Directory of per-focal `{slug}.jsonl` transcripts, read in replay mode and written otherwise.
    pub transcript_dir: Option<PathBuf>,
    pub stub_script: Option<PathBuf>,
    pub timeout_secs: u64,
    pub retry_backoff_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            mode: Transport::Stub,
            endpoint: "https://api.openai.com/v1".into(),
            model_id: "gpt-3.5-turbo".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            transcript_dir: None,
            stub_script: None,
            timeout_secs: 120,
            retry_backoff_ms: 1000,
        }
    }
}

/// Scripted responses per focal method, indexed by the step at which they are requested.
/// Keys are focal ids or slugs; the key `*` applies to every focal without its own entry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StubScript(pub BTreeMap<String, Vec<String>>);

impl StubScript {
    pub fn load(path: &Path) -> Result<StubScript, GatewayError> {
        let text = fs::read_to_string(path).map_err(|e| transcript_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| transcript_err(path, e))
    }

    fn responses(&self, focal: &FocalUnit) -> &[String] {
        self.0.get(&focal.id).or_else(|| self.0.get(&focal.slug)).or_else(|| self.0.get("*")).map_or(&[], |v| v)
    }
}

fn transcript_err(path: &Path, e: impl std::fmt::Display) -> GatewayError {
    GatewayError::Transcript { path: path.display().to_string(), message: e.to_string() }
}

/// Shared gateway state; each focal method talks through its own [`GatewaySession`].
#[derive(Debug)]
pub struct Gateway {
    pub config: GatewayConfig,
    stub: StubScript,
    agent: Option<ureq::Agent>,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Result<Gateway, GatewayError> {
        let stub = match (&config.mode, &config.stub_script) {
            (Transport::Stub, Some(p)) => StubScript::load(p)?,
            _ => StubScript::default(),
        };
        let agent = (config.mode == Transport::Live)
            .then(|| ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(config.timeout_secs))).build().into());
        Ok(Gateway { config, stub, agent })
    }

    pub fn with_stub(script: StubScript, transcript_dir: Option<PathBuf>) -> Gateway {
        let config = GatewayConfig { mode: Transport::Stub, transcript_dir, ..GatewayConfig::default() };
        Gateway { config, stub: script, agent: None }
    }

    pub fn transcript_path(&self, focal: &FocalUnit) -> Option<PathBuf> {
        self.config.transcript_dir.as_ref().map(|d| d.join(format!("{}.jsonl", focal.slug)))
    }

    /// Opens the transcript owned by one focal method.
    pub fn session<'g>(&'g self, focal: &FocalUnit) -> Result<GatewaySession<'g>, GatewayError> {
        let path = self.transcript_path(focal);
        let mut recorded = Vec::new();
        let mut sink = None;
        match (self.config.mode, &path) {
            (Transport::Replay, Some(p)) => recorded = read_transcript(p)?,
            (Transport::Replay, None) => {
                return Err(GatewayError::Transcript { path: String::new(), message: "replay needs a transcript directory".into() })
            }
            (_, Some(p)) => {
                if let Some(dir) = p.parent() {
                    fs::create_dir_all(dir).map_err(|e| transcript_err(p, e))?;
                }
                File::create(p).map_err(|e| transcript_err(p, e))?;
                sink = Some(p.clone());
            }
            (_, None) => {}
        }
        Ok(GatewaySession {
            gateway: self,
            focal_id: focal.id.clone(),
            stub: self.stub.responses(focal).to_vec(),
            recorded,
            sink,
            entries: Vec::new(),
        })
    }
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, GatewayError> {
    let file = File::open(path).map_err(|e| transcript_err(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| transcript_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| transcript_err(path, e))?);
    }
    Ok(out)
}

/// One focal method's conversation with the model.
#[derive(Debug)]
pub struct GatewaySession<'g> {
    gateway: &'g Gateway,
    focal_id: String,
    stub: Vec<String>,
    recorded: Vec<TranscriptEntry>,
    sink: Option<PathBuf>,
    entries: Vec<TranscriptEntry>,
}

impl GatewaySession<'_> {
    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn complete(&mut self, bundle: &PromptBundle, params: &CompletionParams) -> Result<Completion, GatewayError> {
        let request = ChatRequest::new(bundle, params);
        let digest = request.digest();
        let position = self.entries.len();
        let completion = match self.gateway.config.mode {
            Transport::Replay => match self.recorded.get(position) {
                Some(e) if e.request_digest == digest => Completion { transport: Transport::Replay, ..e.response.clone() },
                _ => return Err(GatewayError::ReplayMiss { digest, position }),
            },
            Transport::Stub => {
                let content = self
                    .stub
                    .get(position)
                    .cloned()
                    .ok_or_else(|| GatewayError::StubExhausted { focal: self.focal_id.clone(), step: position })?;
                metered(&request, content, Transport::Stub)
            }
            Transport::Live => self.live(&request)?,
        };
        if completion.content.trim().is_empty() {
            return Err(GatewayError::EmptyCompletion);
        }
        let entry = TranscriptEntry { request_digest: digest, request, response: completion.clone(), sequence_no: position as u64 };
        if let Some(path) = &self.sink {
            let mut file = OpenOptions::new().append(true).open(path).map_err(|e| transcript_err(path, e))?;
            let line = serde_json::to_string(&entry).map_err(|e| transcript_err(path, e))?;
            writeln!(file, "{line}").map_err(|e| transcript_err(path, e))?;
        }
        self.entries.push(entry);
        Ok(completion)
    }

    fn live(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        let config = &self.gateway.config;
        let key = std::env::var(&config.api_key_env).map_err(|_| GatewayError::MissingCredential(config.api_key_env.clone()))?;
        let agent = self.gateway.agent.as_ref().expect("live gateway has an agent");
        let url = format!("{}/chat/completions", config.endpoint.trim_end_matches('/'));
        let send = || -> Result<Value, GatewayError> {
            agent
                .post(&url)
                .header("Authorization", &format!("Bearer {key}"))
                .send_json(request)
                .and_then(|mut r| r.body_mut().read_json::<Value>())
                .map_err(|e| GatewayError::Transport(e.to_string()))
        };
        let body = match send() {
            Ok(v) => v,
            Err(_) => {
                std::thread::sleep(Duration::from_millis(config.retry_backoff_ms));
                send()?
            }
        };
        let content = body["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| GatewayError::Transport("response has no message content".into()))?
            .to_string();
        let mut completion = metered(request, content, Transport::Live);
        if let Some(n) = body["usage"]["prompt_tokens"].as_u64() {
            completion.prompt_tokens = n;
        }
        if let Some(n) = body["usage"]["completion_tokens"].as_u64() {
            completion.completion_tokens = n;
        }
        Ok(completion)
    }
}

fn metered(request: &ChatRequest, content: String, transport: Transport) -> Completion {
    Completion {
        prompt_tokens: estimate_tokens(&request.canonical_json()) as u64,
        completion_tokens: estimate_tokens(&content) as u64,
        content,
        transport,
    }
}

/// The largest fenced block of a completion, or the whole text when it has no fence.
pub fn extract_test_code(completion: &Completion) -> Result<String, NoCode> {
    let text = &completion.content;
    if !text.chars().any(char::is_alphabetic) {
        return Err(NoCode);
    }
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut open: Option<Vec<&str>> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match open.take() {
                Some(block) => blocks.push(block),
                None => open = Some(Vec::new()),
            }
        } else if let Some(block) = open.as_mut() {
            block.push(line);
        }
    }
    blocks.extend(open);
    let chosen = match blocks.iter().enumerate().max_by_key(|(i, b)| (b.len(), std::cmp::Reverse(*i))) {
        Some((_, b)) => b.join("\n"),
        None => text.clone(),
    };
    let trimmed = trim_blank_lines(&chosen);
    if !trimmed.chars().any(char::is_alphabetic) {
        return Err(NoCode);
    }
    Ok(trimmed)
}

fn trim_blank_lines(text: &str) -> String {
    let lines: Vec<&str> = text.lines().collect();
    let first = lines.iter().position(|l| !l.trim().is_empty()).unwrap_or(lines.len());
    let last = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(first, |i| i + 1);
    lines[first..last].join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{ChatMessage, Purpose};
    use std::io::Read;
    use std::net::TcpListener;

    fn focal() -> FocalUnit {
        FocalUnit {
            id: "p.A#f()".into(),
            slug: "p.A-f".into(),
            source_path: "src/main/java/p/A.java".into(),
            package: Some("p".into()),
            class_name: "A".into(),
            method_name: "f".into(),
            signature: "int f()".into(),
            body_span: (1, 1),
            compressed_context: "class A {}".into(),
            symbol_index: BTreeMap::new(),
            framework_profile: "junit4".into(),
        }
    }

    fn bundle(text: &str) -> PromptBundle {
        PromptBundle {
            messages: vec![ChatMessage::new(Role::System, "sys"), ChatMessage::new(Role::User, text)],
            purpose: Purpose::InitialGeneration,
            injection_applied: false,
        }
    }

    fn params() -> CompletionParams {
        CompletionParams { temperature: 0.5, model_id: "m".into() }
    }

    fn completion(content: &str) -> Completion {
        Completion { content: content.into(), prompt_tokens: 0, completion_tokens: 0, transport: Transport::Stub }
    }

    fn stub(responses: &[&str]) -> StubScript {
        StubScript(BTreeMap::from([("*".to_string(), responses.iter().map(|s| s.to_string()).collect())]))
    }

    #[test]
    fn stub_exhausts() {
        let gw = Gateway::with_stub(stub(&["A", "B"]), None);
        let mut s = gw.session(&focal()).unwrap();
        assert_eq!(s.complete(&bundle("x"), &params()).unwrap().content, "A");
        assert_eq!(s.complete(&bundle("x"), &params()).unwrap().content, "B");
        assert!(matches!(s.complete(&bundle("x"), &params()), Err(GatewayError::StubExhausted { step: 2, .. })));
    }

    #[test]
    fn stub_metering_uses_serialized_request() {
        let gw = Gateway::with_stub(stub(&["class T {}"]), None);
        let mut s = gw.session(&focal()).unwrap();
        let c = s.complete(&bundle("hello"), &params()).unwrap();
        let req = ChatRequest::new(&bundle("hello"), &params());
        assert_eq!(c.prompt_tokens, estimate_tokens(&req.canonical_json()) as u64);
        assert_eq!(c.completion_tokens, 3);
    }

    #[test]
    fn replay_round_trip_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::with_stub(stub(&["```\nclass T {}\n```", "second"]), Some(dir.path().to_path_buf()));
        let mut s = gw.session(&focal()).unwrap();
        let a = s.complete(&bundle("one"), &params()).unwrap();
        let b = s.complete(&bundle("two"), &params()).unwrap();
        drop(s);

        let config = GatewayConfig { mode: Transport::Replay, transcript_dir: Some(dir.path().to_path_buf()), ..GatewayConfig::default() };
        let replay = Gateway::new(config).unwrap();
        let mut r = replay.session(&focal()).unwrap();
        let ra = r.complete(&bundle("one"), &params()).unwrap();
        assert_eq!(ra.content, a.content);
        assert_eq!(ra.prompt_tokens, a.prompt_tokens);
        assert_eq!(ra.transport, Transport::Replay);
        assert_eq!(r.complete(&bundle("two"), &params()).unwrap().content, b.content);

        let mut r = replay.session(&focal()).unwrap();
        assert!(matches!(r.complete(&bundle("changed"), &params()), Err(GatewayError::ReplayMiss { position: 0, .. })));
        let mut r = replay.session(&focal()).unwrap();
        let hotter = CompletionParams { temperature: 0.7, ..params() };
        assert!(matches!(r.complete(&bundle("one"), &hotter), Err(GatewayError::ReplayMiss { .. })));
    }

    #[test]
    fn transcript_sequence_increases() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::with_stub(stub(&["a", "b", "c"]), Some(dir.path().to_path_buf()));
        let mut s = gw.session(&focal()).unwrap();
        for _ in 0..3 {
            s.complete(&bundle("q"), &params()).unwrap();
        }
        let entries = read_transcript(&gw.transcript_path(&focal()).unwrap()).unwrap();
        let seq: Vec<u64> = entries.iter().map(|e| e.sequence_no).collect();
        assert_eq!(seq, vec![0, 1, 2]);
        assert!(entries.iter().all(|e| e.request_digest == e.request.digest()));
    }

    #[test]
    fn empty_completion_is_an_error() {
        let gw = Gateway::with_stub(stub(&["  \n"]), None);
        let mut s = gw.session(&focal()).unwrap();
        assert!(matches!(s.complete(&bundle("q"), &params()), Err(GatewayError::EmptyCompletion)));
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = ChatRequest::new(&bundle("x"), &params()).digest();
        assert_eq!(a, ChatRequest::new(&bundle("x"), &params()).digest());
        assert_eq!(a.len(), 64);
        assert_ne!(a, ChatRequest::new(&bundle("y"), &params()).digest());
        let other_model = CompletionParams { model_id: "n".into(), ..params() };
        assert_ne!(a, ChatRequest::new(&bundle("x"), &other_model).digest());
    }

    #[test]
    fn extraction() {
        assert_eq!(extract_test_code(&completion("Here is the test:\n```\nclass T{}\n```")).unwrap(), "class T{}");
        assert_eq!(extract_test_code(&completion("class T{}")).unwrap(), "class T{}");
        let small = (0..5).map(|i| format!("s{i}")).collect::<Vec<_>>().join("\n");
        let big = (0..40).map(|i| format!("b{i}")).collect::<Vec<_>>().join("\n");
        let text = format!("One:\n```java\n{small}\n```\nTwo:\n```java\n{big}\n```\n");
        assert_eq!(extract_test_code(&completion(&text)).unwrap(), big);
        assert_eq!(extract_test_code(&completion("```\n\nclass U {}\n\n")).unwrap(), "class U {}");
        assert_eq!(extract_test_code(&completion("``` 123 ```")), Err(NoCode));
        assert_eq!(extract_test_code(&completion("42;")), Err(NoCode));
    }

    fn serve_once(status: &'static str, body: &'static str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for stream in listener.incoming().take(2) {
                let mut stream = stream.unwrap();
                let mut buf = [0u8; 65536];
                let mut req = Vec::new();
                loop {
                    let n = stream.read(&mut buf).unwrap();
                    req.extend_from_slice(&buf[..n]);
                    let text = String::from_utf8_lossy(&req);
                    if let Some(h) = text.find("\r\n\r\n") {
                        let len = text
                            .lines()
                            .find_map(|l| {
                                l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap())
                            })
                            .unwrap_or(0);
                        if req.len() >= h + 4 + len {
                            break;
                        }
                    }
                    if n == 0 {
                        break;
                    }
                }
                let resp = format!(
                    "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(resp.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}")
    }

    #[test]
    fn live_uses_provider_usage() {
        let endpoint = serve_once(
            "200 OK",
            r#"{"choices":[{"message":{"role":"assistant","content":"class T {}"}}],"usage":{"prompt_tokens":11,"completion_tokens":7}}"#,
        );
        // SAFETY: only this test reads the variable.
        unsafe { std::env::set_var("COEVO_TEST_KEY_OK", "k") };
        let config = GatewayConfig { mode: Transport::Live, endpoint, api_key_env: "COEVO_TEST_KEY_OK".into(), ..GatewayConfig::default() };
        let gw = Gateway::new(config).unwrap();
        let mut s = gw.session(&focal()).unwrap();
        let c = s.complete(&bundle("q"), &params()).unwrap();
        assert_eq!((c.content.as_str(), c.prompt_tokens, c.completion_tokens, c.transport), ("class T {}", 11, 7, Transport::Live));
    }

    #[test]
    fn live_retries_once_then_fails() {
        let endpoint = serve_once("500 Internal Server Error", "{}");
        // SAFETY: only this test reads the variable.
        unsafe { std::env::set_var("COEVO_TEST_KEY_ERR", "k") };
        let config = GatewayConfig {
            mode: Transport::Live,
            endpoint,
            api_key_env: "COEVO_TEST_KEY_ERR".into(),
            retry_backoff_ms: 1,
            ..GatewayConfig::default()
        };
        let gw = Gateway::new(config).unwrap();
        let mut s = gw.session(&focal()).unwrap();
        assert!(matches!(s.complete(&bundle("q"), &params()), Err(GatewayError::Transport(_))));
    }

    #[test]
    fn live_without_credential() {
        let config = GatewayConfig { mode: Transport::Live, api_key_env: "COEVO_TEST_KEY_ABSENT".into(), ..GatewayConfig::default() };
        let gw = Gateway::new(config).unwrap();
        let mut s = gw.session(&focal()).unwrap();
        assert!(matches!(s.complete(&bundle("q"), &params()), Err(GatewayError::MissingCredential(_))));
    }
}
