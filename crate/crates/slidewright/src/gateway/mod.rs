//! Provider-agnostic LLM access: chat-style requests with schema-validated
//! JSON responses, bounded repair retries, transcript recording, and
//! deterministic replay.
//!
//! Every agent call is content-addressed: the request digest covers the
//! agent name, system prompt, canonicalized user payload, schema id, and
//! image digests. Replay mode looks responses up by digest and never touches
//! a transport, which makes full pipeline runs bit-reproducible.

mod prompts;
mod transcript;
mod transport;

pub use prompts::{schema_document, schema_registry, PromptSet};
pub use transcript::{AgentTranscript, TranscriptEntry, TranscriptMode};
pub use transport::{Transport, TransportFailure, WireMessage};

#[cfg(feature = "live-transport")]
pub use transport::HttpTransport;

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// The agent roster. Each agent has a fixed response schema and a default
/// sampling temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum AgentName {
    DiscourseParser,
    CommitmentBuilder,
    SlidePlanner,
    NarrativeCritic,
    NarrativeJudge,
    Reviser,
    DeckConstructor,
    AestheticsRefiner,
    QuizGenerator,
    QuizTaker,
    JudgeScorer,
    PairwiseJudge,
}

impl AgentName {
    pub const ALL: [AgentName; 12] = [
        AgentName::DiscourseParser,
        AgentName::CommitmentBuilder,
        AgentName::SlidePlanner,
        AgentName::NarrativeCritic,
        AgentName::NarrativeJudge,
        AgentName::Reviser,
        AgentName::DeckConstructor,
        AgentName::AestheticsRefiner,
        AgentName::QuizGenerator,
        AgentName::QuizTaker,
        AgentName::JudgeScorer,
        AgentName::PairwiseJudge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentName::DiscourseParser => "DiscourseParser",
            AgentName::CommitmentBuilder => "CommitmentBuilder",
            AgentName::SlidePlanner => "SlidePlanner",
            AgentName::NarrativeCritic => "NarrativeCritic",
            AgentName::NarrativeJudge => "NarrativeJudge",
            AgentName::Reviser => "Reviser",
            AgentName::DeckConstructor => "DeckConstructor",
            AgentName::AestheticsRefiner => "AestheticsRefiner",
            AgentName::QuizGenerator => "QuizGenerator",
            AgentName::QuizTaker => "QuizTaker",
            AgentName::JudgeScorer => "JudgeScorer",
            AgentName::PairwiseJudge => "PairwiseJudge",
        }
    }

    /// The agent name determines the response schema.
    pub fn schema_id(self) -> &'static str {
        match self {
            AgentName::DiscourseParser => "discourse.tree.v1",
            AgentName::CommitmentBuilder => "commitment.v1",
            AgentName::SlidePlanner => "outline.v1",
            AgentName::NarrativeCritic => "critique.v1",
            AgentName::NarrativeJudge => "verdict.v1",
            AgentName::Reviser => "outline.v1",
            AgentName::DeckConstructor => "deck.draft.v1",
            AgentName::AestheticsRefiner => "deck.refine.v1",
            AgentName::QuizGenerator => "quiz.items.v1",
            AgentName::QuizTaker => "quiz.answers.v1",
            AgentName::JudgeScorer => "rubric.v1",
            AgentName::PairwiseJudge => "pairwise.vote.v1",
        }
    }

    /// Validator-critical agents sample at temperature 0; generative agents
    /// at 0.3.
    pub fn default_temperature(self) -> f64 {
        match self {
            AgentName::DiscourseParser
            | AgentName::NarrativeJudge
            | AgentName::QuizTaker
            | AgentName::JudgeScorer
            | AgentName::PairwiseJudge => 0.0,
            _ => 0.3,
        }
    }

    /// Only these agents may receive image attachments.
    pub fn vision_capable(self) -> bool {
        matches!(
            self,
            AgentName::QuizTaker | AgentName::JudgeScorer | AgentName::PairwiseJudge
        )
    }

    /// Evaluation-side agents use the evaluation model; the rest use the
    /// generation model.
    pub fn is_evaluation(self) -> bool {
        matches!(
            self,
            AgentName::QuizGenerator
                | AgentName::QuizTaker
                | AgentName::JudgeScorer
                | AgentName::PairwiseJudge
        )
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport exhausted after {attempts} attempts: {message}")]
    TransportExhausted { attempts: u32, message: String },
    #[error("replay transcript has no response for digest {digest} (agent {agent})")]
    ReplayMiss { digest: String, agent: String },
    #[error("agent response failed schema validation after {attempts} attempts: {last_error}")]
    SchemaFailure { attempts: u32, last_error: String },
    #[error("transcript corrupt at line {line}: {message}")]
    CorruptTranscript { line: usize, message: String },
    #[error("agent {agent} is not vision-capable but the request carries images")]
    ImagesNotSupported { agent: String },
    #[error("gateway mode {mode:?} requires a transport but none is configured")]
    NoTransport { mode: GatewayMode },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageAttachment {
    /// MIME type, e.g. `image/png`.
    pub media_type: String,
    pub bytes: Vec<u8>,
}

impl ImageAttachment {
    pub fn png(bytes: Vec<u8>) -> Self {
        ImageAttachment {
            media_type: "image/png".to_string(),
            bytes,
        }
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}

/// One schema-constrained request to an agent.
#[derive(Debug, Clone)]
pub struct AgentRequest {
    pub agent: AgentName,
    pub system_prompt: String,
    pub user_payload: String,
    pub schema_id: String,
    pub images: Vec<ImageAttachment>,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl AgentRequest {
    pub fn new(agent: AgentName, user_payload: String) -> Self {
        AgentRequest {
            agent,
            system_prompt: PromptSet::default().system_prompt(agent),
            user_payload,
            schema_id: agent.schema_id().to_string(),
            images: Vec::new(),
            temperature: agent.default_temperature(),
            max_output_tokens: 8192,
        }
    }

    pub fn with_images(mut self, images: Vec<ImageAttachment>) -> Result<Self, GatewayError> {
        if !images.is_empty() && !self.agent.vision_capable() {
            return Err(GatewayError::ImagesNotSupported {
                agent: self.agent.as_str().to_string(),
            });
        }
        self.images = images;
        Ok(self)
    }

    fn with_payload(&self, payload: String) -> AgentRequest {
        AgentRequest {
            user_payload: payload,
            ..self.clone()
        }
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Canonical compact JSON: object keys sorted, no insignificant whitespace.
/// Non-JSON strings pass through unchanged.
pub fn canonical_payload(payload: &str) -> String {
    match serde_json::from_str::<Value>(payload) {
        // serde_json maps are BTree-backed, so re-serializing sorts keys.
        Ok(v) => v.to_string(),
        Err(_) => payload.to_string(),
    }
}

/// Content digest of a request: agent name, system prompt, canonicalized
/// payload, schema id, and image digests. Sampling parameters are excluded
/// so replay survives temperature tweaks.
pub fn request_digest(request: &AgentRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"slidewright.request.v1\x00");
    hasher.update(request.agent.as_str().as_bytes());
    hasher.update(b"\x00");
    hasher.update(request.system_prompt.as_bytes());
    hasher.update(b"\x00");
    hasher.update(canonical_payload(&request.user_payload).as_bytes());
    hasher.update(b"\x00");
    hasher.update(request.schema_id.as_bytes());
    for image in &request.images {
        hasher.update(b"\x00");
        hasher.update(image.digest().as_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    Live,
    Record,
    Replay,
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub mode: GatewayMode,
    pub transcript_path: Option<PathBuf>,
    /// Repair retries after the first failed validation (total attempts =
    /// 1 + this).
    pub max_repair_attempts: u32,
    /// Transport retries per attempt, with exponential backoff.
    pub max_transport_retries: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
    pub generation_model: String,
    pub evaluation_model: String,
    pub prompts: PromptSet,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        let generation_model =
            std::env::var("SLIDEWRIGHT_GEN_MODEL").unwrap_or_else(|_| "gpt-4o".to_string());
        let evaluation_model =
            std::env::var("SLIDEWRIGHT_EVAL_MODEL").unwrap_or_else(|_| generation_model.clone());
        GatewayConfig {
            mode: GatewayMode::Replay,
            transcript_path: None,
            max_repair_attempts: 3,
            max_transport_retries: 3,
            backoff_base_ms: 250,
            max_in_flight: 4,
            generation_model,
            evaluation_model,
            prompts: PromptSet::default(),
        }
    }
}

struct ReplayState {
    queues: BTreeMap<String, VecDeque<String>>,
}

/// Shareable handle for all agent traffic.
pub struct Gateway {
    config: GatewayConfig,
    transport: Option<Arc<dyn Transport>>,
    replay: Mutex<ReplayState>,
    recorder: Mutex<Option<transcript::TranscriptWriter>>,
    in_flight: Mutex<usize>,
    slot_freed: Condvar,
    transport_calls: AtomicU64,
}

impl Gateway {
    /// Replay responses from a transcript file; never touches a transport.
    pub fn replay(transcript_path: &Path) -> Result<Self, GatewayError> {
        let config = GatewayConfig {
            mode: GatewayMode::Replay,
            transcript_path: Some(transcript_path.to_path_buf()),
            ..GatewayConfig::default()
        };
        Gateway::with_config(config, None)
    }

    /// Call `transport` and append every raw response to `transcript_path`.
    pub fn record(
        transport: Arc<dyn Transport>,
        transcript_path: &Path,
    ) -> Result<Self, GatewayError> {
        let config = GatewayConfig {
            mode: GatewayMode::Record,
            transcript_path: Some(transcript_path.to_path_buf()),
            ..GatewayConfig::default()
        };
        Gateway::with_config(config, Some(transport))
    }

    /// Call `transport` without recording.
    pub fn live(transport: Arc<dyn Transport>) -> Result<Self, GatewayError> {
        let config = GatewayConfig {
            mode: GatewayMode::Live,
            ..GatewayConfig::default()
        };
        Gateway::with_config(config, Some(transport))
    }

    pub fn with_config(
        config: GatewayConfig,
        transport: Option<Arc<dyn Transport>>,
    ) -> Result<Self, GatewayError> {
        let mut replay = ReplayState {
            queues: BTreeMap::new(),
        };
        match config.mode {
            GatewayMode::Replay => {
                let path = config
                    .transcript_path
                    .as_ref()
                    .expect("replay mode requires a transcript path");
                let transcript = AgentTranscript::load(path)?;
                for entry in transcript.entries {
                    replay
                        .queues
                        .entry(entry.digest)
                        .or_default()
                        .push_back(entry.response);
                }
            }
            GatewayMode::Record | GatewayMode::Live => {
                if transport.is_none() {
                    return Err(GatewayError::NoTransport { mode: config.mode });
                }
            }
        }
        let recorder = match (config.mode, &config.transcript_path) {
            (GatewayMode::Record, Some(path)) => Some(transcript::TranscriptWriter::create(path)?),
            _ => None,
        };
        Ok(Gateway {
            config,
            transport,
            replay: Mutex::new(replay),
            recorder: Mutex::new(recorder),
            in_flight: Mutex::new(0),
            slot_freed: Condvar::new(),
            transport_calls: AtomicU64::new(0),
        })
    }

    pub fn mode(&self) -> GatewayMode {
        self.config.mode
    }

    /// Number of transport sends issued so far; zero for a replay run.
    pub fn transport_call_count(&self) -> u64 {
        self.transport_calls.load(Ordering::SeqCst)
    }

    /// Build a request for `agent`, applying any prompt overrides from the
    /// gateway configuration.
    pub fn request(&self, agent: AgentName, user_payload: String) -> AgentRequest {
        AgentRequest {
            system_prompt: self.config.prompts.system_prompt(agent),
            ..AgentRequest::new(agent, user_payload)
        }
    }

    /// Issue a request and validate the JSON response. On validation
    /// failure, re-prompts with the error appended, up to the configured
    /// repair bound (1 + max_repair_attempts total attempts). Returns
    /// `SchemaFailure` after exhaustion so callers can apply module-level
    /// fallbacks.
    pub fn call<T>(
        &self,
        request: &AgentRequest,
        validate: impl Fn(&Value) -> Result<T, String>,
    ) -> Result<T, GatewayError> {
        if !request.images.is_empty() && !request.agent.vision_capable() {
            return Err(GatewayError::ImagesNotSupported {
                agent: request.agent.as_str().to_string(),
            });
        }
        let _slot = self.acquire_slot();
        let total_attempts = 1 + self.config.max_repair_attempts;
        let mut payload = request.user_payload.clone();
        let mut last_error = String::new();
        for attempt in 1..=total_attempts {
            let attempt_request = request.with_payload(payload);
            let digest = request_digest(&attempt_request);
            let raw = self.fetch(&attempt_request, &digest, attempt)?;
            match parse_json_response(&raw).and_then(|value| validate(&value)) {
                Ok(out) => return Ok(out),
                Err(err) => {
                    last_error = err;
                    payload = format!(
                        "{}\n\nYour previous response was rejected: {}\nRespond again with a single corrected JSON value and nothing else.",
                        request.user_payload, last_error
                    );
                }
            }
        }
        Err(GatewayError::SchemaFailure {
            attempts: total_attempts,
            last_error,
        })
    }

    fn fetch(
        &self,
        request: &AgentRequest,
        digest: &str,
        attempt: u32,
    ) -> Result<String, GatewayError> {
        match self.config.mode {
            GatewayMode::Replay => {
                let mut replay = self.replay.lock().unwrap();
                replay
                    .queues
                    .get_mut(digest)
                    .and_then(VecDeque::pop_front)
                    .ok_or_else(|| GatewayError::ReplayMiss {
                        digest: digest.to_string(),
                        agent: request.agent.as_str().to_string(),
                    })
            }
            GatewayMode::Record | GatewayMode::Live => {
                let raw = self.send_with_backoff(request)?;
                if let Some(writer) = self.recorder.lock().unwrap().as_mut() {
                    writer.append(&TranscriptEntry::new(
                        digest.to_string(),
                        request.agent.as_str().to_string(),
                        attempt,
                        raw.clone(),
                    ))?;
                }
                Ok(raw)
            }
        }
    }

    fn send_with_backoff(&self, request: &AgentRequest) -> Result<String, GatewayError> {
        let transport = self.transport.as_ref().ok_or(GatewayError::NoTransport {
            mode: self.config.mode,
        })?;
        let model = if request.agent.is_evaluation() {
            &self.config.evaluation_model
        } else {
            &self.config.generation_model
        };
        let total = 1 + self.config.max_transport_retries;
        let mut last = String::new();
        for attempt in 0..total {
            if attempt > 0 {
                let delay = self.config.backoff_base_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(std::time::Duration::from_millis(delay));
            }
            self.transport_calls.fetch_add(1, Ordering::SeqCst);
            match transport.send(model, request) {
                Ok(raw) => return Ok(raw),
                Err(failure) => {
                    last = failure.message;
                    if !failure.retryable {
                        return Err(GatewayError::TransportExhausted {
                            attempts: attempt + 1,
                            message: last,
                        });
                    }
                }
            }
        }
        Err(GatewayError::TransportExhausted {
            attempts: total,
            message: last,
        })
    }

    fn acquire_slot(&self) -> SlotGuard<'_> {
        let mut count = self.in_flight.lock().unwrap();
        while *count >= self.config.max_in_flight.max(1) {
            count = self.slot_freed.wait(count).unwrap();
        }
        *count += 1;
        SlotGuard { gateway: self }
    }
}

struct SlotGuard<'a> {
    gateway: &'a Gateway,
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        let mut count = self.gateway.in_flight.lock().unwrap();
        *count -= 1;
        self.gateway.slot_freed.notify_one();
    }
}

/// Parse a model response as JSON, tolerating markdown fences and prose
/// around the object.
pub fn parse_json_response(raw: &str) -> Result<Value, String> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Ok(v);
    }
    if let Some(stripped) = strip_fences(trimmed) {
        if let Ok(v) = serde_json::from_str(stripped.trim()) {
            return Ok(v);
        }
    }
    let start = trimmed.find(['{', '[']);
    let end = trimmed.rfind(['}', ']']);
    if let (Some(s), Some(e)) = (start, end) {
        if s < e {
            if let Ok(v) = serde_json::from_str(&trimmed[s..=e]) {
                return Ok(v);
            }
        }
    }
    Err(format!(
        "response is not parseable JSON (starts with {:?})",
        trimmed.chars().take(40).collect::<String>()
    ))
}

fn strip_fences(text: &str) -> Option<&str> {
    let rest = text.strip_prefix("```")?;
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    let end = rest.rfind("```")?;
    Some(&rest[..end])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testsupport::QueueTransport;

    #[test]
    fn every_agent_has_a_registered_schema() {
        let registry = schema_registry();
        for agent in AgentName::ALL {
            assert!(
                registry.contains_key(agent.schema_id()),
                "missing schema for {}",
                agent.as_str()
            );
        }
    }

    #[test]
    fn digest_is_independent_of_payload_key_order() {
        let a = AgentRequest::new(
            AgentName::NarrativeJudge,
            r#"{"b": 1, "a": {"y": 2, "x": 3}}"#.to_string(),
        );
        let b = AgentRequest::new(
            AgentName::NarrativeJudge,
            r#"{ "a": {"x": 3, "y": 2}, "b": 1 }"#.to_string(),
        );
        assert_eq!(request_digest(&a), request_digest(&b));

        let c = AgentRequest::new(AgentName::NarrativeJudge, r#"{"b": 2, "a": 1}"#.to_string());
        assert_ne!(request_digest(&a), request_digest(&c));
    }

    #[test]
    fn digest_distinguishes_agents_and_images() {
        let a = AgentRequest::new(AgentName::QuizTaker, "payload".to_string());
        let b = AgentRequest::new(AgentName::PairwiseJudge, "payload".to_string());
        assert_ne!(request_digest(&a), request_digest(&b));

        let with_image = a
            .clone()
            .with_images(vec![ImageAttachment::png(vec![1, 2, 3])])
            .unwrap();
        assert_ne!(request_digest(&a), request_digest(&with_image));
    }

    #[test]
    fn images_rejected_for_text_agents() {
        let req = AgentRequest::new(AgentName::SlidePlanner, "p".to_string())
            .with_images(vec![ImageAttachment::png(vec![0])]);
        assert!(matches!(req, Err(GatewayError::ImagesNotSupported { .. })));
    }

    #[test]
    fn json_parsing_tolerates_fences_and_prose() {
        assert!(parse_json_response("{\"a\": 1}").is_ok());
        assert!(parse_json_response("```json\n{\"a\": 1}\n```").is_ok());
        assert!(parse_json_response("Here you go:\n{\"a\": 1}\nHope that helps!").is_ok());
        assert!(parse_json_response("no json here").is_err());
    }

    #[test]
    fn two_malformed_then_valid_succeeds_with_three_recorded_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let transport = Arc::new(QueueTransport::new(vec![
            "not json".to_string(),
            r#"{"wrong": true}"#.to_string(),
            r#"{"ok": true}"#.to_string(),
        ]));
        let gateway = Gateway::record(transport, &path).unwrap();
        let request = gateway.request(AgentName::NarrativeJudge, "{}".to_string());
        let out: bool = gateway
            .call(&request, |v| {
                v.get("ok")
                    .and_then(Value::as_bool)
                    .ok_or_else(|| "expected {\"ok\": bool}".to_string())
            })
            .unwrap();
        assert!(out);
        drop(gateway);

        let transcript = AgentTranscript::load(&path).unwrap();
        assert_eq!(transcript.entries.len(), 3);
        assert_eq!(transcript.entries[0].attempt, 1);
        assert_eq!(transcript.entries[2].attempt, 3);
        // The repaired payloads differ, so digests differ.
        assert_ne!(transcript.entries[0].digest, transcript.entries[1].digest);
    }

    #[test]
    fn repair_bound_is_four_total_attempts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let transport = Arc::new(QueueTransport::new(vec!["garbage".to_string(); 10]));
        let gateway = Gateway::record(transport.clone(), &path).unwrap();
        let request = gateway.request(AgentName::SlidePlanner, "{}".to_string());
        let err = gateway
            .call(&request, |_| Err::<(), String>("always invalid".to_string()))
            .unwrap_err();
        match err {
            GatewayError::SchemaFailure { attempts, .. } => assert_eq!(attempts, 4),
            other => panic!("unexpected: {other:?}"),
        }
        assert_eq!(gateway.transport_call_count(), 4);
    }

    #[test]
    fn replay_round_trip_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let transport = Arc::new(QueueTransport::new(vec![r#"{"n": 7}"#.to_string()]));
        let gateway = Gateway::record(transport, &path).unwrap();
        let request = gateway.request(AgentName::CommitmentBuilder, r#"{"q": 1}"#.to_string());
        let n: i64 = gateway
            .call(&request, |v| {
                v.get("n").and_then(Value::as_i64).ok_or_else(|| "n".to_string())
            })
            .unwrap();
        assert_eq!(n, 7);
        drop(gateway);

        let replayed = Gateway::replay(&path).unwrap();
        let n: i64 = replayed
            .call(&request, |v| {
                v.get("n").and_then(Value::as_i64).ok_or_else(|| "n".to_string())
            })
            .unwrap();
        assert_eq!(n, 7);
        assert_eq!(replayed.transport_call_count(), 0);

        let other = replayed.request(AgentName::CommitmentBuilder, r#"{"q": 2}"#.to_string());
        let err = replayed.call(&other, |v| Ok::<Value, String>(v.clone())).unwrap_err();
        assert!(matches!(err, GatewayError::ReplayMiss { .. }));
    }
}
