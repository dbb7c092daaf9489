//! The query loop: NLQ and tool declarations go to a language-model backend,
//! tool calls come back and are dispatched, results are fed back, and the
//! backend's final text becomes the NLR.

mod http;
mod mock;
mod prompt;
mod repl;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::registry::{wire_declaration, Grounding, ToolCall, ToolRegistry};
use crate::tools::ToolResult;

pub use http::ChatCompletionsClient;
pub use mock::{MockBackend, MockCall, MockEntry, MockNoise, MockScript};
pub use prompt::{build_system_prompt, context_report, estimate_tokens, ContextReport, CHARS_PER_TOKEN};
pub use repl::{chat_repl, QueryRouter};

/// Upper bound on tool-call rounds within one attempt.
pub const MAX_TOOL_ROUNDS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("invalid agent configuration: {0}")]
    Config(String),
}

/// Connection details for a chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    /// Base URL, e.g. `http://localhost:11434/v1`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_seconds: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: "http://localhost:11434/v1".into(),
            model: "qwen2:7b".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_seconds: 120,
        }
    }
}

/// Generation settings for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub temperature: f64,
    pub seed: u64,
    pub context_budget_tokens: usize,
    pub max_generated_tokens: usize,
    pub transport_retries: u32,
    pub empty_output_retries: u32,
    pub backend: BackendConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            temperature: 0.0,
            seed: 1,
            context_budget_tokens: 8192,
            max_generated_tokens: 512,
            transport_retries: 2,
            empty_output_retries: 5,
            backend: BackendConfig::default(),
        }
    }
}

impl AgentConfig {
    /// Rejects impossible settings and returns warnings for risky ones.
    pub fn validate(&self) -> Result<Vec<String>, BackendError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::Config(format!(
                "temperature must be within [0, 2], got {}",
                self.temperature
            )));
        }
        if self.max_generated_tokens == 0 {
            return Err(BackendError::Config("max_generated_tokens must be positive".into()));
        }
        let mut warnings = Vec::new();
        if self.context_budget_tokens < 8192 {
            warnings.push(format!(
                "context budget of {} tokens is below 8192; tool declarations may not fit",
                self.context_budget_tokens
            ));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

/// A tool call as it appears in an assistant turn: arguments are raw JSON text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistantToolCall {
    pub id: String,
    pub name: String,
    pub arguments: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<AssistantToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl Message {
    pub fn system(text: &str) -> Self {
        Self::plain(Role::System, text)
    }

    pub fn user(text: &str) -> Self {
        Self::plain(Role::User, text)
    }

    pub fn assistant(text: &str) -> Self {
        Self::plain(Role::Assistant, text)
    }

    pub fn tool(call_id: &str, text: &str) -> Self {
        Message {
            role: Role::Tool,
            content: text.to_string(),
            tool_calls: Vec::new(),
            tool_call_id: Some(call_id.to_string()),
        }
    }

    fn plain(role: Role, text: &str) -> Self {
        Message {
            role,
            content: text.to_string(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }
}

/// Ordered turns of one attempt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub messages: Vec<Message>,
}

impl Conversation {
    pub fn push(&mut self, m: Message) {
        self.messages.push(m);
    }

    /// Every tool turn answers an earlier assistant tool call.
    pub fn tool_turns_are_linked(&self) -> bool {
        self.messages.iter().enumerate().all(|(i, m)| {
            m.role != Role::Tool
                || m.tool_call_id.as_ref().is_some_and(|id| {
                    self.messages[..i]
                        .iter()
                        .any(|p| p.tool_calls.iter().any(|c| &c.id == id))
                })
        })
    }
}

/// What the backend is asked to complete.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub messages: &'a [Message],
    /// Wire declarations; empty when tools are withheld.
    pub tools: &'a [Value],
    pub config: &'a AgentConfig,
    /// Benchmark item being answered, when known. Only scripted backends use it.
    pub item_id: Option<&'a str>,
    /// Zero-based whole-query attempt number.
    pub attempt: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub content: String,
    pub tool_calls: Vec<AssistantToolCall>,
}

/// A language-model endpoint. Implementations must be shareable across threads.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError>;

    /// Short human-readable name for reports.
    fn label(&self) -> String;
}

/// Result of dispatching one tool call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ToolOutcome {
    Ok { result: ToolResult },
    Error { tool_name: String, message: String },
}

impl ToolOutcome {
    /// Text handed back to the backend as the tool turn.
    pub fn content(&self) -> String {
        match self {
            ToolOutcome::Ok { result } => result.payload_text(),
            ToolOutcome::Error { message, .. } => format!("error: {message}"),
        }
    }

    pub fn result(&self) -> Option<&ToolResult> {
        match self {
            ToolOutcome::Ok { result } => Some(result),
            ToolOutcome::Error { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryFailure {
    Transport { message: String },
    EmptyOutput { attempts: u32 },
}

impl std::fmt::Display for QueryFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QueryFailure::Transport { message } => write!(f, "transport failure: {message}"),
            QueryFailure::EmptyOutput { attempts } => write!(f, "empty response after {attempts} attempts"),
        }
    }
}

/// Everything recorded for one NLQ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub nlq: String,
    pub nlr: String,
    /// Calls of the final attempt, in emission order.
    pub calls: Vec<ToolCall>,
    /// `results[i]` answers `calls[i]`.
    pub results: Vec<ToolOutcome>,
    pub wall_seconds: f64,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<QueryFailure>,
}

impl QueryOutcome {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Registry plus backend plus settings.
pub struct Agent<'r> {
    registry: &'r ToolRegistry,
    backend: &'r dyn Backend,
    config: AgentConfig,
    system_prompt: String,
    tools: Vec<Value>,
}

impl<'r> Agent<'r> {
    pub fn new(
        registry: &'r ToolRegistry,
        backend: &'r dyn Backend,
        config: AgentConfig,
    ) -> Result<Self, BackendError> {
        for w in config.validate()? {
            tracing::warn!("{w}");
        }
        let system_prompt = build_system_prompt(registry);
        let declarations = registry.export_schemas();
        let report = context_report(&system_prompt, &declarations, config.context_budget_tokens);
        if !report.fits() {
            tracing::warn!(
                "system prompt and tool declarations need about {} tokens, over the {} token budget",
                report.estimated_tokens,
                report.budget_tokens
            );
        }
        Ok(Agent {
            registry,
            backend,
            tools: declarations.iter().map(wire_declaration).collect(),
            config,
            system_prompt,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn backend_label(&self) -> String {
        self.backend.label()
    }

    /// Answers one NLQ. Never fails: every problem is recorded on the outcome.
    pub fn answer(&self, nlq: &str, grounding: &Grounding<'_>, item_id: Option<&str>) -> QueryOutcome {
        let started = Instant::now();
        let mut outcome = QueryOutcome {
            nlq: nlq.to_string(),
            nlr: String::new(),
            calls: Vec::new(),
            results: Vec::new(),
            wall_seconds: 0.0,
            attempts: 0,
            failure: None,
        };
        for attempt in 0..=self.config.empty_output_retries {
            outcome.attempts = attempt + 1;
            outcome.calls.clear();
            outcome.results.clear();
            match self.run_attempt(nlq, grounding, item_id, attempt, &mut outcome) {
                Ok(text) if !text.trim().is_empty() => {
                    outcome.nlr = text;
                    break;
                }
                Ok(_) => {
                    tracing::debug!(attempt, "empty response, retrying query");
                }
                Err(e) => {
                    outcome.failure = Some(QueryFailure::Transport { message: e.to_string() });
                    break;
                }
            }
        }
        if outcome.nlr.trim().is_empty() && outcome.failure.is_none() {
            outcome.nlr.clear();
            outcome.failure = Some(QueryFailure::EmptyOutput {
                attempts: outcome.attempts,
            });
        }
        outcome.wall_seconds = started.elapsed().as_secs_f64();
        outcome
    }

    fn run_attempt(
        &self,
        nlq: &str,
        grounding: &Grounding<'_>,
        item_id: Option<&str>,
        attempt: u32,
        outcome: &mut QueryOutcome,
    ) -> Result<String, BackendError> {
        let mut conversation = Conversation::default();
        conversation.push(Message::system(&self.system_prompt));
        conversation.push(Message::user(nlq));
        let mut rounds = 0;
        loop {
            let offer_tools = rounds < MAX_TOOL_ROUNDS;
            let request = CompletionRequest {
                messages: &conversation.messages,
                tools: if offer_tools { &self.tools } else { &[] },
                config: &self.config,
                item_id,
                attempt,
            };
            let completion = self.backend.complete(&request)?;
            if completion.tool_calls.is_empty() || !offer_tools {
                return Ok(completion.content);
            }
            rounds += 1;
            let mut turn = Message::assistant(&completion.content);
            turn.tool_calls = completion
                .tool_calls
                .iter()
                .enumerate()
                .map(|(k, c)| AssistantToolCall {
                    id: if c.id.is_empty() {
                        format!("call_{rounds}_{k}")
                    } else {
                        c.id.clone()
                    },
                    ..c.clone()
                })
                .collect();
            let emitted = turn.tool_calls.clone();
            conversation.push(turn);
            for tc in &emitted {
                let (call, result) = self.execute(tc, grounding);
                conversation.push(Message::tool(&tc.id, &result.content()));
                outcome.calls.push(call);
                outcome.results.push(result);
            }
            debug_assert!(conversation.tool_turns_are_linked());
        }
    }

    fn execute(&self, tc: &AssistantToolCall, grounding: &Grounding<'_>) -> (ToolCall, ToolOutcome) {
        let raw = parse_arguments(&tc.arguments);
        let call = match raw {
            Ok(raw) => self.registry.prepare_call(&tc.name, raw),
            Err(message) => ToolCall {
                tool_name: tc.name.clone(),
                args: Default::default(),
                raw_args: Map::new(),
                warnings: Vec::new(),
                error: Some(message),
            },
        };
        let outcome = match &call.error {
            Some(message) => ToolOutcome::Error {
                tool_name: call.tool_name.clone(),
                message: message.clone(),
            },
            None => match self.registry.validate_and_dispatch(&call, grounding) {
                Ok(result) => ToolOutcome::Ok { result },
                Err(e) => {
                    tracing::info!(tool = %call.tool_name, "tool error: {e}");
                    ToolOutcome::Error {
                        tool_name: call.tool_name.clone(),
                        message: e.to_string(),
                    }
                }
            },
        };
        (call, outcome)
    }
}

/// Tool arguments arrive as JSON text; empty text means no arguments.
fn parse_arguments(text: &str) -> Result<Map<String, Value>, String> {
    if text.trim().is_empty() {
        return Ok(Map::new());
    }
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(Value::Null) => Ok(Map::new()),
        Ok(other) => Err(format!("tool arguments must be a JSON object, got {other}")),
        Err(e) => Err(format!("tool arguments are not valid JSON: {e}")),
    }
}
