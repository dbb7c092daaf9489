//! Blocking chat-completions client with function calling.

use std::time::Duration;

use serde_json::{json, Value};

use super::{AssistantToolCall, Backend, BackendConfig, BackendError, Completion, CompletionRequest, Message, Role};

pub struct ChatCompletionsClient {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
}

impl ChatCompletionsClient {
    /// Reads the API key from the environment variable named in `config`.
    /// A missing variable means no `Authorization` header (local servers).
    pub fn new(config: &BackendConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_api_key(config, api_key)
    }

    pub fn with_api_key(config: &BackendConfig, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_seconds.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        let base = config.endpoint.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        ChatCompletionsClient {
            agent,
            url,
            model: config.model.clone(),
            api_key,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Request body for one completion.
    pub fn request_body(&self, request: &CompletionRequest<'_>) -> Value {
        let messages: Vec<Value> = request.messages.iter().map(message_json).collect();
        let mut body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": request.config.temperature,
            "seed": request.config.seed,
            "max_tokens": request.config.max_generated_tokens,
        });
        if !request.tools.is_empty() {
            body["tools"] = Value::Array(request.tools.to_vec());
        }
        body
    }

    fn post_once(&self, body: &Value) -> Result<Value, Attempt> {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        match status {
            200..=299 => serde_json::from_str(&text)
                .map_err(|e| Attempt::Fatal(BackendError::Protocol(format!("invalid JSON response: {e}")))),
            429 | 500..=599 => Attempt::retry(format!("HTTP {status}: {}", snippet(&text))),
            _ => Err(Attempt::Fatal(BackendError::Protocol(format!(
                "HTTP {status}: {}",
                snippet(&text)
            )))),
        }
    }
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl Attempt {
    fn retry<T>(message: String) -> Result<T, Attempt> {
        Err(Attempt::Retry(message))
    }
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}

fn message_json(m: &Message) -> Value {
    let role = match m.role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
        Role::Tool => "tool",
    };
    let mut v = json!({ "role": role, "content": m.content });
    if !m.tool_calls.is_empty() {
        if m.content.is_empty() {
            v["content"] = Value::Null;
        }
        v["tool_calls"] = m
            .tool_calls
            .iter()
            .map(|c| {
                json!({
                    "id": c.id,
                    "type": "function",
                    "function": { "name": c.name, "arguments": c.arguments },
                })
            })
            .collect();
    }
    if let Some(id) = &m.tool_call_id {
        v["tool_call_id"] = Value::from(id.as_str());
    }
    v
}

/// Extracts text and tool calls from a chat-completions response body.
pub(crate) fn parse_completion(body: &Value) -> Result<Completion, BackendError> {
    let message = body
        .pointer("/choices/0/message")
        .ok_or_else(|| BackendError::Protocol("response has no choices[0].message".into()))?;
    let content = message
        .get("content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let mut tool_calls = Vec::new();
    if let Some(calls) = message.get("tool_calls").and_then(Value::as_array) {
        for (k, c) in calls.iter().enumerate() {
            let func = c
                .get("function")
                .ok_or_else(|| BackendError::Protocol("tool call without function".into()))?;
            let name = func
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| BackendError::Protocol("tool call without name".into()))?;
            // some servers send arguments as an object instead of a JSON string
            let arguments = match func.get("arguments") {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Null) | None => String::new(),
                Some(other) => other.to_string(),
            };
            let id = c
                .get("id")
                .and_then(Value::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| format!("call_{k}"));
            tool_calls.push(AssistantToolCall {
                id,
                name: name.to_string(),
                arguments,
            });
        }
    }
    Ok(Completion { content, tool_calls })
}

impl Backend for ChatCompletionsClient {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let body = self.request_body(request);
        let retries = request.config.transport_retries;
        let mut last = String::new();
        for attempt in 0..=retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(250 << attempt.min(6)));
            }
            match self.post_once(&body) {
                Ok(v) => return parse_completion(&v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    tracing::warn!(attempt, "chat completion failed: {msg}");
                    last = msg;
                }
            }
        }
        Err(BackendError::Transport(format!(
            "{} after {} attempts: {last}",
            self.url,
            retries + 1
        )))
    }

    fn label(&self) -> String {
        self.model.clone()
    }
}
