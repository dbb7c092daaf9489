//! Scripted backend for offline runs and tests.
//!
//! Each entry is keyed by a benchmark item id or by NLQ text. On the first
//! turn the mock emits the entry's tool calls; once tool results are in the
//! conversation it replies with `final_text`, where `{key}` placeholders are
//! replaced by values from the tool payloads. Optional noise is drawn from an
//! RNG seeded by `(seed, match key, attempt)`, so the mock stays stateless and
//! reproducible.

use std::collections::BTreeMap;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{AssistantToolCall, Backend, BackendError, Completion, CompletionRequest, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockCall {
    pub name: String,
    #[serde(default)]
    pub arguments: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    /// Benchmark item id or exact NLQ text.
    #[serde(rename = "match")]
    pub match_key: String,
    /// Question text that also selects this entry when no item id is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nlq: Option<String>,
    #[serde(default)]
    pub calls: Vec<MockCall>,
    pub final_text: String,
    /// Number of leading attempts that end with empty text.
    #[serde(default)]
    pub empty_attempts: u32,
}

/// Seeded perturbations applied on top of the script.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockNoise {
    /// Chance that the first call of an item gets a wrong `time_interval`.
    #[serde(default)]
    pub corrupt_probability: f64,
    /// Chance, per attempt, that the final text is empty.
    #[serde(default)]
    pub empty_probability: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub entries: Vec<MockEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<MockNoise>,
}

impl MockScript {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, BackendError> {
        serde_json::from_reader(reader).map_err(|e| BackendError::Config(format!("mock script: {e}")))
    }
}

pub struct MockBackend {
    entries: BTreeMap<String, MockEntry>,
    noise: Option<MockNoise>,
    label: String,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        let mut entries = BTreeMap::new();
        for e in script.entries {
            if let Some(nlq) = &e.nlq {
                entries.entry(normalize(nlq)).or_insert_with(|| e.clone());
            }
            entries.insert(normalize(&e.match_key), e);
        }
        MockBackend {
            entries,
            noise: script.noise,
            label: "mock".into(),
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    fn lookup(&self, request: &CompletionRequest<'_>) -> Option<&MockEntry> {
        if let Some(e) = request.item_id.and_then(|id| self.entries.get(&normalize(id))) {
            return Some(e);
        }
        let nlq = request
            .messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())?;
        self.entries.get(&normalize(nlq))
    }

    fn rng(&self, seed: u64, key: &str, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed ^ fnv1a(key).rotate_left(17) ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let Some(entry) = self.lookup(request) else {
            return Ok(Completion::default());
        };
        let seed = request.config.seed;
        let tool_turns: Vec<&str> = request
            .messages
            .iter()
            .filter(|m| m.role == Role::Tool)
            .map(|m| m.content.as_str())
            .collect();

        if tool_turns.is_empty() && !entry.calls.is_empty() && !request.tools.is_empty() {
            let mut calls = entry.calls.clone();
            if let Some(noise) = &self.noise {
                let mut rng = self.rng(seed, &entry.match_key, u64::MAX);
                if noise.corrupt_probability > 0.0 && rng.random_bool(noise.corrupt_probability.min(1.0)) {
                    corrupt(&mut calls[0]);
                }
            }
            let tool_calls = calls
                .iter()
                .enumerate()
                .map(|(k, c)| AssistantToolCall {
                    id: format!("mock_{k}"),
                    name: c.name.clone(),
                    arguments: Value::Object(c.arguments.clone()).to_string(),
                })
                .collect();
            return Ok(Completion {
                content: String::new(),
                tool_calls,
            });
        }

        if request.attempt < entry.empty_attempts {
            return Ok(Completion::default());
        }
        if let Some(noise) = &self.noise {
            let mut rng = self.rng(seed, &entry.match_key, request.attempt as u64);
            if noise.empty_probability > 0.0 && rng.random_bool(noise.empty_probability.min(1.0)) {
                return Ok(Completion::default());
            }
        }
        Ok(Completion {
            content: render(&entry.final_text, &tool_turns),
            tool_calls: Vec::new(),
        })
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

fn normalize(key: &str) -> String {
    key.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn corrupt(call: &mut MockCall) {
    let bumped = match call.arguments.get("time_interval").and_then(Value::as_i64) {
        Some(n) => n + 1,
        None => 99,
    };
    call.arguments.insert("time_interval".into(), Value::from(bumped));
}

/// Replaces `{key}` with the value of `key` in the first tool payload that has it.
fn render(template: &str, tool_turns: &[&str]) -> String {
    if !template.contains('{') {
        return template.to_string();
    }
    let payloads: Vec<Map<String, Value>> = tool_turns
        .iter()
        .filter_map(|t| serde_json::from_str::<Value>(t).ok())
        .filter_map(|v| v.as_object().cloned())
        .collect();
    let mut out = template.to_string();
    for p in &payloads {
        for (k, v) in p {
            let placeholder = format!("{{{k}}}");
            if out.contains(&placeholder) {
                out = out.replace(&placeholder, &display_value(v));
            }
        }
    }
    out
}

fn display_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => {
                let rounded = format!("{f:.4}");
                let trimmed = rounded.trim_end_matches('0');
                if trimmed.ends_with('.') {
                    format!("{trimmed}0")
                } else {
                    trimmed.to_string()
                }
            }
            _ => n.to_string(),
        },
        Value::Array(items) if items.is_empty() => "none".into(),
        Value::Array(items) => items.iter().map(display_value).collect::<Vec<_>>().join(", "),
        other => other.to_string(),
    }
}
