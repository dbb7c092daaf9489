//! Per-item metrics.
//!
//! RR and MA are exact. LA and HR have a judge mode, where a language model
//! scores the answer against fixed rubric prompts, and a deterministic
//! keyword/token fallback used offline.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

use crate::agent::{AgentConfig, Backend, CompletionRequest, Message, QueryOutcome};
use crate::registry::multiset_match;

use super::BenchmarkItem;

const JUDGE_LA_V1: &str = include_str!("../../prompts/judge_la_v1.txt");
const JUDGE_HR_V1: &str = include_str!("../../prompts/judge_hr_v1.txt");

static TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?P<num>-?\d+(?:,\d{3})*(?:\.\d+)?)|(?P<word>[A-Za-z][A-Za-z0-9_']*)").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[-+]?\d+(?:,\d{3})*(?:\.\d+)?%?$").unwrap());
static SCORE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").unwrap());

const STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "between",
    "both", "but", "by", "can", "could", "did", "do", "does", "during", "each", "for", "from", "had", "has", "have",
    "here", "how", "i", "if", "in", "into", "is", "it", "its", "it's", "last", "more", "most", "no", "not", "of", "on",
    "or", "other", "over", "per", "so", "such", "than", "that", "the", "their", "them", "then", "there", "these",
    "they", "this", "those", "through", "to", "under", "up", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "will", "with", "would", "you", "your",
];

pub fn metric_rr(outcome: &QueryOutcome) -> f64 {
    if outcome.nlr.trim().is_empty() {
        0.0
    } else {
        1.0
    }
}

/// 1.0 iff the agent's calls equal the expected calls as a multiset. An
/// outcome without calls never scores.
pub fn metric_ma(outcome: &QueryOutcome, item: &BenchmarkItem) -> f64 {
    if !outcome.calls.is_empty() && multiset_match(&outcome.calls, &item.expected_calls) {
        1.0
    } else {
        0.0
    }
}

/// Canonical decimal form: `1`, `1.0` and `1.00` all map to `1`.
pub fn canonical_number(text: &str) -> Option<String> {
    let cleaned: String = text
        .trim()
        .trim_end_matches('%')
        .trim_start_matches('+')
        .chars()
        .filter(|c| *c != ',')
        .collect();
    let value: f64 = cleaned.parse().ok()?;
    if !value.is_finite() {
        return None;
    }
    Some(format!("{}", if value == 0.0 { 0.0 } else { value }))
}

/// Lowercased words and canonical numbers.
pub fn tokens(text: &str) -> Vec<String> {
    TOKEN
        .captures_iter(text)
        .filter_map(|c| {
            if let Some(n) = c.name("num") {
                canonical_number(n.as_str())
            } else {
                c.name("word").map(|w| w.as_str().to_lowercase())
            }
        })
        .collect()
}

fn content_tokens(text: &str) -> Vec<String> {
    tokens(text)
        .into_iter()
        .filter(|t| !STOP_WORDS.contains(&t.as_str()))
        .collect()
}

/// Fraction of expected keywords found in `nlr`. Numeric keywords match a
/// number in the text after canonical formatting, others match as
/// case-insensitive substrings. No keywords scores 1.0.
pub fn keyword_coverage(nlr: &str, keywords: &[String]) -> f64 {
    if keywords.is_empty() {
        return 1.0;
    }
    let lower = nlr.to_lowercase();
    let numbers: HashSet<String> = TOKEN
        .captures_iter(nlr)
        .filter_map(|c| c.name("num").and_then(|n| canonical_number(n.as_str())))
        .collect();
    let hits = keywords
        .iter()
        .filter(|k| {
            if NUMBER.is_match(k.trim()) {
                canonical_number(k).is_some_and(|c| numbers.contains(&c))
            } else {
                lower.contains(&k.trim().to_lowercase())
            }
        })
        .count();
    hits as f64 / keywords.len() as f64
}

/// Fraction of content tokens in `nlr` that appear in neither the expected
/// NLR, the keywords nor the stubbed tool payloads. No content tokens
/// scores 0.0.
pub fn unsupported_fraction(nlr: &str, item: &BenchmarkItem) -> f64 {
    let actual = content_tokens(nlr);
    if actual.is_empty() {
        return 0.0;
    }
    let mut supported: HashSet<String> = tokens(&item.expected_nlr).into_iter().collect();
    for k in &item.expected_keywords {
        supported.extend(tokens(k));
    }
    for r in &item.stub_results {
        supported.extend(tokens(&r.payload_text()));
    }
    let missing = actual.iter().filter(|t| !supported.contains(*t)).count();
    missing as f64 / actual.len() as f64
}

/// Scores LA and HR with a language model.
pub struct Judge<'a> {
    backend: &'a dyn Backend,
    config: AgentConfig,
}

impl<'a> Judge<'a> {
    pub fn new(backend: &'a dyn Backend, config: AgentConfig) -> Self {
        Judge { backend, config }
    }

    fn score(&self, rubric: &str, prompt: String) -> Option<f64> {
        let messages = [Message::system(rubric.trim_end()), Message::user(&prompt)];
        let request = CompletionRequest {
            messages: &messages,
            tools: &[],
            config: &self.config,
            item_id: None,
            attempt: 0,
        };
        let reply = match self.backend.complete(&request) {
            Ok(c) => c.content,
            Err(e) => {
                tracing::warn!("judge request failed: {e}");
                return None;
            }
        };
        let value: f64 = SCORE.find(&reply)?.as_str().parse().ok()?;
        (0.0..=1.0).contains(&value).then_some(value)
    }

    pub fn la(&self, nlr: &str, item: &BenchmarkItem) -> Option<f64> {
        self.score(
            JUDGE_LA_V1,
            format!(
                "Question: {}\nReference answer: {}\nCandidate answer: {}",
                item.nlq, item.expected_nlr, nlr
            ),
        )
    }

    pub fn hr(&self, nlr: &str, item: &BenchmarkItem) -> Option<f64> {
        let outputs: Vec<String> = item.stub_results.iter().map(|r| r.payload_text()).collect();
        self.score(
            JUDGE_HR_V1,
            format!(
                "Question: {}\nReference answer: {}\nTool outputs: {}\nCandidate answer: {}",
                item.nlq,
                item.expected_nlr,
                outputs.join("; "),
                nlr
            ),
        )
    }
}

/// How LA and HR are scored.
pub enum Scoring<'a> {
    Fallback,
    Judge(Judge<'a>),
}

/// LA and HR for an outcome with RR = 1, plus whether the judge had to be
/// replaced by the fallback.
pub fn metric_la_hr(outcome: &QueryOutcome, item: &BenchmarkItem, scoring: &Scoring<'_>) -> (f64, f64, bool) {
    let nlr = outcome.nlr.as_str();
    let fallback_la = || keyword_coverage(nlr, &item.expected_keywords);
    let fallback_hr = || unsupported_fraction(nlr, item);
    match scoring {
        Scoring::Fallback => (fallback_la(), fallback_hr(), false),
        Scoring::Judge(judge) => {
            let la = judge.la(nlr, item);
            let hr = judge.hr(nlr, item);
            let fell_back = la.is_none() || hr.is_none();
            (
                la.unwrap_or_else(fallback_la),
                hr.unwrap_or_else(fallback_hr),
                fell_back,
            )
        }
    }
}
