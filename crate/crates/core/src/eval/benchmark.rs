//! Benchmark TSV loading.
//!
//! Columns: `item_id`, `nlq`, `expected_keywords` (`|`-separated),
//! `expected_nlr`, `expected_calls` (JSON list of `{"name", "arguments"}`)
//! and `stub_results` (JSON list of payloads, one per expected call).

use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::agent::{MockCall, MockEntry, MockScript};
use crate::registry::{args_to_json, ToolCall, ToolRegistry};
use crate::tools::{StubEntry, StubTable, ToolKind, ToolResult};

use super::EvalError;

pub const COLUMNS: [&str; 6] = [
    "item_id",
    "nlq",
    "expected_keywords",
    "expected_nlr",
    "expected_calls",
    "stub_results",
];

pub const EXPECTED_ITEM_COUNT: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub item_id: String,
    pub nlq: String,
    pub expected_keywords: Vec<String>,
    pub expected_nlr: String,
    /// Default-filled at load time.
    pub expected_calls: Vec<ToolCall>,
    /// `stub_results[i]` answers `expected_calls[i]`.
    pub stub_results: Vec<ToolResult>,
}

pub fn load_benchmark(path: &Path, registry: &ToolRegistry) -> Result<Vec<BenchmarkItem>, EvalError> {
    let file = File::open(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_benchmark(file, registry)
}

pub fn parse_benchmark<R: Read>(reader: R, registry: &ToolRegistry) -> Result<Vec<BenchmarkItem>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| EvalError::MalformedRow {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut index = [0usize; 6];
    for (slot, column) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == column)
            .ok_or(EvalError::MissingColumn { column })?;
    }

    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| EvalError::MalformedRow {
            line,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let field = |k: usize| -> Result<&str, EvalError> {
            let v = record.get(index[k]).map(str::trim).unwrap_or_default();
            if v.is_empty() && k != 2 {
                return Err(EvalError::EmptyField {
                    line,
                    column: COLUMNS[k],
                });
            }
            Ok(v)
        };
        let item_id = field(0)?.to_string();
        if !seen.insert(item_id.clone()) {
            return Err(EvalError::DuplicateItem { item_id, line });
        }
        let expected_keywords = split_keywords(field(2)?);
        let expected_calls =
            parse_calls(field(4)?, registry).map_err(|message| EvalError::BadCalls { line, message })?;
        let stub_results =
            parse_stubs(field(5)?, &expected_calls).map_err(|message| EvalError::BadStubs { line, message })?;
        items.push(BenchmarkItem {
            item_id,
            nlq: field(1)?.to_string(),
            expected_keywords,
            expected_nlr: field(3)?.to_string(),
            expected_calls,
            stub_results,
        });
    }
    if items.len() != EXPECTED_ITEM_COUNT {
        tracing::warn!("benchmark has {} items, expected {EXPECTED_ITEM_COUNT}", items.len());
    }
    Ok(items)
}

pub fn split_keywords(field: &str) -> Vec<String> {
    field
        .split('|')
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_calls(text: &str, registry: &ToolRegistry) -> Result<Vec<ToolCall>, String> {
    let calls: Vec<MockCall> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    calls
        .into_iter()
        .map(|c| {
            let call = registry.prepare_call(&c.name, c.arguments);
            match &call.error {
                Some(e) => Err(e.clone()),
                None => Ok(call),
            }
        })
        .collect()
}

fn parse_stubs(text: &str, calls: &[ToolCall]) -> Result<Vec<ToolResult>, String> {
    let payloads: Vec<Value> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if payloads.len() != calls.len() {
        return Err(format!(
            "{} stub results for {} expected calls",
            payloads.len(),
            calls.len()
        ));
    }
    calls
        .iter()
        .zip(payloads)
        .map(|(call, payload)| {
            let kind: ToolKind = call.tool_name.parse().map_err(|n| format!("unknown tool '{n}'"))?;
            kind.check_payload(&payload).map_err(|e| e.to_string())?;
            Ok(ToolResult {
                tool_name: call.tool_name.clone(),
                payload,
            })
        })
        .collect()
}

/// Stub table holding each item's expected results.
pub fn stub_table(items: &[BenchmarkItem]) -> Result<StubTable, EvalError> {
    let entries = items.iter().flat_map(|item| {
        item.expected_calls
            .iter()
            .zip(&item.stub_results)
            .map(|(call, result)| StubEntry {
                item_id: item.item_id.clone(),
                tool_name: call.tool_name.clone(),
                payload: result.payload.clone(),
                args: Some(call.args.clone()),
            })
    });
    StubTable::from_entries(entries).map_err(|e| EvalError::BadStubs {
        line: 0,
        message: e.to_string(),
    })
}

/// Mock script that replays every item's ground truth: the expected calls
/// with fully filled arguments, then the expected NLR.
pub fn replay_script(items: &[BenchmarkItem]) -> MockScript {
    MockScript {
        entries: items
            .iter()
            .map(|item| MockEntry {
                match_key: item.item_id.clone(),
                nlq: Some(item.nlq.clone()),
                calls: item
                    .expected_calls
                    .iter()
                    .map(|c| MockCall {
                        name: c.tool_name.clone(),
                        arguments: args_to_json(&c.args),
                    })
                    .collect(),
                final_text: item.expected_nlr.clone(),
                empty_attempts: 0,
            })
            .collect(),
        noise: None,
    }
}

/// TSV text for `items`, readable by [`parse_benchmark`].
pub fn write_benchmark(items: &[BenchmarkItem]) -> String {
    let mut out = COLUMNS.join("\t");
    out.push('\n');
    for item in items {
        let calls: Vec<Value> = item
            .expected_calls
            .iter()
            .map(|c| {
                let mut m = Map::new();
                m.insert("name".into(), Value::from(c.tool_name.as_str()));
                m.insert("arguments".into(), Value::Object(c.raw_args.clone()));
                Value::Object(m)
            })
            .collect();
        let stubs: Vec<&Value> = item.stub_results.iter().map(|r| &r.payload).collect();
        let fields = [
            item.item_id.clone(),
            item.nlq.clone(),
            item.expected_keywords.join("|"),
            item.expected_nlr.clone(),
            Value::Array(calls).to_string(),
            serde_json::to_string(&stubs).unwrap_or_default(),
        ];
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    out
}
