//! Hard-coded tool answers keyed by benchmark item.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::registry::{ArgMap, ToolCall};

use super::{ToolError, ToolKind, ToolResult};

/// One line of the stub table file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubEntry {
    pub item_id: String,
    pub tool_name: String,
    pub payload: Value,
    /// Filled arguments of the expected call, used to pick between several
    /// stubs of the same tool on one item.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub args: Option<ArgMap>,
}

/// Immutable item → stubbed results table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StubTable {
    items: BTreeMap<String, Vec<StubEntry>>,
}

impl StubTable {
    pub fn from_entries(entries: impl IntoIterator<Item = StubEntry>) -> Result<Self, ToolError> {
        let mut items: BTreeMap<String, Vec<StubEntry>> = BTreeMap::new();
        for entry in entries {
            let kind: ToolKind = entry
                .tool_name
                .parse()
                .map_err(|name| ToolError::StubTable(format!("item {}: unknown tool '{name}'", entry.item_id)))?;
            kind.check_payload(&entry.payload)?;
            items.entry(entry.item_id.clone()).or_default().push(entry);
        }
        Ok(StubTable { items })
    }

    /// Reads one JSON [`StubEntry`] per non-blank line.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, ToolError> {
        let mut entries = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ToolError::StubTable(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: StubEntry =
                serde_json::from_str(&line).map_err(|e| ToolError::StubTable(format!("line {}: {e}", idx + 1)))?;
            entries.push(entry);
        }
        Self::from_entries(entries)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for entry in self.items.values().flatten() {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.items.contains_key(item_id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The hard-coded result for `call` on `item_id`.
    ///
    /// Among stubs with the call's tool name, one whose recorded arguments
    /// equal the call's wins; otherwise the first is returned.
    pub fn stub_lookup(&self, item_id: &str, call: &ToolCall) -> Result<ToolResult, ToolError> {
        let entries = self
            .items
            .get(item_id)
            .ok_or_else(|| ToolError::UnknownItem(item_id.to_string()))?;
        let same_tool: Vec<&StubEntry> = entries.iter().filter(|e| e.tool_name == call.tool_name).collect();
        let chosen = same_tool
            .iter()
            .find(|e| e.args.as_ref() == Some(&call.args))
            .or(same_tool.first())
            .ok_or_else(|| ToolError::ToolMismatch {
                item_id: item_id.to_string(),
                requested: call.tool_name.clone(),
                available: entries.iter().map(|e| e.tool_name.clone()).collect(),
            })?;
        Ok(ToolResult {
            tool_name: chosen.tool_name.clone(),
            payload: chosen.payload.clone(),
        })
    }
}
