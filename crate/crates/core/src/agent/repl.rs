//! Interactive chat loop.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use super::Agent;
use crate::market::MarketStore;
use crate::registry::Grounding;
use crate::tools::StubTable;

/// Picks the grounding for a free-form question.
pub enum QueryRouter<'a> {
    Real {
        store: &'a MarketStore,
        as_of: Option<i64>,
    },
    /// Stub mode only answers questions that appear in the benchmark, looked
    /// up by whitespace- and case-normalised NLQ.
    Stub {
        table: &'a StubTable,
        index: BTreeMap<String, String>,
    },
}

impl<'a> QueryRouter<'a> {
    pub fn stub<'n>(table: &'a StubTable, items: impl IntoIterator<Item = (&'n str, &'n str)>) -> Self {
        let index = items
            .into_iter()
            .map(|(id, nlq)| (normalize_nlq(nlq), id.to_string()))
            .collect();
        QueryRouter::Stub { table, index }
    }

    /// Grounding and benchmark item id (stub mode) for `nlq`.
    pub fn route(&self, nlq: &str) -> Result<(Grounding<'_>, Option<String>), String> {
        match self {
            QueryRouter::Real { store, as_of } => Ok((Grounding::Real { store, as_of: *as_of }, None)),
            QueryRouter::Stub { table, index } => {
                let id = index
                    .get(&normalize_nlq(nlq))
                    .ok_or_else(|| "stub mode only answers benchmark questions".to_string())?;
                Ok((Grounding::Stub { table, item_id: id }, Some(id.clone())))
            }
        }
    }
}

pub(crate) fn normalize_nlq(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Reads one question per line until EOF or `/quit`. Errors are printed and
/// the session goes on.
pub fn chat_repl<R: BufRead, W: Write>(
    agent: &Agent<'_>,
    router: &QueryRouter<'_>,
    input: R,
    mut output: W,
    verbose: bool,
) -> io::Result<()> {
    write!(output, "> ")?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        let nlq = line.trim();
        if nlq == "/quit" || nlq == "/exit" {
            break;
        }
        if !nlq.is_empty() {
            match router.route(nlq) {
                Err(e) => writeln!(output, "error: {e}")?,
                Ok((grounding, item_id)) => {
                    let outcome = agent.answer(nlq, &grounding, item_id.as_deref());
                    if verbose {
                        for (call, result) in outcome.calls.iter().zip(&outcome.results) {
                            writeln!(output, "  [tool] {} -> {}", call.signature(), result.content())?;
                        }
                    }
                    match &outcome.failure {
                        Some(f) => writeln!(output, "error: {}", f)?,
                        None => writeln!(output, "{}", outcome.nlr.trim())?,
                    }
                }
            }
        }
        write!(output, "> ")?;
        output.flush()?;
    }
    writeln!(output)?;
    Ok(())
}
