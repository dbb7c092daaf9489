//! Tool registry: declarative schemas with defaults, argument validation
//! and dispatch from a [`ToolCall`] to a grounding tool or its stub.

mod args;
mod schema;

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::market::{InstrumentKey, MarketError, MarketStore, TimeUnit, WindowSpec};
use crate::tools::{self, keys, Bucketing, StubTable, ToolError, ToolKind, ToolResult};

pub use args::{args_to_json, fill_defaults, match_calls, multiset_match, ArgMap, ArgValue, FilledArgs, ToolCall};
pub use schema::{standard_schema, wire_declaration, ParamSpec, ParamType, ReturnKind, ToolSchema, RETURNS_KEY};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown tool '{name}'; registered tools: [{}]", registered.join(", "))]
    UnknownTool { name: String, registered: Vec<String> },
    #[error("{tool}: unknown parameter '{param}'")]
    UnknownParam { tool: String, param: String },
    #[error("{tool}: missing required parameter '{param}'")]
    MissingParam { tool: String, param: String },
    #[error("{tool}: parameter '{param}': {message}")]
    Coercion {
        tool: String,
        param: String,
        message: String,
    },
    #[error("{tool}: {source}")]
    Tool {
        tool: String,
        #[source]
        source: ToolError,
    },
    #[error("schema {tool}: {message}")]
    InvalidSchema { tool: String, message: String },
    #[error("duplicate tool name '{0}'")]
    DuplicateTool(String),
    #[error("invalid declaration: {0}")]
    InvalidDeclaration(String),
}

/// Where tool calls are answered from.
#[derive(Debug, Clone, Copy)]
pub enum Grounding<'a> {
    /// Compute over the store. `as_of = None` means the last bar of the
    /// instrument(s) involved.
    Real { store: &'a MarketStore, as_of: Option<i64> },
    /// Answer from the stub table entry of one benchmark item.
    Stub { table: &'a StubTable, item_id: &'a str },
}

/// Immutable set of tool schemas.
#[derive(Debug, Clone)]
pub struct ToolRegistry {
    schemas: Vec<ToolSchema>,
    index: BTreeMap<String, usize>,
}

impl ToolRegistry {
    pub fn new(schemas: Vec<ToolSchema>) -> Result<Self, RegistryError> {
        let mut index = BTreeMap::new();
        for (i, s) in schemas.iter().enumerate() {
            s.validate()?;
            if index.insert(s.name.clone(), i).is_some() {
                return Err(RegistryError::DuplicateTool(s.name.clone()));
            }
        }
        Ok(ToolRegistry { schemas, index })
    }

    /// Every built-in tool with its standard defaults.
    pub fn standard() -> Self {
        Self::new(ToolKind::ALL.into_iter().map(standard_schema).collect()).expect("built-in schemas are valid")
    }

    pub fn schemas(&self) -> &[ToolSchema] {
        &self.schemas
    }

    pub fn names(&self) -> Vec<String> {
        self.schemas.iter().map(|s| s.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }

    pub fn schema(&self, name: &str) -> Result<&ToolSchema, RegistryError> {
        self.index
            .get(name)
            .map(|&i| &self.schemas[i])
            .ok_or_else(|| RegistryError::UnknownTool {
                name: name.to_string(),
                registered: self.names(),
            })
    }

    /// One function-calling declaration per tool, in registry order.
    pub fn export_schemas(&self) -> Vec<Value> {
        self.schemas.iter().map(ToolSchema::to_declaration).collect()
    }

    pub fn fill_defaults(&self, tool: &str, raw: &Map<String, Value>) -> Result<FilledArgs, RegistryError> {
        fill_defaults(self.schema(tool)?, raw)
    }

    /// Builds a [`ToolCall`] from agent output. Validation failures are kept
    /// on the call rather than returned, so nothing the agent emitted is lost.
    pub fn prepare_call(&self, tool: &str, raw: Map<String, Value>) -> ToolCall {
        match self.fill_defaults(tool, &raw) {
            Ok(filled) => ToolCall {
                tool_name: tool.to_string(),
                args: filled.args,
                raw_args: raw,
                warnings: filled.warnings,
                error: None,
            },
            Err(e) => ToolCall {
                tool_name: tool.to_string(),
                args: ArgMap::new(),
                raw_args: raw,
                warnings: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    }

    /// Re-validates `call` and answers it from `grounding`.
    pub fn validate_and_dispatch(
        &self,
        call: &ToolCall,
        grounding: &Grounding<'_>,
    ) -> Result<ToolResult, RegistryError> {
        let schema = self.schema(&call.tool_name)?;
        let filled = fill_defaults(schema, &args_to_json(&call.args))?;
        let checked = ToolCall {
            args: filled.args,
            ..call.clone()
        };
        let wrap = |source: ToolError| RegistryError::Tool {
            tool: call.tool_name.clone(),
            source,
        };
        match grounding {
            Grounding::Stub { table, item_id } => table.stub_lookup(item_id, &checked).map_err(wrap),
            Grounding::Real { store, as_of } => {
                let kind: ToolKind = call.tool_name.parse().map_err(|_| {
                    wrap(ToolError::StubTable(format!(
                        "tool {} has no real implementation",
                        call.tool_name
                    )))
                })?;
                run_real(kind, &checked.args, store, *as_of).map_err(wrap)
            }
        }
    }
}

fn str_arg<'a>(args: &'a ArgMap, name: &str) -> &'a str {
    args.get(name).and_then(ArgValue::as_str).unwrap_or_default()
}

fn unit_arg(args: &ArgMap, name: &str) -> Result<TimeUnit, ToolError> {
    Ok(str_arg(args, name).parse::<TimeUnit>()?)
}

fn window_from(args: &ArgMap) -> Result<WindowSpec, ToolError> {
    let interval = args.get("time_interval").and_then(ArgValue::as_i64).unwrap_or(1);
    let interval = u32::try_from(interval)
        .map_err(|_| MarketError::InvalidWindow(format!("time_interval must be positive, got {interval}")))?;
    let mut window = WindowSpec {
        time_interval: interval,
        time_unit: unit_arg(args, "time_unit")?,
        period_unit: None,
        granularity_unit: None,
        threshold_percent: None,
    };
    if args.contains_key("period_unit") {
        window.period_unit = Some(unit_arg(args, "period_unit")?);
        window.granularity_unit = Some(unit_arg(args, "granularity_unit")?);
        window.threshold_percent = args.get("threshold_percent").and_then(ArgValue::as_f64);
    }
    window.validate()?;
    Ok(window)
}

fn key_from(args: &ArgMap, base: &str, exchange: &str) -> Result<InstrumentKey, ToolError> {
    Ok(InstrumentKey::new(
        str_arg(args, base),
        str_arg(args, "quote_token"),
        str_arg(args, exchange),
    )?)
}

fn last_bar(store: &MarketStore, key: &InstrumentKey) -> Result<i64, ToolError> {
    store
        .get(key)?
        .last_timestamp()
        .ok_or_else(|| ToolError::NoData { key: key.to_string() })
}

fn run_real(kind: ToolKind, args: &ArgMap, store: &MarketStore, as_of: Option<i64>) -> Result<ToolResult, ToolError> {
    use ToolKind::*;
    let name = kind.as_str().to_string();
    let result = match kind {
        GetBaseTokens => ToolResult::labels(kind, keys::BASE_TOKENS, store.list_base_tokens()),
        GetExchanges => ToolResult::labels(kind, keys::EXCHANGES, store.list_exchanges()),
        GetQuoteTokens => ToolResult::labels(kind, keys::QUOTE_TOKENS, store.list_quote_tokens()),
        GetValidTimeUnits => ToolResult::labels(
            kind,
            keys::TIME_UNITS,
            TimeUnit::ALL.iter().map(|u| u.to_string()).collect(),
        ),
        CorrelationBetweenTokens | CorrelationBetweenExchanges => {
            let (a, b) = if kind == CorrelationBetweenTokens {
                (
                    key_from(args, "base_token_a", "exchange")?,
                    key_from(args, "base_token_b", "exchange")?,
                )
            } else {
                (
                    key_from(args, "base_token", "exchange_a")?,
                    key_from(args, "base_token", "exchange_b")?,
                )
            };
            let window = window_from(args)?;
            let as_of = match as_of {
                Some(t) => t,
                None => last_bar(store, &a)?.min(last_bar(store, &b)?),
            };
            let r = tools::correlation_between(store, &a, &b, &window, as_of)?;
            ToolResult::number(kind, keys::CORRELATION, r)
        }
        Price | Volatility | PredictPrice | PredictVolatility => {
            let key = key_from(args, "base_token", "exchange")?;
            let window = window_from(args)?;
            let as_of = match as_of {
                Some(t) => t,
                None => last_bar(store, &key)?,
            };
            match kind {
                Price => ToolResult::number(kind, keys::PRICE, tools::price(store, &key, &window, as_of)?),
                Volatility => {
                    ToolResult::number(kind, keys::VOLATILITY, tools::volatility(store, &key, &window, as_of)?)
                }
                PredictPrice => ToolResult::number(
                    kind,
                    keys::PREDICTED_PRICE,
                    tools::predict_price(store, &key, &window, as_of)?,
                ),
                _ => ToolResult::number(
                    kind,
                    keys::PREDICTED_VOLATILITY,
                    tools::predict_volatility(store, &key, &window, as_of)?,
                ),
            }
        }
        PeakTradedVolume | LowestTradedVolume | RoundTheClockPattern | AbnormalDeviations => {
            let key = key_from(args, "base_token", "exchange")?;
            let window = window_from(args)?;
            let period = window.period_unit.ok_or(ToolError::MissingPartition("period_unit"))?;
            let granularity = window
                .granularity_unit
                .ok_or(ToolError::MissingPartition("granularity_unit"))?;
            let threshold = window
                .threshold_percent
                .ok_or(ToolError::MissingPartition("threshold_percent"))?;
            let bucketing = Bucketing::new(period, granularity)?;
            let series = store.get(&key)?;
            let as_of = match as_of {
                Some(t) => t,
                None => last_bar(store, &key)?,
            };
            let candles = series.window(&window, as_of);
            if candles.is_empty() {
                return Err(ToolError::NoData { key: key.to_string() });
            }
            let interval = series.candle_interval;
            match kind {
                PeakTradedVolume => ToolResult::labels(
                    kind,
                    keys::PEAK_TIMES,
                    tools::peak_traded_volume(candles, interval, &bucketing, threshold)?,
                ),
                LowestTradedVolume => ToolResult::labels(
                    kind,
                    keys::LOWEST_TIMES,
                    tools::lowest_traded_volume(candles, interval, &bucketing, threshold)?,
                ),
                RoundTheClockPattern => {
                    let (peaks, lows) = tools::round_the_clock_pattern(candles, interval, &bucketing, threshold)?;
                    ToolResult {
                        tool_name: name,
                        payload: json!({ keys::PEAK_TIMES: peaks, keys::LOWEST_TIMES: lows }),
                    }
                }
                _ => {
                    let d = tools::abnormal_deviations(candles, interval, &bucketing, threshold)?;
                    ToolResult {
                        tool_name: name,
                        payload: json!({
                            keys::TIMESTAMPS: d.timestamps,
                            keys::DEVIATIONS: d.deviation_percents,
                            keys::EXCLUDED: d.excluded_buckets,
                        }),
                    }
                }
            }
        }
    };
    Ok(result)
}
