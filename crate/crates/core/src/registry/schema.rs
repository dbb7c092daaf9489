//! Tool schemas and their function-calling wire declarations.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::market::TimeUnit;
use crate::tools::ToolKind;

use super::args::ArgValue;
use super::RegistryError;

/// Extension key carrying the return shape inside a declaration. Stripped
/// before declarations are sent to a backend.
pub const RETURNS_KEY: &str = "x-returns";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamType {
    /// Uppercased symbol or venue name.
    Token,
    TimeUnit,
    Integer,
    Number,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReturnKind {
    #[serde(rename = "float")]
    Float,
    #[serde(rename = "list[str]")]
    Labels,
    #[serde(rename = "tuple")]
    Tuple,
}

impl ReturnKind {
    fn as_str(self) -> &'static str {
        match self {
            ReturnKind::Float => "float",
            ReturnKind::Labels => "list[str]",
            ReturnKind::Tuple => "tuple",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [ReturnKind::Float, ReturnKind::Labels, ReturnKind::Tuple]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub ty: ParamType,
    pub required: bool,
    pub default: Option<ArgValue>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
    pub return_kind: ReturnKind,
}

impl ToolSchema {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        let bad = |m: String| RegistryError::InvalidSchema {
            tool: self.name.clone(),
            message: m,
        };
        if self.name.is_empty() {
            return Err(bad("empty name".into()));
        }
        if self.description.trim().is_empty() {
            return Err(bad("empty description".into()));
        }
        for (i, p) in self.params.iter().enumerate() {
            if self.params[..i].iter().any(|q| q.name == p.name) {
                return Err(bad(format!("duplicate parameter {}", p.name)));
            }
            if !p.required && p.default.is_none() {
                return Err(bad(format!("optional parameter {} has no default", p.name)));
            }
        }
        Ok(())
    }

    /// Chat-completions `tools[]` entry for this schema.
    pub fn to_declaration(&self) -> Value {
        let mut properties = Map::new();
        for p in &self.params {
            let mut prop = Map::new();
            let ty = match p.ty {
                ParamType::Token | ParamType::TimeUnit => "string",
                ParamType::Integer => "integer",
                ParamType::Number => "number",
            };
            prop.insert("type".into(), ty.into());
            prop.insert("description".into(), p.description.clone().into());
            if p.ty == ParamType::TimeUnit {
                let units: Vec<&str> = TimeUnit::ALL.iter().map(|u| u.as_str()).collect();
                prop.insert("enum".into(), json!(units));
            }
            if let Some(d) = &p.default {
                prop.insert("default".into(), d.to_json());
            }
            properties.insert(p.name.clone(), Value::Object(prop));
        }
        let required: Vec<&str> = self
            .params
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name.as_str())
            .collect();
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": properties,
                    "required": required,
                },
                RETURNS_KEY: self.return_kind.as_str(),
            }
        })
    }

    /// Inverse of [`ToolSchema::to_declaration`].
    pub fn from_declaration(decl: &Value) -> Result<Self, RegistryError> {
        let bad = |m: &str| RegistryError::InvalidDeclaration(m.to_string());
        let func = decl
            .get("function")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing function object"))?;
        let name = func
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing name"))?;
        let description = func.get("description").and_then(Value::as_str).unwrap_or_default();
        let return_kind = func
            .get(RETURNS_KEY)
            .and_then(Value::as_str)
            .and_then(ReturnKind::parse)
            .ok_or_else(|| bad("missing or unknown return kind"))?;
        let params_obj = func.get("parameters").ok_or_else(|| bad("missing parameters"))?;
        let required: Vec<&str> = params_obj
            .get("required")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        let mut params = Vec::new();
        if let Some(props) = params_obj.get("properties").and_then(Value::as_object) {
            for (pname, prop) in props {
                let ty = match (prop.get("type").and_then(Value::as_str), prop.get("enum")) {
                    (Some("string"), Some(_)) => ParamType::TimeUnit,
                    (Some("string"), None) => ParamType::Token,
                    (Some("integer"), _) => ParamType::Integer,
                    (Some("number"), _) => ParamType::Number,
                    _ => return Err(bad(&format!("parameter {pname} has an unsupported type"))),
                };
                let default = match prop.get("default") {
                    None => None,
                    Some(v) => Some(
                        serde_json::from_value::<ArgValue>(v.clone())
                            .map_err(|e| bad(&format!("default of {pname}: {e}")))?,
                    ),
                };
                let default = match (ty, default) {
                    (ParamType::Number, Some(ArgValue::Int(i))) => Some(ArgValue::Float(i as f64)),
                    (_, d) => d,
                };
                params.push(ParamSpec {
                    name: pname.clone(),
                    ty,
                    required: required.contains(&pname.as_str()),
                    default,
                    description: prop
                        .get("description")
                        .and_then(Value::as_str)
                        .unwrap_or_default()
                        .to_string(),
                });
            }
        }
        let schema = ToolSchema {
            name: name.to_string(),
            description: description.to_string(),
            params,
            return_kind,
        };
        schema.validate()?;
        Ok(schema)
    }
}

/// Declaration as sent over the wire: the return-kind extension removed.
pub fn wire_declaration(decl: &Value) -> Value {
    let mut out = decl.clone();
    if let Some(func) = out.get_mut("function").and_then(Value::as_object_mut) {
        func.remove(RETURNS_KEY);
    }
    out
}

fn required(name: &str, ty: ParamType, description: &str) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        ty,
        required: true,
        default: None,
        description: description.into(),
    }
}

fn optional(name: &str, ty: ParamType, default: ArgValue, description: &str) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        ty,
        required: false,
        default: Some(default),
        description: description.into(),
    }
}

fn s(v: &str) -> ArgValue {
    ArgValue::Str(v.into())
}

const BASE_DOC: &str = "Base token symbol, e.g. BTC or ETH.";
const QUOTE_DOC: &str = "Quote token symbol the price is expressed in.";
const EXCHANGE_DOC: &str = "Exchange (venue) name, e.g. BINANCE.";
const INTERVAL_DOC: &str = "Number of time units in the lookback window.";
const UNIT_DOC: &str = "Unit of the lookback window.";

fn market_params(interval_default: i64, unit_default: &str) -> Vec<ParamSpec> {
    vec![
        required("base_token", ParamType::Token, BASE_DOC),
        optional("quote_token", ParamType::Token, s("USDT"), QUOTE_DOC),
        optional("exchange", ParamType::Token, s("BINANCE"), EXCHANGE_DOC),
        optional(
            "time_interval",
            ParamType::Integer,
            ArgValue::Int(interval_default),
            INTERVAL_DOC,
        ),
        optional("time_unit", ParamType::TimeUnit, s(unit_default), UNIT_DOC),
    ]
}

fn seasonal_params() -> Vec<ParamSpec> {
    let mut p = market_params(1, "year");
    p.push(optional(
        "period_unit",
        ParamType::TimeUnit,
        s("week"),
        "Repeating period the pattern is measured within, e.g. week.",
    ));
    p.push(optional(
        "granularity_unit",
        ParamType::TimeUnit,
        s("day"),
        "Bucket size inside each period, e.g. day for day-of-week patterns.",
    ));
    p.push(optional(
        "threshold_percent",
        ParamType::Number,
        ArgValue::Float(5.0),
        "Minimum relative deviation, in percent, for a time bucket to be reported.",
    ));
    p
}

/// Schema for each tool, with its defaults.
pub fn standard_schema(kind: ToolKind) -> ToolSchema {
    use ToolKind::*;
    let (description, params, return_kind) = match kind {
        PeakTradedVolume => (
            "Find the times (for example days of the week) with the highest traded volume within \
             repeating periods, reporting buckets whose average volume share exceeds the uniform \
             share by at least threshold_percent.",
            seasonal_params(),
            ReturnKind::Labels,
        ),
        LowestTradedVolume => (
            "Find the times (for example days of the week) with the lowest traded volume within \
             repeating periods, reporting buckets whose average volume share is below the uniform \
             share by at least threshold_percent.",
            seasonal_params(),
            ReturnKind::Labels,
        ),
        RoundTheClockPattern => (
            "Summarise the volume pattern: returns both the peak and the lowest traded volume times.",
            seasonal_params(),
            ReturnKind::Tuple,
        ),
        AbnormalDeviations => (
            "Find time buckets in the most recent period whose traded volume deviates from the \
             historical average for that bucket by at least threshold_percent.",
            seasonal_params(),
            ReturnKind::Tuple,
        ),
        Price => (
            "Get the latest price of a token within the lookback window.",
            market_params(1, "day"),
            ReturnKind::Float,
        ),
        Volatility => (
            "Calculate historical price volatility in percent over the lookback window using the \
             Parkinson high-low range estimator.",
            market_params(1, "day"),
            ReturnKind::Float,
        ),
        PredictPrice => (
            "Predict the price for the next window by simple linear extrapolation of the last two windows.",
            market_params(1, "day"),
            ReturnKind::Float,
        ),
        PredictVolatility => (
            "Predict volatility for the next window by simple linear extrapolation of the last two windows.",
            market_params(1, "day"),
            ReturnKind::Float,
        ),
        CorrelationBetweenTokens => (
            "Compute the Pearson correlation of close prices between two tokens quoted in the same \
             quote token on one exchange.",
            vec![
                required("base_token_a", ParamType::Token, "First base token symbol."),
                required("base_token_b", ParamType::Token, "Second base token symbol."),
                optional("quote_token", ParamType::Token, s("USDT"), QUOTE_DOC),
                optional("exchange", ParamType::Token, s("BINANCE"), EXCHANGE_DOC),
                optional("time_interval", ParamType::Integer, ArgValue::Int(7), INTERVAL_DOC),
                optional("time_unit", ParamType::TimeUnit, s("day"), UNIT_DOC),
            ],
            ReturnKind::Float,
        ),
        CorrelationBetweenExchanges => (
            "Compute the Pearson correlation of close prices of one token pair between two exchanges.",
            vec![
                required("base_token", ParamType::Token, BASE_DOC),
                required("exchange_a", ParamType::Token, "First exchange name."),
                required("exchange_b", ParamType::Token, "Second exchange name."),
                optional("quote_token", ParamType::Token, s("USDT"), QUOTE_DOC),
                optional("time_interval", ParamType::Integer, ArgValue::Int(7), INTERVAL_DOC),
                optional("time_unit", ParamType::TimeUnit, s("day"), UNIT_DOC),
            ],
            ReturnKind::Float,
        ),
        GetBaseTokens => (
            "List the base tokens that data is available for.",
            vec![],
            ReturnKind::Labels,
        ),
        GetExchanges => (
            "List the exchanges that data is available for.",
            vec![],
            ReturnKind::Labels,
        ),
        GetQuoteTokens => (
            "List the quote tokens that data is available for.",
            vec![],
            ReturnKind::Labels,
        ),
        GetValidTimeUnits => (
            "List the time unit names accepted by time_unit, period_unit and granularity_unit.",
            vec![],
            ReturnKind::Labels,
        ),
    };
    ToolSchema {
        name: kind.as_str().to_string(),
        description: description.to_string(),
        params,
        return_kind,
    }
}
