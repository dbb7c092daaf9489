//! Argument values, default filling and call comparison.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::market::TimeUnit;

use super::schema::{ParamType, ToolSchema};
use super::RegistryError;

/// A coerced argument value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArgValue {
    Int(i64),
    Float(f64),
    Str(String),
}

impl ArgValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            ArgValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ArgValue::Int(i) => Some(*i as f64),
            ArgValue::Float(f) => Some(*f),
            ArgValue::Str(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ArgValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            ArgValue::Int(i) => Value::from(*i),
            ArgValue::Float(f) => Value::from(*f),
            ArgValue::Str(s) => Value::from(s.as_str()),
        }
    }

    /// Strings compare case-insensitively, numbers by exact value.
    pub fn matches(&self, other: &ArgValue) -> bool {
        match (self, other) {
            (ArgValue::Str(a), ArgValue::Str(b)) => a.eq_ignore_ascii_case(b),
            (ArgValue::Str(_), _) | (_, ArgValue::Str(_)) => false,
            (a, b) => a.as_f64() == b.as_f64(),
        }
    }
}

impl fmt::Display for ArgValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgValue::Int(i) => write!(f, "{i}"),
            ArgValue::Float(x) => write!(f, "{x:?}"),
            ArgValue::Str(s) => write!(f, "'{s}'"),
        }
    }
}

pub type ArgMap = BTreeMap<String, ArgValue>;

pub fn args_to_json(args: &ArgMap) -> Map<String, Value> {
    args.iter().map(|(k, v)| (k.clone(), v.to_json())).collect()
}

/// Result of default filling: complete arguments plus coercion notes.
#[derive(Debug, Clone, PartialEq)]
pub struct FilledArgs {
    pub args: ArgMap,
    pub warnings: Vec<String>,
}

/// Coerces `raw` against `schema` and fills every absent optional parameter
/// with its default. JSON `null` counts as absent.
pub fn fill_defaults(schema: &ToolSchema, raw: &Map<String, Value>) -> Result<FilledArgs, RegistryError> {
    for name in raw.keys() {
        if schema.param(name).is_none() {
            return Err(RegistryError::UnknownParam {
                tool: schema.name.clone(),
                param: name.clone(),
            });
        }
    }
    let mut args = ArgMap::new();
    let mut warnings = Vec::new();
    for param in &schema.params {
        let supplied = raw.get(&param.name).filter(|v| !v.is_null());
        let value = match supplied {
            Some(v) => coerce(param.ty, v).map_err(|message| RegistryError::Coercion {
                tool: schema.name.clone(),
                param: param.name.clone(),
                message,
            })?,
            None => match &param.default {
                Some(d) => Coerced::clean(d.clone()),
                None if param.required => {
                    return Err(RegistryError::MissingParam {
                        tool: schema.name.clone(),
                        param: param.name.clone(),
                    })
                }
                None => continue,
            },
        };
        if let Some(w) = value.warning {
            warnings.push(format!("{}.{}: {w}", schema.name, param.name));
        }
        args.insert(param.name.clone(), value.value);
    }
    Ok(FilledArgs { args, warnings })
}

struct Coerced {
    value: ArgValue,
    warning: Option<String>,
}

impl Coerced {
    fn clean(value: ArgValue) -> Self {
        Coerced { value, warning: None }
    }

    fn noted(value: ArgValue, warning: String) -> Self {
        Coerced {
            value,
            warning: Some(warning),
        }
    }
}

fn coerce(ty: ParamType, v: &Value) -> Result<Coerced, String> {
    match ty {
        ParamType::Token => match v {
            Value::String(s) if !s.trim().is_empty() => {
                Ok(Coerced::clean(ArgValue::Str(s.trim().to_ascii_uppercase())))
            }
            other => Err(format!("expected a non-empty string, got {other}")),
        },
        ParamType::TimeUnit => match v {
            Value::String(s) => s
                .parse::<TimeUnit>()
                .map(|u| Coerced::clean(ArgValue::Str(u.as_str().to_string())))
                .map_err(|e| e.to_string()),
            other => Err(format!("expected a time unit name, got {other}")),
        },
        ParamType::Integer => match v {
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Coerced::clean(ArgValue::Int(i)))
                } else {
                    let f = n.as_f64().unwrap_or(f64::NAN);
                    if f.fract() == 0.0 && f.abs() < 9.0e15 {
                        Ok(Coerced::noted(
                            ArgValue::Int(f as i64),
                            format!("coerced float {f} to integer"),
                        ))
                    } else {
                        Err(format!("expected an integer, got {n}"))
                    }
                }
            }
            Value::String(s) => s
                .trim()
                .parse::<i64>()
                .map(|i| Coerced::noted(ArgValue::Int(i), format!("coerced string '{s}' to integer")))
                .map_err(|_| format!("expected an integer, got string '{s}'")),
            other => Err(format!("expected an integer, got {other}")),
        },
        ParamType::Number => match v {
            Value::Number(n) => n
                .as_f64()
                .filter(|f| f.is_finite())
                .map(|f| Coerced::clean(ArgValue::Float(f)))
                .ok_or_else(|| format!("expected a finite number, got {n}")),
            Value::String(s) => s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|f| f.is_finite())
                .map(|f| Coerced::noted(ArgValue::Float(f), format!("coerced string '{s}' to number")))
                .ok_or_else(|| format!("expected a number, got string '{s}'")),
            other => Err(format!("expected a number, got {other}")),
        },
    }
}

/// A tool invocation as emitted by the agent and after default filling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool_name: String,
    /// Coerced and default-filled; empty when validation failed.
    pub args: ArgMap,
    /// Arguments exactly as the agent sent them.
    #[serde(default)]
    pub raw_args: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Validation failure, if any. Such calls never match a ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ToolCall {
    /// A call whose raw arguments are exactly `args`.
    pub fn new(tool_name: &str, args: ArgMap) -> Self {
        ToolCall {
            tool_name: tool_name.to_string(),
            raw_args: args_to_json(&args),
            args,
            warnings: Vec::new(),
            error: None,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.error.is_none()
    }

    /// `name(k=v, ...)` rendering of the filled arguments.
    pub fn signature(&self) -> String {
        let args: Vec<String> = self.args.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.tool_name, args.join(", "))
    }
}

/// Exact match of tool name and every filled argument. Both calls must be
/// default-filled; calls that failed validation never match.
pub fn match_calls(actual: &ToolCall, expected: &ToolCall) -> bool {
    actual.is_valid()
        && expected.is_valid()
        && actual.tool_name == expected.tool_name
        && actual.args.len() == expected.args.len()
        && actual
            .args
            .iter()
            .all(|(k, v)| expected.args.get(k).is_some_and(|e| v.matches(e)))
}

/// True when the two call lists are equal as multisets under [`match_calls`].
pub fn multiset_match(actual: &[ToolCall], expected: &[ToolCall]) -> bool {
    if actual.len() != expected.len() {
        return false;
    }
    let mut used = vec![false; expected.len()];
    // match_calls is an equivalence on valid calls, so greedy assignment is exact
    for a in actual {
        let slot = expected
            .iter()
            .enumerate()
            .position(|(i, e)| !used[i] && match_calls(a, e));
        match slot {
            Some(i) => used[i] = true,
            None => return false,
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::ToolRegistry;
    use serde_json::json;

    fn raw(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn volatility_defaults() {
        let reg = ToolRegistry::standard();
        let filled = fill_defaults(reg.schema("volatility").unwrap(), &raw(json!({"base_token": "btc"}))).unwrap();
        assert_eq!(filled.args["base_token"], ArgValue::Str("BTC".into()));
        assert_eq!(filled.args["quote_token"], ArgValue::Str("USDT".into()));
        assert_eq!(filled.args["exchange"], ArgValue::Str("BINANCE".into()));
        assert_eq!(filled.args["time_interval"], ArgValue::Int(1));
        assert_eq!(filled.args["time_unit"], ArgValue::Str("day".into()));
        assert_eq!(filled.args.len(), 5);
        assert!(filled.warnings.is_empty());
    }

    #[test]
    fn errors_name_the_parameter() {
        let reg = ToolRegistry::standard();
        let schema = reg.schema("volatility").unwrap();
        match fill_defaults(schema, &raw(json!({}))).unwrap_err() {
            RegistryError::MissingParam { param, .. } => assert_eq!(param, "base_token"),
            other => panic!("unexpected {other}"),
        }
        match fill_defaults(schema, &raw(json!({"base_token": "BTC", "window": 3}))).unwrap_err() {
            RegistryError::UnknownParam { param, .. } => assert_eq!(param, "window"),
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            fill_defaults(schema, &raw(json!({"base_token": "BTC", "time_interval": "soon"}))),
            Err(RegistryError::Coercion { .. })
        ));
        assert!(matches!(
            fill_defaults(schema, &raw(json!({"base_token": "BTC", "time_unit": "fortnight"}))),
            Err(RegistryError::Coercion { .. })
        ));
    }

    #[test]
    fn loose_numbers_are_coerced_with_warnings() {
        let reg = ToolRegistry::standard();
        let schema = reg.schema("peak_traded_volume").unwrap();
        let filled = fill_defaults(
            schema,
            &raw(json!({"base_token": "ETH", "time_interval": "2", "threshold_percent": 10, "time_unit": "Years"})),
        )
        .unwrap();
        assert_eq!(filled.args["time_interval"], ArgValue::Int(2));
        assert_eq!(filled.args["threshold_percent"], ArgValue::Float(10.0));
        assert_eq!(filled.args["time_unit"], ArgValue::Str("year".into()));
        assert_eq!(filled.warnings.len(), 1);
        let filled = fill_defaults(schema, &raw(json!({"base_token": "ETH", "time_interval": 3.0}))).unwrap();
        assert_eq!(filled.args["time_interval"], ArgValue::Int(3));
        assert_eq!(filled.warnings.len(), 1);
        assert!(fill_defaults(schema, &raw(json!({"base_token": "ETH", "time_interval": 3.5}))).is_err());
    }

    #[test]
    fn null_means_default() {
        let reg = ToolRegistry::standard();
        let filled = fill_defaults(
            reg.schema("price").unwrap(),
            &raw(json!({"base_token": "SOL", "exchange": null})),
        )
        .unwrap();
        assert_eq!(filled.args["exchange"], ArgValue::Str("BINANCE".into()));
    }

    fn filled_call(tool: &str, v: Value) -> ToolCall {
        ToolRegistry::standard().prepare_call(tool, raw(v))
    }

    #[test]
    fn matching_examples() {
        let a = filled_call(
            "correlation_between_tokens",
            json!({"base_token_a": "BTC", "base_token_b": "ETH"}),
        );
        let b = filled_call(
            "correlation_between_tokens",
            json!({"base_token_a": "btc", "base_token_b": "eth", "exchange": "BINANCE", "time_interval": 7}),
        );
        let c = filled_call(
            "correlation_between_tokens",
            json!({"base_token_a": "BTC", "base_token_b": "ETH", "time_interval": 1}),
        );
        assert!(match_calls(&a, &a));
        assert!(match_calls(&a, &b));
        assert!(!match_calls(&a, &c));
        let bad = filled_call("price", json!({"bogus": 1}));
        assert!(bad.error.is_some());
        assert!(!match_calls(&bad, &bad));
    }

    #[test]
    fn multiset_semantics() {
        let p = filled_call("price", json!({"base_token": "BTC"}));
        let q = filled_call("price", json!({"base_token": "ETH"}));
        assert!(multiset_match(&[p.clone(), q.clone()], &[q.clone(), p.clone()]));
        assert!(!multiset_match(&[p.clone(), p.clone()], &[p.clone(), q.clone()]));
        assert!(!multiset_match(&[p.clone(), q.clone()], std::slice::from_ref(&p)));
        assert!(!multiset_match(&[], std::slice::from_ref(&p)));
        assert!(multiset_match(&[], &[]));
    }
}
