//! Report envelopes and their JSON / CSV renderings. Output is a pure function of the
//! resolved config, so identical configs give identical bytes.

use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub const TOOL: &str = "sqf";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub result: T,
}

/// Rows for commands whose CSV form is a table rather than a key-value dump.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

/// 17 significant digits, fixed exponent form.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => csv_field(s),
            Cell::Empty => String::new(),
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::Number(n) => {
            let s = if let Some(i) = n.as_i64() {
                i.to_string()
            } else if let Some(u) = n.as_u64() {
                u.to_string()
            } else {
                fmt_f64(n.as_f64().unwrap_or(f64::NAN))
            };
            out.push((prefix.to_string(), s));
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Null => out.push((prefix.to_string(), String::new())),
    }
}

/// Renders a report. JSON always carries the full envelope; CSV carries the envelope in
/// `#` header lines followed by either the table or a `key,value` dump of the result.
pub fn render<T: Serialize>(config: &RunConfig, result: &T, table: Option<Table>) -> Result<String, CliError> {
    let env = Envelope {
        tool: TOOL,
        version: VERSION,
        command: &config.command,
        config,
        result,
    };
    let ser = |e: serde_json::Error| CliError::config("serialization", e.to_string());
    match config.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&env).map_err(ser)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut s = format!("# {TOOL} {VERSION} {}\n", config.command);
            s.push_str(&format!("# config {}\n", serde_json::to_string(config).map_err(ser)?));
            match table {
                Some(t) => {
                    s.push_str(&t.columns.join(","));
                    s.push('\n');
                    for row in &t.rows {
                        let line: Vec<String> = row.iter().map(Cell::render).collect();
                        s.push_str(&line.join(","));
                        s.push('\n');
                    }
                }
                None => {
                    let v = serde_json::to_value(result).map_err(ser)?;
                    let mut pairs = Vec::new();
                    flatten("", &v, &mut pairs);
                    s.push_str("key,value\n");
                    for (k, x) in pairs {
                        s.push_str(&format!("{},{}\n", csv_field(&k), csv_field(&x)));
                    }
                }
            }
            Ok(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        let x = 1.0 / 3.0;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn flatten_uses_dotted_paths() {
        let v = serde_json::json!({"a": {"b": [1.5, 2]}, "c": null});
        let mut out = Vec::new();
        flatten("", &v, &mut out);
        assert_eq!(out[0], ("a.b.0".to_string(), fmt_f64(1.5)));
        assert_eq!(out[1], ("a.b.1".to_string(), "2".to_string()));
        assert_eq!(out[2], ("c".to_string(), String::new()));
    }
}
