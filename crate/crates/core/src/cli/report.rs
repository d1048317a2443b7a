//! Machine-readable reports.
//!
//! ```json
//! { "schema_version": 1, "command": "...", "config": {...},
//!   "payload": {...}, "provenance": {...} }
//! ```
//!
//! `payload` holds every numeric result and is a pure function of the
//! config and seed. Timing and thread count live in `provenance`.

use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub crate_version: &'static str,
    pub rng: &'static str,
    pub config_path: Option<String>,
}

impl Provenance {
    pub fn new(seed: u64, threads: usize, wall_clock_seconds: f64, config_path: Option<String>) -> Self {
        Self {
            seed,
            threads,
            wall_clock_seconds,
            crate_version: env!("CARGO_PKG_VERSION"),
            rng: "ChaCha8, chunk streams split from (seed, 0)",
            config_path,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    pub payload: Value,
    pub provenance: Provenance,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// JSON Schema of [`Report`].
pub fn schema() -> Value {
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "dlnk report",
        "type": "object",
        "required": ["schema_version", "command", "config", "payload", "provenance"],
        "additionalProperties": false,
        "properties": {
            "schema_version": { "const": SCHEMA_VERSION },
            "command": { "enum": ["sample-prior", "predict", "evidence", "ldp", "verify"] },
            "config": { "type": ["object", "null"] },
            "payload": { "type": "object" },
            "provenance": {
                "type": "object",
                "required": ["seed", "threads", "wall_clock_seconds", "crate_version", "rng", "config_path"],
                "additionalProperties": false,
                "properties": {
                    "seed": { "type": "integer", "minimum": 0 },
                    "threads": { "type": "integer", "minimum": 1 },
                    "wall_clock_seconds": { "type": "number", "minimum": 0 },
                    "crate_version": { "type": "string" },
                    "rng": { "type": "string" },
                    "config_path": { "type": ["string", "null"] }
                }
            }
        }
    })
}

/// Structural check of a report against [`schema`]: required keys, no
/// extra keys, and the listed types.
pub fn validate(report: &Value) -> Result<(), String> {
    let s = schema();
    check(report, &s, "$")
}

fn type_ok(v: &Value, t: &str) -> bool {
    match t {
        "object" => v.is_object(),
        "string" => v.is_string(),
        "integer" => v.is_u64() || v.is_i64(),
        "number" => v.is_number(),
        "null" => v.is_null(),
        _ => false,
    }
}

fn check(v: &Value, s: &Value, path: &str) -> Result<(), String> {
    if let Some(c) = s.get("const") {
        if v != c {
            return Err(format!("{path}: expected {c}"));
        }
    }
    if let Some(e) = s.get("enum").and_then(Value::as_array) {
        if !e.contains(v) {
            return Err(format!("{path}: {v} not allowed"));
        }
    }
    if let Some(t) = s.get("type") {
        let ok = match t {
            Value::String(t) => type_ok(v, t),
            Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|t| type_ok(v, t)),
            _ => true,
        };
        if !ok {
            return Err(format!("{path}: expected type {t}"));
        }
    }
    if let Some(min) = s.get("minimum").and_then(Value::as_f64) {
        if v.as_f64().is_some_and(|x| x < min) {
            return Err(format!("{path}: below {min}"));
        }
    }
    if let (Some(obj), Some(props)) = (v.as_object(), s.get("properties").and_then(Value::as_object)) {
        for r in s.get("required").and_then(Value::as_array).into_iter().flatten() {
            let key = r.as_str().unwrap_or_default();
            if !obj.contains_key(key) {
                return Err(format!("{path}: missing {key}"));
            }
        }
        for (k, val) in obj {
            match props.get(k) {
                Some(sub) => check(val, sub, &format!("{path}.{k}"))?,
                None if s.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    return Err(format!("{path}: unexpected key {k}"));
                }
                None => {}
            }
        }
    }
    Ok(())
}
