use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

pub const SCHEMA: u64 = 1;

/// A JSON object with sorted keys plus the exit verdict.
#[derive(Debug, Default)]
pub struct Report {
    fields: Map<String, Value>,
    passed: bool,
}

impl Report {
    pub fn new() -> Self {
        Report { fields: Map::new(), passed: true }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.fields.insert(key.to_string(), v);
        self
    }

    pub fn fail(&mut self) {
        self.passed = false;
    }

    pub fn passed(&self) -> bool {
        self.passed
    }

    pub fn to_json(&self, command: &str) -> Value {
        let mut fields = self.fields.clone();
        fields.insert("schema".into(), json!(SCHEMA));
        fields.insert("command".into(), json!(command));
        Value::Object(fields)
    }

    pub fn write(&self, command: &str, path: Option<&Path>) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json(command))? + "\n";
        match path {
            Some(p) => fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

/// Error kind for the machine-readable error report.
pub fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(core) = e.downcast_ref::<ttstream_core::Error>() {
        return core.kind();
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return "io";
    }
    if e.downcast_ref::<serde_json::Error>().is_some() {
        return "format";
    }
    "invalid_argument"
}

pub fn emit_error(command: &str, e: &anyhow::Error) {
    let v = json!({
        "schema": SCHEMA,
        "command": command,
        "error": { "kind": error_kind(e), "message": format!("{e:#}") },
    });
    eprintln!("{}", serde_json::to_string(&v).expect("error report serializes"));
}
