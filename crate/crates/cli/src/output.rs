use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// JSON summary: `schema_version`, `command`, `metadata` and result fields at top level.
pub struct Summary {
    fields: Map<String, Value>,
    metadata: Map<String, Value>,
}

impl Summary {
    pub fn new(command: &str) -> Self {
        let mut fields = Map::new();
        fields.insert("schema_version".into(), json!(SCHEMA_VERSION));
        fields.insert("command".into(), json!(command));
        Self { fields, metadata: Map::new() }
    }

    pub fn set(&mut self, key: &str, value: impl serde::Serialize) -> &mut Self {
        self.fields.insert(key.into(), serde_json::to_value(value).expect("serializable"));
        self
    }

    pub fn meta(&mut self, key: &str, value: impl serde::Serialize) -> &mut Self {
        self.metadata.insert(key.into(), serde_json::to_value(value).expect("serializable"));
        self
    }

    pub fn emit(mut self, out: Option<&Path>) -> Result<(), CliError> {
        self.fields.insert("metadata".into(), Value::Object(self.metadata));
        let text = serde_json::to_string_pretty(&Value::Object(self.fields)).expect("serializable") + "\n";
        if let Some(path) = out {
            fs::write(path, &text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        print!("{text}");
        Ok(())
    }
}

pub enum Cell {
    Int(usize),
    Real(f64),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = Cell>) {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            first = false;
            match c {
                Cell::Int(v) => write!(self.text, "{v}").unwrap(),
                Cell::Real(v) => write!(self.text, "{v:.16e}").unwrap(),
            }
        }
        self.text.push('\n');
    }

    pub fn write(&self, path: Option<&Path>) -> Result<(), CliError> {
        match path {
            Some(p) => fs::write(p, &self.text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
            None => Ok(()),
        }
    }
}
