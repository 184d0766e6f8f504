//! Run configuration: TOML with one table per experiment.
//!
//! ```toml
//! seed = 7                      # optional, overridden by --seed
//!
//! [sweep]                       # section name labels the result files
//! experiment = "normalization"  # registry name, defaults to the label
//! n_max = 8
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde_json::{json, Value};

use crate::registry::{find, ExperimentDef};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Int,
    Float,
    Bool,
    Str,
    IntList,
    FloatList,
    StrList,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParamKind::Int => "integer",
            ParamKind::Float => "float",
            ParamKind::Bool => "boolean",
            ParamKind::Str => "string",
            ParamKind::IntList => "list of integers",
            ParamKind::FloatList => "list of floats",
            ParamKind::StrList => "list of strings",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    IntList(Vec<i64>),
    FloatList(Vec<f64>),
    StrList(Vec<String>),
}

impl ParamValue {
    pub fn to_json(&self) -> Value {
        match self {
            ParamValue::Int(v) => json!(v),
            ParamValue::Float(v) => json!(v),
            ParamValue::Bool(v) => json!(v),
            ParamValue::Str(v) => json!(v),
            ParamValue::IntList(v) => json!(v),
            ParamValue::FloatList(v) => json!(v),
            ParamValue::StrList(v) => json!(v),
        }
    }

    fn from_toml(kind: ParamKind, v: &toml::Value) -> Option<Self> {
        let float = |x: &toml::Value| x.as_float().or_else(|| x.as_integer().map(|i| i as f64));
        let list = |x: &toml::Value| x.as_array().cloned();
        Some(match kind {
            ParamKind::Int => ParamValue::Int(v.as_integer()?),
            ParamKind::Float => ParamValue::Float(float(v)?),
            ParamKind::Bool => ParamValue::Bool(v.as_bool()?),
            ParamKind::Str => ParamValue::Str(v.as_str()?.to_owned()),
            ParamKind::IntList => ParamValue::IntList(list(v)?.iter().map(|x| x.as_integer()).collect::<Option<_>>()?),
            ParamKind::FloatList => ParamValue::FloatList(list(v)?.iter().map(float).collect::<Option<_>>()?),
            ParamKind::StrList => {
                ParamValue::StrList(list(v)?.iter().map(|x| x.as_str().map(str::to_owned)).collect::<Option<_>>()?)
            }
        })
    }
}

/// One accepted key of an experiment, with its default.
#[derive(Clone, Debug)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub default: fn() -> ParamValue,
    pub doc: &'static str,
}

/// Resolved parameters: every declared key, from the config or its default.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params(BTreeMap<&'static str, ParamValue>);

impl Params {
    pub fn defaults(specs: &[ParamSpec]) -> Self {
        Self(specs.iter().map(|s| (s.name, (s.default)())).collect())
    }

    pub fn set(&mut self, name: &'static str, value: ParamValue) {
        self.0.insert(name, value);
    }

    fn get(&self, name: &str) -> &ParamValue {
        self.0.get(name).unwrap_or_else(|| panic!("undeclared parameter {name}"))
    }

    pub fn int(&self, name: &str) -> i64 {
        match self.get(name) {
            ParamValue::Int(v) => *v,
            other => panic!("{name} is {other:?}, not an integer"),
        }
    }

    pub fn usize(&self, name: &str) -> usize {
        self.int(name).max(0) as usize
    }

    pub fn float(&self, name: &str) -> f64 {
        match self.get(name) {
            ParamValue::Float(v) => *v,
            other => panic!("{name} is {other:?}, not a float"),
        }
    }

    pub fn boolean(&self, name: &str) -> bool {
        match self.get(name) {
            ParamValue::Bool(v) => *v,
            other => panic!("{name} is {other:?}, not a boolean"),
        }
    }

    pub fn string(&self, name: &str) -> &str {
        match self.get(name) {
            ParamValue::Str(v) => v,
            other => panic!("{name} is {other:?}, not a string"),
        }
    }

    pub fn ints(&self, name: &str) -> Vec<usize> {
        match self.get(name) {
            ParamValue::IntList(v) => v.iter().map(|&x| x.max(0) as usize).collect(),
            other => panic!("{name} is {other:?}, not a list of integers"),
        }
    }

    pub fn floats(&self, name: &str) -> &[f64] {
        match self.get(name) {
            ParamValue::FloatList(v) => v,
            other => panic!("{name} is {other:?}, not a list of floats"),
        }
    }

    pub fn strings(&self, name: &str) -> &[String] {
        match self.get(name) {
            ParamValue::StrList(v) => v,
            other => panic!("{name} is {other:?}, not a list of strings"),
        }
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.0.iter().map(|(k, v)| ((*k).to_owned(), v.to_json())).collect())
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub label: String,
    pub def: &'static ExperimentDef,
    pub params: Params,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub experiments: Vec<ExperimentConfig>,
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Unreadable { path: path.display().to_string(), reason: e.to_string() })?;
    parse(&text)
}

/// Parses a whole configuration, reporting every problem at once.
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Invalid(vec![e.to_string()]))?;
    let mut errors = Vec::new();
    let mut seed = None;
    let mut experiments = Vec::new();
    for (key, value) in &table {
        match value {
            toml::Value::Table(section) => {
                if let Some(exp) = parse_section(key, section, &mut errors) {
                    experiments.push(exp);
                }
            }
            _ if key == "seed" => match value.as_integer() {
                Some(s) if s >= 0 => seed = Some(s as u64),
                _ => errors.push("seed: expected a non-negative integer".to_owned()),
            },
            _ => errors.push(format!("{key}: unknown top-level key")),
        }
    }
    if experiments.is_empty() && errors.is_empty() {
        errors.push("no experiment sections".to_owned());
    }
    if errors.is_empty() {
        Ok(RunConfig { seed, experiments })
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

fn parse_section(label: &str, section: &toml::Table, errors: &mut Vec<String>) -> Option<ExperimentConfig> {
    let name = match section.get("experiment") {
        None => label,
        Some(v) => match v.as_str() {
            Some(s) => s,
            None => {
                errors.push(format!("[{label}] experiment: expected string"));
                return None;
            }
        },
    };
    let Some(def) = find(name) else {
        errors.push(format!("[{label}] unknown experiment \"{name}\""));
        return None;
    };
    let mut params = Params::defaults(def.params);
    let before = errors.len();
    for (key, value) in section {
        if key == "experiment" {
            continue;
        }
        match def.params.iter().find(|p| p.name == key) {
            None => errors.push(format!("[{label}] {key}: unknown key for {}", def.name)),
            Some(param) => match ParamValue::from_toml(param.kind, value) {
                Some(v) => params.set(param.name, v),
                None => errors.push(format!("[{label}] {key}: expected {}, found {}", param.kind, value.type_str())),
            },
        }
    }
    (errors.len() == before).then(|| ExperimentConfig { label: label.to_owned(), def, params })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_name_selects_experiment() {
        let c = parse("[normalization]\nn_max = 3\n").unwrap();
        assert_eq!(c.experiments[0].def.name, "normalization");
        assert_eq!(c.experiments[0].params.usize("n_max"), 3);
    }

    #[test]
    fn all_errors_are_listed() {
        let err = parse("bogus = 1\n[normalization]\nn_max = \"x\"\nwhat = 2\n[nope]\n").unwrap_err();
        let ConfigError::Invalid(list) = err else { panic!() };
        assert_eq!(list.len(), 4, "{list:?}");
    }

    #[test]
    fn integers_are_accepted_as_floats() {
        let c = parse("[normalization]\ntolerance = 0\n").unwrap();
        assert_eq!(c.experiments[0].params.float("tolerance"), 0.0);
    }
}
