//! Command-line flags derived from the shape of the default config.

use cpwmask::config::RunConfig;
use toml::Value;

/// One config key exposed as `--<section>-<key>`.
#[derive(Debug, Clone)]
pub struct Flag {
    pub id: String,
    pub long: String,
    pub section: Option<String>,
    pub key: String,
    pub default: Value,
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Integer(_) => "INT",
        Value::Float(_) => "NUM",
        Value::Boolean(_) => "BOOL",
        Value::Array(a) => match a.first() {
            Some(Value::Float(_)) | Some(Value::Integer(_)) => "NUM,...",
            _ => "STR,...",
        },
        _ => "STR",
    }
}

fn show(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(show).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

impl Flag {
    pub fn value_name(&self) -> &'static str {
        kind(&self.default)
    }

    pub fn help(&self) -> String {
        let key = match &self.section {
            Some(s) => format!("{s}.{}", self.key),
            None => self.key.clone(),
        };
        format!("{key} [default: {}]", show(&self.default))
    }

    pub fn path(&self) -> Vec<&str> {
        match &self.section {
            Some(s) => vec![s.as_str(), self.key.as_str()],
            None => vec![self.key.as_str()],
        }
    }

    /// Parses `raw` as the type of the default value. Lists are
    /// comma-separated; an empty string is an empty list.
    pub fn parse(&self, raw: &str) -> Result<Value, String> {
        parse_like(&self.default, raw)
    }
}

fn parse_like(template: &Value, raw: &str) -> Result<Value, String> {
    let raw = raw.trim();
    Ok(match template {
        Value::Integer(_) => Value::Integer(
            raw.parse()
                .map_err(|_| format!("expected an integer, got {raw:?}"))?,
        ),
        Value::Float(_) => Value::Float(
            raw.parse()
                .map_err(|_| format!("expected a number, got {raw:?}"))?,
        ),
        Value::Boolean(_) => Value::Boolean(
            raw.parse()
                .map_err(|_| format!("expected true or false, got {raw:?}"))?,
        ),
        Value::Array(a) => {
            let elem = a.first().cloned().unwrap_or(Value::String(String::new()));
            let items = raw.split(',').map(str::trim).filter(|s| !s.is_empty());
            Value::Array(
                items
                    .map(|s| parse_like(&elem, s))
                    .collect::<Result<_, _>>()?,
            )
        }
        _ => Value::String(raw.to_string()),
    })
}

/// Every leaf of the default config, in declaration order.
pub fn from_defaults(cfg: &RunConfig) -> Vec<Flag> {
    let table = toml::Table::try_from(cfg).expect("config serializes");
    let mut out = Vec::new();
    let flag = |section: Option<&str>, key: &str, v: &Value| {
        let long = match section {
            Some(s) => format!("{s}-{key}"),
            None => key.to_string(),
        }
        .replace('_', "-");
        Flag {
            id: format!("cfg:{long}"),
            long,
            section: section.map(str::to_string),
            key: key.to_string(),
            default: v.clone(),
        }
    };
    for (k, v) in &table {
        match v {
            Value::Table(t) => out.extend(t.iter().map(|(kk, vv)| flag(Some(k), kk, vv))),
            _ => out.push(flag(None, k, v)),
        }
    }
    out
}

/// Sets `path` inside `table`, creating the section if needed.
pub fn set(table: &mut toml::Table, path: &[&str], v: Value) {
    match path {
        [key] => {
            table.insert(key.to_string(), v);
        }
        [section, rest @ ..] => {
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| Value::Table(toml::Table::new()));
            if let Value::Table(t) = entry {
                set(t, rest, v);
            }
        }
        [] => {}
    }
}
