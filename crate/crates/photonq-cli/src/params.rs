//! Parameter schemas and validation of parameter files.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Float,
    Int,
    Choice(&'static [&'static str]),
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: Kind,
    pub default: Value,
    /// Lower bound and whether it is excluded.
    pub min: Option<(f64, bool)>,
    pub max: Option<f64>,
    pub doc: &'static str,
}

impl ParamSpec {
    pub fn float(name: &'static str, default: f64, doc: &'static str) -> Self {
        ParamSpec { name, kind: Kind::Float, default: Value::from(default), min: None, max: None, doc }
    }

    pub fn int(name: &'static str, default: i64, doc: &'static str) -> Self {
        ParamSpec { name, kind: Kind::Int, default: Value::from(default), min: None, max: None, doc }
    }

    pub fn choice(name: &'static str, options: &'static [&'static str], doc: &'static str) -> Self {
        ParamSpec { name, kind: Kind::Choice(options), default: Value::from(options[0]), min: None, max: None, doc }
    }

    pub fn range(mut self, lo: f64, hi: f64) -> Self {
        self.min = Some((lo, false));
        self.max = Some(hi);
        self
    }

    /// `(lo, hi]`.
    pub fn above(mut self, lo: f64, hi: f64) -> Self {
        self.min = Some((lo, true));
        self.max = Some(hi);
        self
    }

    pub fn range_text(&self) -> String {
        match (&self.kind, self.min, self.max) {
            (Kind::Choice(o), _, _) => o.join("|"),
            (_, Some((lo, open)), Some(hi)) => format!("{}{lo}, {hi}]", if open { "(" } else { "[" }),
            _ => "-".into(),
        }
    }

    fn check(&self, v: &Value) -> Result<Value, CliError> {
        let bad = |reason: String| CliError::InvalidParam { field: self.name.to_string(), reason };
        let num = match (&self.kind, v) {
            (Kind::Choice(opts), Value::String(s)) => {
                return if opts.contains(&s.as_str()) {
                    Ok(v.clone())
                } else {
                    Err(bad(format!("`{s}` is not one of {}", opts.join(", "))))
                };
            }
            (Kind::Int, Value::Number(n)) if n.is_i64() => n.as_f64().unwrap_or(0.0),
            (Kind::Float, Value::Number(n)) => n.as_f64().unwrap_or(f64::NAN),
            _ => return Err(bad(format!("expected {:?}, found {v}", self.kind).to_lowercase())),
        };
        if let Some((lo, open)) = self.min {
            if num < lo || (open && num == lo) || num.is_nan() {
                return Err(bad(format!("{num} is below the allowed range {}", self.range_text())));
            }
        }
        if let Some(hi) = self.max {
            if num > hi {
                return Err(bad(format!("{num} is above the allowed range {}", self.range_text())));
            }
        }
        Ok(match self.kind {
            Kind::Float => Value::from(num),
            _ => v.clone(),
        })
    }
}

/// Validated parameter set with defaults filled in.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Params(pub BTreeMap<String, Value>);

impl Params {
    pub fn resolve(schema: &[ParamSpec], given: &toml::Table) -> Result<Params, CliError> {
        for key in given.keys() {
            if !schema.iter().any(|s| s.name == key) {
                return Err(CliError::InvalidParam { field: key.clone(), reason: "unknown parameter".into() });
            }
        }
        let mut out = BTreeMap::new();
        for spec in schema {
            let v = match given.get(spec.name) {
                Some(t) => serde_json::to_value(t).map_err(|e| CliError::InvalidParam { field: spec.name.into(), reason: e.to_string() })?,
                None => spec.default.clone(),
            };
            out.insert(spec.name.to_string(), spec.check(&v)?);
        }
        Ok(Params(out))
    }

    pub fn f(&self, name: &str) -> f64 {
        self.0[name].as_f64().expect("validated float")
    }

    pub fn i(&self, name: &str) -> i64 {
        self.0[name].as_i64().expect("validated int")
    }

    pub fn s(&self, name: &str) -> &str {
        self.0[name].as_str().expect("validated choice")
    }
}
