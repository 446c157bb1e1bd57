use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A hyperparameter value. Text that parses as a finite number is numeric.
#[derive(Clone, Debug, PartialEq)]
pub enum HpValue {
    Number(f64),
    Text(String),
}

impl HpValue {
    /// Interprets raw text from a CSV cell or a JSON string.
    pub fn parse(raw: &str) -> Result<Self> {
        let t = raw.trim();
        if t.is_empty() {
            return Err(Error::InvalidSetting("empty hyperparameter value".into()));
        }
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(HpValue::Number(v)),
            _ => Ok(HpValue::Text(t.to_string())),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            HpValue::Number(v) => Some(*v),
            HpValue::Text(_) => None,
        }
    }

    /// Canonical text: shortest round-trip decimal for numbers, JSON-quoted
    /// text otherwise.
    pub fn canonical(&self) -> String {
        match self {
            HpValue::Number(v) => format_number(*v),
            HpValue::Text(s) => serde_json::to_string(s).expect("string serialization"),
        }
    }
}

pub(crate) fn format_number(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

impl fmt::Display for HpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HpValue::Number(v) => f.write_str(&format_number(*v)),
            HpValue::Text(s) => f.write_str(s),
        }
    }
}

impl Serialize for HpValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HpValue::Number(v) => s.serialize_f64(*v),
            HpValue::Text(t) => s.serialize_str(t),
        }
    }
}

impl<'de> Deserialize<'de> for HpValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        HpValue::from_json(&v).map_err(serde::de::Error::custom)
    }
}

impl HpValue {
    pub(crate) fn from_json(v: &serde_json::Value) -> Result<Self> {
        use serde_json::Value;
        match v {
            Value::Number(n) => n
                .as_f64()
                .filter(|x| x.is_finite())
                .map(HpValue::Number)
                .ok_or_else(|| Error::InvalidSetting(format!("non-finite value {n}"))),
            Value::String(s) => HpValue::parse(s),
            Value::Bool(b) => Ok(HpValue::Text(b.to_string())),
            other => Err(Error::InvalidSetting(format!(
                "unsupported hyperparameter value {other}"
            ))),
        }
    }
}

/// One point of a hyperparameter grid.
///
/// Entries are stored sorted by name. The id is `name=value` pairs joined by
/// `;`, or `default` for a setting without hyperparameters.
#[derive(Clone, Debug)]
pub struct HyperparameterSetting {
    entries: Vec<(String, HpValue)>,
    id: String,
}

pub const DEFAULT_SETTING_ID: &str = "default";

impl HyperparameterSetting {
    pub fn new(mut entries: Vec<(String, HpValue)>) -> Result<Self> {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidSetting(format!(
                    "hyperparameter {} appears twice",
                    w[0].0
                )));
            }
        }
        for (name, _) in &entries {
            if name.is_empty() || name.contains(['=', ';']) {
                return Err(Error::InvalidSetting(format!(
                    "invalid hyperparameter name {name:?}"
                )));
            }
        }
        let id = if entries.is_empty() {
            DEFAULT_SETTING_ID.to_string()
        } else {
            entries
                .iter()
                .map(|(n, v)| format!("{n}={}", v.canonical()))
                .collect::<Vec<_>>()
                .join(";")
        };
        Ok(Self { entries, id })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new()).expect("empty setting")
    }

    pub fn entries(&self) -> &[(String, HpValue)] {
        &self.entries
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn get(&self, name: &str) -> Option<&HpValue> {
        self.entries
            .binary_search_by(|(n, _)| n.as_str().cmp(name))
            .ok()
            .map(|i| &self.entries[i].1)
    }
}

impl PartialEq for HyperparameterSetting {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for HyperparameterSetting {}

impl fmt::Display for HyperparameterSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

impl Serialize for HyperparameterSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(self.entries.len()))?;
        for (k, v) in &self.entries {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for HyperparameterSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = std::collections::BTreeMap::<String, HpValue>::deserialize(d)?;
        HyperparameterSetting::new(m.into_iter().collect()).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(pairs: &[(&str, HpValue)]) -> HyperparameterSetting {
        HyperparameterSetting::new(
            pairs
                .iter()
                .map(|(n, v)| (n.to_string(), v.clone()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn id_is_order_independent() {
        let a = s(&[("b", HpValue::Number(0.5)), ("a", HpValue::Number(2.0))]);
        let b = s(&[("a", HpValue::Number(2.0)), ("b", HpValue::Number(0.5))]);
        assert_eq!(a.id(), "a=2;b=0.5");
        assert_eq!(a, b);
    }

    #[test]
    fn numbers_canonicalize() {
        assert_eq!(HpValue::parse("0.10").unwrap().canonical(), "0.1");
        assert_eq!(HpValue::parse("1e-5").unwrap().canonical(), "1e-5");
        assert_eq!(HpValue::parse("-0").unwrap().canonical(), "0");
        assert_eq!(
            HpValue::Number(0.000244140625).canonical(),
            "0.000244140625"
        );
        assert_eq!(HpValue::parse("adam").unwrap().canonical(), "\"adam\"");
    }

    #[test]
    fn duplicate_names_rejected() {
        let r = HyperparameterSetting::new(vec![
            ("a".into(), HpValue::Number(1.0)),
            ("a".into(), HpValue::Number(2.0)),
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn empty_setting_has_default_id() {
        assert_eq!(HyperparameterSetting::empty().id(), "default");
    }
}
