//! Canonical JSON documents.
//!
//! Every document this crate writes (indexes, manifests, validation reports,
//! registry listings) goes through [`to_bytes`]:
//!
//! - UTF-8, `\n` line endings, trailing newline
//! - object keys sorted bytewise, one member per line, two-space indentation
//! - arrays holding only scalars are written inline as `[a, b]`
//! - empty containers are written as `{}` and `[]`
//!
//! Reading goes through [`parse`], which rejects duplicate object keys that
//! `serde_json` would otherwise silently collapse.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::{self, DeserializeSeed, Deserializer, MapAccess, SeqAccess, Visitor};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Renders `value` in canonical form.
pub fn to_bytes(value: &Value) -> Vec<u8> {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out.into_bytes()
}

fn is_scalar(value: &Value) -> bool {
    !matches!(value, Value::Array(_) | Value::Object(_))
}

fn write_scalar(out: &mut String, value: &Value) {
    // serde_json never fails on a scalar Value
    out.push_str(&serde_json::to_string(value).expect("scalar serialization"));
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    match value {
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_unstable_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                indent(out, depth + 1);
                write_scalar(out, &Value::String((*key).clone()));
                out.push_str(": ");
                write_value(out, &map[key.as_str()], depth + 1);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, depth);
            out.push('}');
        }
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(is_scalar) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_scalar(out, item);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, depth + 1);
                write_value(out, item, depth + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, depth);
            out.push(']');
        }
        scalar => write_scalar(out, scalar),
    }
}

/// Parses a JSON document, rejecting duplicate keys at any depth. A leading
/// UTF-8 byte order mark is ignored.
pub fn parse(bytes: &[u8]) -> Result<Value> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value = StrictValue
        .deserialize(&mut de)
        .and_then(|v| de.end().map(|_| v))
        .map_err(|e| Error::schema("$", e.to_string()))?;
    Ok(value)
}

struct StrictValue;

impl<'de> DeserializeSeed<'de> for StrictValue {
    type Value = Value;

    fn deserialize<D: Deserializer<'de>>(self, deserializer: D) -> Result<Value, D::Error> {
        deserializer.deserialize_any(StrictVisitor)
    }
}

struct StrictVisitor;

impl<'de> Visitor<'de> for StrictVisitor {
    type Value = Value;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_bool<E>(self, v: bool) -> Result<Value, E> {
        Ok(Value::Bool(v))
    }

    fn visit_i64<E>(self, v: i64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_u64<E>(self, v: u64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_f64<E>(self, v: f64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_str<E>(self, v: &str) -> Result<Value, E> {
        Ok(Value::String(v.to_owned()))
    }

    fn visit_string<E>(self, v: String) -> Result<Value, E> {
        Ok(Value::String(v))
    }

    fn visit_unit<E>(self) -> Result<Value, E> {
        Ok(Value::Null)
    }

    fn visit_none<E>(self) -> Result<Value, E> {
        Ok(Value::Null)
    }

    fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<Value, D::Error> {
        StrictValue.deserialize(d)
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Value, A::Error> {
        let mut items = Vec::new();
        while let Some(item) = seq.next_element_seed(StrictValue)? {
            items.push(item);
        }
        Ok(Value::Array(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Value, A::Error> {
        let mut map = Map::new();
        while let Some(key) = access.next_key::<String>()? {
            if map.contains_key(&key) {
                return Err(de::Error::custom(format_args!("duplicate key {key:?}")));
            }
            let value = access.next_value_seed(StrictValue)?;
            map.insert(key, value);
        }
        Ok(Value::Object(map))
    }
}

/// Walks a JSON object during schema validation, tracking the key path for
/// error messages and rejecting unknown keys on [`Fields::finish`].
pub(crate) struct Fields<'a> {
    path: String,
    map: &'a Map<String, Value>,
    seen: BTreeSet<&'a str>,
}

pub(crate) fn child_path(path: &str, key: &str) -> String {
    if path.is_empty() || path == "$" {
        key.to_owned()
    } else {
        format!("{path}.{key}")
    }
}

pub(crate) fn expect_object<'a>(value: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    value
        .as_object()
        .ok_or_else(|| Error::schema(path, "expected an object"))
}

pub(crate) fn expect_str<'a>(value: &'a Value, path: &str) -> Result<&'a str> {
    value
        .as_str()
        .ok_or_else(|| Error::schema(path, "expected a string"))
}

impl<'a> Fields<'a> {
    pub(crate) fn new(value: &'a Value, path: &str) -> Result<Self> {
        Ok(Fields {
            path: path.to_owned(),
            map: expect_object(value, path)?,
            seen: BTreeSet::new(),
        })
    }

    pub(crate) fn path_of(&self, key: &str) -> String {
        child_path(&self.path, key)
    }

    pub(crate) fn optional(&mut self, key: &'a str) -> Option<&'a Value> {
        let v = self.map.get(key)?;
        self.seen.insert(key);
        Some(v)
    }

    pub(crate) fn required(&mut self, key: &'a str) -> Result<&'a Value> {
        self.optional(key)
            .ok_or_else(|| Error::schema(self.path_of(key), "missing required key"))
    }

    pub(crate) fn string(&mut self, key: &'a str) -> Result<&'a str> {
        let path = self.path_of(key);
        expect_str(self.required(key)?, &path)
    }

    pub(crate) fn boolean(&mut self, key: &'a str) -> Result<bool> {
        let path = self.path_of(key);
        self.required(key)?
            .as_bool()
            .ok_or_else(|| Error::schema(path, "expected a boolean"))
    }

    pub(crate) fn count(&mut self, key: &'a str) -> Result<u64> {
        let path = self.path_of(key);
        self.required(key)?
            .as_u64()
            .ok_or_else(|| Error::schema(path, "expected a non-negative integer"))
    }

    pub(crate) fn object(&mut self, key: &'a str) -> Result<&'a Map<String, Value>> {
        let path = self.path_of(key);
        expect_object(self.required(key)?, &path)
    }

    pub(crate) fn finish(self) -> Result<()> {
        for key in self.map.keys() {
            if !self.seen.contains(key.as_str()) {
                return Err(Error::schema(child_path(&self.path, key), "unknown key"));
            }
        }
        Ok(())
    }
}
