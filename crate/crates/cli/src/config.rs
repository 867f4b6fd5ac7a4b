use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Overlays the flags given on the command line onto a JSON config file.
/// A flag counts as given when it is not null and not an empty list.
pub fn merge<T: Serialize + DeserializeOwned>(flags: T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let Value::Object(mut merged) = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))? else {
        bail!("config {} must hold a JSON object", path.display());
    };
    let Value::Object(given) = serde_json::to_value(&flags)? else {
        unreachable!("argument structs serialize to objects");
    };
    overlay(&mut merged, given);
    serde_json::from_value(Value::Object(merged)).with_context(|| format!("invalid config {}", path.display()))
}

/// Copies the given values onto `base`, descending into nested groups.
fn overlay(base: &mut Map<String, Value>, given: Map<String, Value>) {
    for (key, value) in given {
        match value {
            Value::Null => {}
            Value::Array(a) if a.is_empty() => {}
            Value::Object(inner) => match base.get_mut(&key) {
                Some(Value::Object(b)) => overlay(b, inner),
                _ => {
                    let mut fresh = Map::new();
                    overlay(&mut fresh, inner);
                    base.insert(key, Value::Object(fresh));
                }
            },
            other => {
                base.insert(key, other);
            }
        }
    }
}
