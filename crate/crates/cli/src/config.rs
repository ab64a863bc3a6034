//! Config file loading and precedence handling.
//!
//! Precedence is defaults < config file < command-line flags. The file is
//! parsed into a JSON value (TOML files are converted), sections are pulled
//! out by name, and the fully resolved config is echoed into every output
//! manifest as the single source of truth for reruns.

use serde_json::Value;
use std::path::Path;

#[derive(Clone, Debug, Default)]
pub struct FileConfig {
    root: Option<Value>,
}

impl FileConfig {
    /// Returns the named section, if the file defined one.
    pub fn section(&self, name: &str) -> Option<&Value> {
        self.root.as_ref().and_then(|v| v.get(name))
    }

    /// Deserializes the section over `base`, keeping `base` values for
    /// fields the file omits.
    pub fn apply_section<T: serde::Serialize + serde::de::DeserializeOwned>(
        &self,
        name: &str,
        base: T,
    ) -> Result<T, String> {
        let Some(section) = self.section(name) else {
            return Ok(base);
        };
        let mut merged = serde_json::to_value(&base).map_err(|e| e.to_string())?;
        merge(&mut merged, section);
        serde_json::from_value(merged).map_err(|e| format!("config section [{name}]: {e}"))
    }
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig, String> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let is_toml = path
        .extension()
        .map_or(false, |e| e.eq_ignore_ascii_case("toml"));
    let root: Value = if is_toml {
        let parsed: toml::Value =
            toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
        serde_json::to_value(parsed).map_err(|e| e.to_string())?
    } else {
        serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?
    };
    Ok(FileConfig { root: Some(root) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Demo {
        a: u32,
        b: f64,
        c: String,
    }

    #[test]
    fn section_overrides_only_named_fields() {
        let cfg = FileConfig {
            root: Some(serde_json::json!({"demo": {"a": 7}})),
        };
        let out = cfg
            .apply_section(
                "demo",
                Demo {
                    a: 1,
                    b: 2.5,
                    c: "x".into(),
                },
            )
            .unwrap();
        assert_eq!(
            out,
            Demo {
                a: 7,
                b: 2.5,
                c: "x".into()
            }
        );
    }
}
