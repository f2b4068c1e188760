//! Plain `key=value` report rendering.
//!
//! Floats are written with Rust's shortest round-trip `{:e}` form, so the
//! output is locale-free and identical across runs for identical inputs.

use std::fmt::{self, Display};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, format_f64(value));
    }

    /// Appends every entry of `other` with `prefix` prepended to its key.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &KeyValues) {
        for (k, v) in &other.entries {
            self.entries.push((format!("{prefix}{k}"), v.clone()));
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

impl Display for KeyValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

pub fn format_f64(value: f64) -> String {
    format!("{value:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_in_insertion_order() {
        let mut kv = KeyValues::new();
        kv.push("b", 2);
        kv.push_f64("a", 0.25);
        kv.push("flag", true);
        assert_eq!(kv.to_string(), "b=2\na=2.5e-1\nflag=true\n");
        assert_eq!(kv.get("a"), Some("2.5e-1"));
        assert_eq!(kv.get("missing"), None);
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1e-300, -3.75, 12345.678, f64::MIN_POSITIVE] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn prefixed_merge() {
        let mut inner = KeyValues::new();
        inner.push("k", 1);
        let mut outer = KeyValues::new();
        outer.extend_prefixed("config.", &inner);
        assert_eq!(outer.to_string(), "config.k=1\n");
    }
}
