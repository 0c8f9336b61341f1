//! Plain-text `key = value` files.
//!
//! One entry per line, `#` starts a comment, keys are unique. Readers consume
//! keys with [`KeyValues::take`] and call [`KeyValues::finish`] so that
//! unknown keys are reported instead of silently ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected 'key = value', got '{}'",
                    lineno + 1,
                    raw
                ))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{}'",
                    lineno + 1,
                    key
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn take_str(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    /// Remove and parse `key`, if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("key '{}': cannot parse value '{}'", key, v))),
        }
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?
            .ok_or_else(|| Error::Config(format!("missing required key '{}'", key)))
    }

    /// Error if any key has not been consumed.
    pub fn finish(self) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            return Err(Error::Config(format!("unknown key '{}'", key)));
        }
        Ok(())
    }
}

/// Builder for the same format.
#[derive(Debug, Default)]
pub struct KeyValueWriter {
    out: String,
}

impl KeyValueWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        let _ = writeln!(self.out, "# {}", text);
        self
    }

    pub fn entry(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.out, "{} = {}", key, value);
        self
    }

    pub fn finish(&self) -> String {
        self.out.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_reject_unknown() {
        let mut kv =
            KeyValues::parse("# header\nn = 100\n eps= 0.1 # inline\n\nkind = rowwise\n").unwrap();
        assert_eq!(kv.require::<usize>("n").unwrap(), 100);
        assert_eq!(kv.take::<f64>("eps").unwrap(), Some(0.1));
        assert!(kv.clone().finish().is_err());
        assert_eq!(kv.take_str("kind").as_deref(), Some("rowwise"));
        kv.finish().unwrap();
    }

    #[test]
    fn duplicate_and_malformed() {
        assert!(KeyValues::parse("a = 1\na = 2").is_err());
        assert!(KeyValues::parse("just text").is_err());
        let mut kv = KeyValues::parse("n = x").unwrap();
        assert!(kv.take::<usize>("n").is_err());
    }
}
