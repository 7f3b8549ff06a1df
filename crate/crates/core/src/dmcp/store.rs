use std::collections::BTreeMap;

use super::DmcpError;

/// Flat, dot-namespaced configuration. Keys sort deterministically.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigStore {
    entries: BTreeMap<String, String>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty() && !k.chars().any(char::is_whitespace)
}

impl ConfigStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads `key=value` lines; `#` starts a comment, blank lines are skipped.
    /// A repeated key is an error.
    pub fn parse(text: &str) -> Result<Self, DmcpError> {
        let mut s = ConfigStore::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let err = |reason: String| DmcpError::Config { line, reason };
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| err("expected key=value".into()))?;
            let k = k.trim();
            if !valid_key(k) {
                return Err(err(format!("invalid key '{k}'")));
            }
            if s.entries.contains_key(k) {
                return Err(err(format!("duplicate key '{k}'")));
            }
            s.entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(s)
    }

    pub fn insert(&mut self, key: &str, value: &str) -> Result<Option<String>, DmcpError> {
        if !valid_key(key) {
            return Err(DmcpError::InvalidKey(key.to_string()));
        }
        Ok(self.entries.insert(key.to_string(), value.to_string()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// `name.*` entries with the prefix stripped, plus every `global.*`
    /// entry as is.
    pub fn subset_for(&self, name: &str) -> BTreeMap<String, String> {
        let prefix = format!("{name}.");
        let mut out = BTreeMap::new();
        for (k, v) in &self.entries {
            if let Some(rest) = k.strip_prefix(&prefix) {
                out.insert(rest.to_string(), v.clone());
            } else if k.starts_with("global.") {
                out.insert(k.clone(), v.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_file() {
        let s = ConfigStore::parse("# cfg\nplanner.rate = 10\n\nglobal.logdir=/tmp # where\n").unwrap();
        assert_eq!(s.get("planner.rate"), Some("10"));
        assert_eq!(s.get("global.logdir"), Some("/tmp"));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn parse_errors() {
        for (text, line) in [("a=1\nnovalue\n", 2), ("a=1\na=2", 2), ("bad key=1", 1), ("=3", 1)] {
            match ConfigStore::parse(text) {
                Err(DmcpError::Config { line: l, .. }) => assert_eq!(l, line),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn prefix_rule() {
        let mut s = ConfigStore::new();
        s.insert("planner.rate", "10").unwrap();
        s.insert("global.logdir", "/tmp").unwrap();
        s.insert("camera.fx", "500").unwrap();
        s.insert("plannerx.y", "no").unwrap();
        let want: BTreeMap<String, String> = [("rate", "10"), ("global.logdir", "/tmp")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        assert_eq!(s.subset_for("planner"), want);
        assert_eq!(s.subset_for("nobody").len(), 1);
        assert!(s.insert("a b", "x").is_err());
    }
}
