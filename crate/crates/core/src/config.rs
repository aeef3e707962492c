//! Flat `name = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored; a trailing `# ...`
//! comment after a value is stripped. Keys are case-sensitive and may appear
//! once.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Parses the text of a key-value file into an ordered map of raw strings.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected `name = value`, got `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::Parse { line, msg: "empty key".into() });
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Parse { line, msg: format!("duplicate key `{key}`") });
        }
    }
    Ok(out)
}

pub fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_kv(&std::fs::read_to_string(path)?)
}

/// Parses a numeric value, naming the key on failure.
pub fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::Parse {
        line: 0,
        msg: format!("`{key}`: `{value}` is not a number"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let m = parse_kv("# header\n\nn_t = 200 # tx\nnoise_dbm=-90\n").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m["n_t"], "200");
        assert_eq!(m["noise_dbm"], "-90");
    }

    #[test]
    fn rejects_missing_equals() {
        let err = parse_kv("n_t 200").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn rejects_duplicates() {
        assert!(parse_kv("d = 1\nd = 2").is_err());
    }
}
