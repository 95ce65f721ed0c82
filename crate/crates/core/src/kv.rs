//! `key = value` text shared by dataset headers and run configs.

use std::collections::BTreeMap;

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected 'key = value'", n + 1))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(format!("line {}: empty key", n + 1));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key '{key}'", n + 1));
        }
    }
    Ok(map)
}

/// Splits a comma-separated list, dropping surrounding whitespace; empty input gives an empty list.
pub fn list(value: &str) -> Vec<&str> {
    if value.trim().is_empty() {
        return Vec::new();
    }
    value.split(',').map(str::trim).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let map = parse("# header\na = 1\n\n b=two , three \n").unwrap();
        assert_eq!(map["a"], "1");
        assert_eq!(list(&map["b"]), vec!["two", "three"]);
        assert!(parse("a = 1\na = 2").is_err());
        assert!(parse("no equals sign").is_err());
        assert!(list(" ").is_empty());
    }
}
