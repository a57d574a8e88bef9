//! Flat INI: `[section]` headers, `key = value` lines, `#` or `;` comments.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "config line {n}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ini {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    headers: BTreeMap<String, usize>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Ini, ConfigError> {
        let mut ini = Ini::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(n, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(ConfigError::at(n, "empty section name"));
                }
                if ini.sections.contains_key(name) {
                    return Err(ConfigError::at(n, format!("section [{name}] repeated")));
                }
                ini.sections.insert(name.to_string(), BTreeMap::new());
                ini.headers.insert(name.to_string(), n);
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::at(n, format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::at(n, "empty key"));
            }
            let section = current
                .as_ref()
                .ok_or_else(|| ConfigError::at(n, format!("`{key}` appears before any section")))?;
            let table = ini.sections.get_mut(section).expect("inserted on header");
            if table.contains_key(key) {
                return Err(ConfigError::at(n, format!("[{section}] {key} set twice")));
            }
            table.insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    line: n,
                },
            );
        }
        Ok(ini)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    pub fn header_line(&self, section: &str) -> Option<usize> {
        self.headers.get(section).copied()
    }

    pub fn sections(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, Entry>)> {
        self.sections.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Sorted `[section]` / `key=value` text; whitespace, comments and
    /// ordering do not affect it.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (name, table) in &self.sections {
            out.push('[');
            out.push_str(name);
            out.push_str("]\n");
            for (k, e) in table {
                out.push_str(k);
                out.push('=');
                out.push_str(&e.value);
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let ini = Ini::parse("# top\n[grid]\npoints = 64\n; note\nperiod=16\n\n[run]\nexperiment = simulate\n").unwrap();
        assert_eq!(ini.get("grid", "points").unwrap().value, "64");
        assert_eq!(ini.get("grid", "points").unwrap().line, 3);
        assert_eq!(ini.get("run", "experiment").unwrap().line, 8);
        assert!(ini.get("run", "missing").is_none());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = Ini::parse("[grid]\npoints 64\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = Ini::parse("points = 3\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = Ini::parse("[a]\nx=1\nx=2\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = Ini::parse("[a\n").unwrap_err();
        assert_eq!(e.to_string(), "config line 1: unterminated section header");
    }

    #[test]
    fn canonical_ignores_layout() {
        let a = Ini::parse("[b]\ny = 2\nx=1\n[a]\nz = 3\n").unwrap();
        let b = Ini::parse("# c\n[a]\n  z=3\n[b]\nx = 1\ny=2\n").unwrap();
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(a.canonical(), "[a]\nz=3\n[b]\nx=1\ny=2\n");
    }
}
