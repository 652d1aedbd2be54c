//! Plain-text configuration: `key = value` lines under `[section]` headers.
//!
//! Keys are addressed as `section.key`. Later assignments from flags replace
//! file values. Relative paths resolve against the directory of the file
//! that set them, or the working directory for flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("{field}: {reason}")]
    Field { field: String, reason: String },
}

impl ConfigError {
    pub fn field(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Field { field: field.to_string(), reason: reason.into() }
    }

    /// The offending `section.key`, when known.
    pub fn field_name(&self) -> Option<&str> {
        match self {
            ConfigError::Field { field, .. } => Some(field),
            ConfigError::Syntax { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    /// Directory that relative paths in `value` are taken from.
    base: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl Config {
    /// Parse config text. Keys before the first header go to `default_section`
    /// when given and are an error otherwise. `#` and `;` start comment lines.
    pub fn parse(text: &str, default_section: Option<&str>, base: &Path) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut section = default_section.map(str::to_string);
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |reason: String| ConfigError::Syntax { line: line_no, reason };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| err("unterminated section header".into()))?.trim();
                if !valid_name(name) {
                    return Err(err(format!("bad section name {name:?}")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let k = k.trim();
            if !valid_name(k) {
                return Err(err(format!("bad key {k:?}")));
            }
            let sec = section.as_deref().ok_or_else(|| err(format!("key {k:?} outside any section")))?;
            let key = format!("{sec}.{k}");
            if cfg.entries.contains_key(&key) {
                return Err(err(format!("duplicate key {key}")));
            }
            cfg.entries.insert(key, Entry { value: v.trim().to_string(), base: base.to_path_buf() });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path, default_section: Option<&str>) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::field("config", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Config::parse(&text, default_section, &base)
    }

    /// Override `section.key` with a flag value.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        match key.split_once('.') {
            Some((s, k)) if valid_name(s) && valid_name(k) => {
                self.entries.insert(key.to_string(), Entry { value: value.into(), base: PathBuf::new() });
                Ok(())
            }
            _ => Err(ConfigError::field(key, "override keys take the form section.key")),
        }
    }

    /// Apply a `section.key=value` override.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::field(assignment, "override must be section.key=value"))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str()).filter(|v| !v.is_empty())
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::field(key, "required field is missing"))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let e = self.entries.get(key).filter(|e| !e.value.is_empty())?;
        Some(e.base.join(&e.value))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf, ConfigError> {
        self.path(key).ok_or_else(|| ConfigError::field(key, "required field is missing"))
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| ConfigError::field(key, format!("cannot parse {v:?}: {e}"))),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key).map(str::to_ascii_lowercase).as_deref() {
            None => Ok(default),
            Some("true" | "yes" | "on" | "1") => Ok(true),
            Some("false" | "no" | "off" | "0") => Ok(false),
            Some(v) => Err(ConfigError::field(key, format!("expected true or false, got {v:?}"))),
        }
    }

    /// Comma-separated list of numbers.
    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| ConfigError::field(key, format!("{s:?} is not a number"))))
                .collect(),
        }
    }

    /// Reject keys that no consumer reads, so that typos fail loudly.
    pub fn check_known(&self, known: &[&str]) -> Result<(), ConfigError> {
        match self.entries.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(ConfigError::field(k, "unknown key")),
            None => Ok(()),
        }
    }

    /// Sorted `[section]` / `key = value` text of the effective configuration.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut current = None;
        for (key, e) in &self.entries {
            let (s, k) = key.split_once('.').expect("keys are section-qualified");
            if current != Some(s) {
                out.push_str(&format!("[{s}]\n"));
                current = Some(s);
            }
            out.push_str(&format!("{k} = {}\n", e.value));
        }
        out
    }

    /// SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_overrides() {
        let text = "# inventory\n[inputs]\ndsm = a/dsm.tif\n\n[chm]\nsmooth_radius=2\n";
        let mut c = Config::parse(text, None, Path::new("/data")).unwrap();
        assert_eq!(c.path("inputs.dsm").unwrap(), PathBuf::from("/data/a/dsm.tif"));
        assert_eq!(c.parse_or("chm.smooth_radius", 1usize).unwrap(), 2);
        c.set_assignment("chm.smooth_radius=0").unwrap();
        assert_eq!(c.parse_or("chm.smooth_radius", 1usize).unwrap(), 0);
        assert_eq!(c.canonical(), "[chm]\nsmooth_radius = 0\n[inputs]\ndsm = a/dsm.tif\n");
    }

    #[test]
    fn errors_name_line_or_field() {
        assert_eq!(Config::parse("x = 1", None, Path::new("")).unwrap_err(), ConfigError::Syntax {
            line: 1,
            reason: "key \"x\" outside any section".into()
        });
        assert!(matches!(Config::parse("[a]\nk=1\nk=2", None, Path::new("")), Err(ConfigError::Syntax { line: 3, .. })));
        assert!(matches!(Config::parse("[a\n", None, Path::new("")), Err(ConfigError::Syntax { line: 1, .. })));
        let c = Config::parse("[a]\nk = x", None, Path::new("")).unwrap();
        assert_eq!(c.require("inputs.dem").unwrap_err().field_name(), Some("inputs.dem"));
        assert_eq!(c.parse_or("a.k", 1.0f64).unwrap_err().field_name(), Some("a.k"));
        assert_eq!(c.check_known(&["a.j"]).unwrap_err().field_name(), Some("a.k"));
    }

    #[test]
    fn default_section_and_empty_values() {
        let c = Config::parse("seed = 7\nnoise =\n", Some("synth"), Path::new("")).unwrap();
        assert_eq!(c.get("synth.seed"), Some("7"));
        assert_eq!(c.get("synth.noise"), None);
        assert!(c.bool_or("synth.flag", true).unwrap());
    }

    #[test]
    fn hash_ignores_layout() {
        let a = Config::parse("[s]\nb=2\na=1\n", None, Path::new("x")).unwrap();
        let b = Config::parse("; c\n[s]\na = 1\n  b = 2", None, Path::new("y")).unwrap();
        assert_eq!(a.hash(), b.hash());
    }
}
