//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, and `include PATH` splices
//! another file (resolved relative to the including file). Later assignments
//! override earlier ones, so an include followed by overrides works as a base
//! configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub path: PathBuf,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

const MAX_INCLUDE_DEPTH: usize = 16;

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = Config::new();
        cfg.load_into(path.as_ref(), 0)?;
        Ok(cfg)
    }

    pub fn parse_str(text: &str, origin: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg = Config::new();
        cfg.parse_into(text, &origin.into(), 0)?;
        Ok(cfg)
    }

    fn load_into(&mut self, path: &Path, depth: usize) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("cannot read: {e}"),
        })?;
        self.parse_into(&text, path, depth)
    }

    fn parse_into(&mut self, text: &str, path: &Path, depth: usize) -> Result<()> {
        let err = |line: usize, msg: String| Error::Config { path: path.to_path_buf(), line, msg };
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("include") {
                if rest.starts_with(char::is_whitespace) {
                    if depth >= MAX_INCLUDE_DEPTH {
                        return Err(err(lineno, "include nesting too deep".into()));
                    }
                    let target = rest.trim();
                    let resolved = path.parent().map(|p| p.join(target)).unwrap_or_else(|| PathBuf::from(target));
                    self.load_into(&resolved, depth + 1)?;
                    continue;
                }
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(lineno, format!("expected `key = value`, got `{line}`")));
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(err(lineno, format!("bad key `{key}`")));
            }
            self.entries.insert(key.to_string(), Entry { value: value.trim().to_string(), path: path.to_path_buf(), line: lineno });
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), Entry { value: value.to_string(), path: PathBuf::from("<override>"), line: 0 });
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| Error::Config {
                path: e.path.clone(),
                line: e.line,
                msg: format!("key `{key}`: cannot parse `{}`: {err}", e.value),
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    /// Resolve a path-valued key relative to the file that defined it.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.entries.get(key).map(|e| {
            let p = PathBuf::from(&e.value);
            if p.is_absolute() {
                p
            } else {
                e.path.parent().map(|d| d.join(&p)).unwrap_or(p)
            }
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), e.value.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let cfg = Config::parse_str("gamma = 0.4 # rate\n\n# full comment\ntau=1\ngamma = 0.5\n", "mem").unwrap();
        assert_eq!(cfg.require::<f64>("gamma").unwrap(), 0.5);
        assert_eq!(cfg.require::<f64>("tau").unwrap(), 1.0);
        assert!(cfg.get::<f64>("epsilon").unwrap().is_none());
    }

    #[test]
    fn reports_line_of_bad_value() {
        let cfg = Config::parse_str("gamma = 0.4\ntau = abc\n", "x.cfg").unwrap();
        let err = cfg.require::<f64>("tau").unwrap_err().to_string();
        assert!(err.contains("x.cfg:2"), "{err}");
    }

    #[test]
    fn rejects_missing_equals() {
        let err = Config::parse_str("gamma 0.4\n", "x.cfg").unwrap_err().to_string();
        assert!(err.contains(":1:"), "{err}");
    }

    #[test]
    fn include_is_relative_to_including_file() {
        let dir = std::env::temp_dir().join(format!("cmnoise-cfg-{}", std::process::id()));
        std::fs::create_dir_all(dir.join("sub")).unwrap();
        std::fs::write(dir.join("sub/base.cfg"), "gamma = 0.4\ntau = 1\n").unwrap();
        std::fs::write(dir.join("run.cfg"), "include sub/base.cfg\ntau = 2\n").unwrap();
        let cfg = Config::load(dir.join("run.cfg")).unwrap();
        assert_eq!(cfg.require::<f64>("gamma").unwrap(), 0.4);
        assert_eq!(cfg.require::<f64>("tau").unwrap(), 2.0);
        std::fs::remove_dir_all(&dir).ok();
    }
}
