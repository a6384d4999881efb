//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are skipped. Keys may not repeat.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    path: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected `key = value`, found {line:?}"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    msg: "empty key".into(),
                });
            }
            if entries.insert(key.clone(), (idx + 1, value.trim().to_string())).is_some() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    msg: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(ConfigFile {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Parsed value of `key`, if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Parse {
                path: self.path.clone(),
                line: *line,
                msg: format!("bad value {v:?} for {key}"),
            }),
        }
    }

    /// Comma-separated list value of `key`, if present.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|t| t.trim())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse().map_err(|_| Error::Parse {
                        path: self.path.clone(),
                        line: *line,
                        msg: format!("bad list item {t:?} for {key}"),
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Fails on the first key outside `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        for (key, (line, _)) in &self.entries {
            if !known.contains(&key.as_str()) {
                return Err(Error::Parse {
                    path: self.path.clone(),
                    line: *line,
                    msg: format!("unknown key {key:?}"),
                });
            }
        }
        Ok(())
    }
}

/// Parses lists like `1e4,2e4` or `10000` as counts.
pub fn parse_count(s: &str) -> Result<usize> {
    let s = s.trim();
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x <= 2f64.powi(52) => Ok(x as usize),
        _ => Err(Error::invalid(format!("{s:?} is not a count"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_types() {
        let text = "# sweep\nd = 50\nms = 1e4, 2e4\n\nlr=0.01\n";
        let c = ConfigFile::parse(text, Path::new("c.cfg")).unwrap();
        assert_eq!(c.get::<usize>("d").unwrap(), Some(50));
        assert_eq!(c.get::<f64>("lr").unwrap(), Some(0.01));
        assert_eq!(c.get::<usize>("missing").unwrap(), None);
        assert_eq!(c.get_list::<f64>("ms").unwrap(), Some(vec![1e4, 2e4]));
        assert!(c.check_keys(&["d", "ms", "lr"]).is_ok());
        let err = c.check_keys(&["d", "ms"]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn parse_errors_carry_lines() {
        let p = Path::new("c.cfg");
        assert!(matches!(ConfigFile::parse("a = 1\nnonsense\n", p), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(ConfigFile::parse("a = 1\na = 2\n", p), Err(Error::Parse { line: 2, .. })));
        let c = ConfigFile::parse("d = fifty\n", p).unwrap();
        assert!(matches!(c.get::<usize>("d"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn counts() {
        assert_eq!(parse_count("1e6").unwrap(), 1_000_000);
        assert_eq!(parse_count("25").unwrap(), 25);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-2").is_err());
    }
}
