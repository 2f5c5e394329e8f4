//! Plain-text run configuration.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! ```
//!
//! Keys before the first header belong to the unnamed section `""`. Every key
//! must be read by the command that loads the file; leftovers are reported as
//! unknown and fail the run.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<(String, String), (String, usize)>,
    used: std::cell::RefCell<std::collections::BTreeSet<(String, String)>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {line_no}: unterminated section header")))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            let key = (section.clone(), k.trim().to_string());
            if key.1.is_empty() {
                return Err(Error::Config(format!("line {line_no}: empty key")));
            }
            if entries.insert(key.clone(), (v.trim().to_string(), line_no)).is_some() {
                return Err(Error::Config(format!("line {line_no}: duplicate key `{}`", display_key(&key))));
            }
        }
        Ok(Self {
            entries,
            used: Default::default(),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Raw value of `section.key`, marking it as used.
    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        let k = (section.to_string(), key.to_string());
        let v = self.entries.get(&k)?;
        self.used.borrow_mut().insert(k);
        Some(&v.0)
    }

    pub fn get<T>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| {
                let line = self.entries[&(section.to_string(), key.to_string())].1;
                Error::Config(format!("line {line}: bad value `{v}` for {section}.{key}: {e}"))
            }),
        }
    }

    pub fn get_or<T>(&self, section: &str, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn flag(&self, section: &str, key: &str) -> Result<bool> {
        match self.raw(section, key) {
            None => Ok(false),
            Some("true" | "yes" | "1" | "on") => Ok(true),
            Some("false" | "no" | "0" | "off") => Ok(false),
            Some(other) => Err(Error::Config(format!("{section}.{key}: expected a boolean, got `{other}`"))),
        }
    }

    /// Comma-separated list.
    pub fn list<T>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(v) = self.raw(section, key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|e| Error::Config(format!("{section}.{key}: bad item `{}`: {e}", s.trim())))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Extents written as `AxBxC`.
    pub fn extents(&self, section: &str, key: &str) -> Result<Option<Vec<usize>>> {
        let Some(v) = self.raw(section, key) else {
            return Ok(None);
        };
        v.split('x')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| Error::Config(format!("{section}.{key}: bad extents `{v}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Fails on any key nobody asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<String> = self
            .entries
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .map(|(k, (_, line))| format!("{} (line {line})", display_key(k)))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }

    /// Canonical snapshot: sections in order, keys sorted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current: Option<&str> = None;
        for ((section, key), (value, _)) in &self.entries {
            if current != Some(section.as_str()) {
                if !section.is_empty() {
                    if !out.is_empty() {
                        out.push('\n');
                    }
                    out += &format!("[{section}]\n");
                }
                current = Some(section);
            }
            out += &format!("{key} = {value}\n");
        }
        out
    }

    /// Overrides or inserts a value (command-line flags win over the file).
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.entries.insert((section.into(), key.into()), (value.into(), 0));
    }
}

fn display_key((s, k): &(String, String)) -> String {
    if s.is_empty() {
        k.clone()
    } else {
        format!("{s}.{k}")
    }
}
