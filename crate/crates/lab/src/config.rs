//! Flat `key = value` files with `[section]` headers.
//!
//! Keys before the first header live in the unnamed section `""`. `#` and `;`
//! start comments when they begin a line or follow whitespace. Values are
//! raw text; typed access goes through [`Section`] getters, whose errors
//! name the offending `section.key`.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::LabError;

/// One `[section]` of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    name: String,
    entries: BTreeMap<String, (usize, String)>,
}

/// Parsed config file: sections by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    sections: BTreeMap<String, Section>,
}

fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        if (*b == b'#' || *b == b';') && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

impl RawConfig {
    /// Parses config text. Duplicate keys and malformed lines are errors.
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let mut cfg = RawConfig::default();
        let mut current = String::new();
        cfg.sections.insert(current.clone(), Section { name: current.clone(), ..Section::default() });
        for (no, raw) in text.lines().enumerate() {
            let line_no = no + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(LabError::Validation(format!("line {line_no}: unterminated section header")));
                };
                let name = name.trim().to_string();
                if name.is_empty() || cfg.sections.contains_key(&name) {
                    return Err(LabError::Validation(format!("line {line_no}: empty or repeated section `{name}`")));
                }
                cfg.sections.insert(name.clone(), Section { name: name.clone(), ..Section::default() });
                current = name;
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(LabError::Validation(format!("line {line_no}: expected `key = value`")));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(LabError::Validation(format!("line {line_no}: empty key")));
            }
            let section = cfg.sections.get_mut(&current).expect("current section exists");
            if section.entries.insert(key.clone(), (line_no, value.trim().to_string())).is_some() {
                return Err(LabError::Validation(format!("line {line_no}: repeated key `{}`", section.qualify(&key))));
            }
        }
        Ok(cfg)
    }

    /// Section by name; missing sections read as empty.
    pub fn section(&self, name: &str) -> Section {
        self.sections.get(name).cloned().unwrap_or_else(|| Section { name: name.to_string(), ..Section::default() })
    }

    /// Whether the section is present and has at least one key.
    pub fn has_section(&self, name: &str) -> bool {
        self.sections.get(name).is_some_and(|s| !s.entries.is_empty())
    }

    /// Names of sections that have keys.
    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.values().filter(|s| !s.entries.is_empty()).map(|s| s.name.as_str())
    }
}

impl Section {
    /// `section.key`, or just `key` in the unnamed section.
    pub fn qualify(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    /// Keys in sorted order.
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Raw text of a key.
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn missing(&self, key: &str) -> LabError {
        LabError::Validation(format!("missing required field `{}`", self.qualify(key)))
    }

    fn bad(&self, key: &str, why: impl std::fmt::Display) -> LabError {
        let line = self.entries.get(key).map(|(l, _)| *l).unwrap_or(0);
        LabError::Validation(format!("line {line}: field `{}`: {why}", self.qualify(key)))
    }

    /// Optional scalar.
    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, LabError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| self.bad(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    /// Required scalar.
    pub fn req<T: FromStr>(&self, key: &str) -> Result<T, LabError>
    where
        T::Err: std::fmt::Display,
    {
        self.opt(key)?.ok_or_else(|| self.missing(key))
    }

    /// Optional scalar with a default.
    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, LabError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    /// Optional comma-separated list.
    pub fn opt_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, LabError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|s| s.trim().parse::<T>().map_err(|e| self.bad(key, format!("cannot parse `{}`: {e}", s.trim()))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// Required comma-separated list.
    pub fn req_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, LabError>
    where
        T::Err: std::fmt::Display,
    {
        self.opt_list(key)?.ok_or_else(|| self.missing(key))
    }

    /// Optional list of points: `x1, x2; y1, y2; ...`.
    pub fn opt_points(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>, LabError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let mut out = Vec::new();
        for chunk in v.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let point = chunk
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| self.bad(key, format!("cannot parse `{}`: {e}", s.trim()))))
                .collect::<Result<Vec<_>, _>>()?;
            out.push(point);
        }
        Ok(Some(out))
    }

    /// Validation error about a present key.
    pub fn invalid(&self, key: &str, why: impl std::fmt::Display) -> LabError {
        self.bad(key, why)
    }
}
