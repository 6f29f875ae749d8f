//! Line-oriented `[section label]` / `key = value` text shared by the grid,
//! cost, injection and solution files.
//!
//! `#` starts a comment anywhere on a line. Keys are unique within a section.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub kind: String,
    pub label: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.get(key).map(|e| e.value.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<f64>().map(Some).map_err(|_| Error::Syntax {
                line: e.line,
                msg: format!("field `{}`: expected a number, got `{}`", key, e.value),
            }),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.get_f64(key)?.ok_or_else(|| Error::Syntax {
            line: self.line,
            msg: format!("[{}] is missing required field `{}`", self.header(), key),
        })
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => match e.value.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                other => Err(Error::Syntax {
                    line: e.line,
                    msg: format!("field `{key}`: expected true/false, got `{other}`"),
                }),
            },
        }
    }

    /// Rejects keys outside `allowed`, which catches typos in hand-edited files.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(Error::Syntax {
                    line: e.line,
                    msg: format!("unknown field `{}` in [{}]", e.key, self.header()),
                });
            }
        }
        Ok(())
    }

    pub fn header(&self) -> String {
        match &self.label {
            Some(l) => format!("{} {}", self.kind, l),
            None => self.kind.clone(),
        }
    }
}

pub fn parse(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
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
        if let Some(rest) = content.strip_prefix('[') {
            let inner = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Syntax { line, msg: format!("unterminated section header `{content}`") })?;
            let mut parts = inner.split_whitespace();
            let kind =
                parts.next().ok_or_else(|| Error::Syntax { line, msg: "empty section header".into() })?.to_string();
            let label = parts.next().map(str::to_string);
            if parts.next().is_some() {
                return Err(Error::Syntax { line, msg: format!("section header `{content}` has more than one label") });
            }
            sections.push(Section { kind, label, line, entries: Vec::new() });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Syntax { line, msg: format!("expected `key = value`, got `{content}`") })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::Syntax { line, msg: "empty key".into() });
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| Error::Syntax { line, msg: format!("field `{key}` appears before any section") })?;
        if section.get(key).is_some() {
            return Err(Error::Syntax { line, msg: format!("duplicate field `{}` in [{}]", key, section.header()) });
        }
        section.entries.push(Entry { key: key.to_string(), value: value.to_string(), line });
    }
    Ok(sections)
}

/// Incremental writer producing text that [`parse`] reads back.
#[derive(Default)]
pub struct Writer {
    out: String,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        for l in text.lines() {
            let _ = writeln!(self.out, "# {l}");
        }
        self
    }

    pub fn section(&mut self, kind: &str, label: Option<&str>) -> &mut Self {
        if !self.out.is_empty() {
            self.out.push('\n');
        }
        match label {
            Some(l) => {
                let _ = writeln!(self.out, "[{kind} {l}]");
            }
            None => {
                let _ = writeln!(self.out, "[{kind}]");
            }
        }
        self
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {value}");
        self
    }

    pub fn finish(self) -> String {
        self.out
    }
}
