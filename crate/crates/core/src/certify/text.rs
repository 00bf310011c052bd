//! Sectioned plain-text format shared by certificate and problem files.
//!
//! ```text
//! # comment
//! [plant]
//! A = [
//!   -0.0304  0.0187
//!    0      -0.0187
//! ]
//! C = [1 0]
//! [reference]
//! kind = sinusoid
//! omega = 1
//! ```
//!
//! A section holds `key = value` entries. A value is a list of words on the
//! same line, a one-row matrix in brackets, or a bracketed block with one
//! matrix row per line. Numbers are written with Rust's shortest round-trip
//! formatting, so reading a written file reproduces every bit.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numlin::Matrix;

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

fn number(tok: &str, line: usize) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => err(line, format!("non-finite number '{tok}'")),
        Err(_) => err(line, format!("expected a number, found '{tok}'")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Words(Vec<String>),
    /// Matrix rows with the line each one came from.
    Rows(Vec<(usize, Vec<f64>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub line: usize,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub sections: Vec<Section>,
    /// Number of lines in the source, used to anchor "missing" diagnostics.
    pub last_line: usize,
}

pub fn parse(src: &str) -> Result<Document> {
    let mut sections: Vec<Section> = Vec::new();
    let mut open: Option<(String, usize, Vec<(usize, Vec<f64>)>)> = None;
    let mut last_line = 0;
    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let text = raw.split('#').next().unwrap_or("").trim();

        if let Some((_, _, rows)) = open.as_mut() {
            if text.is_empty() {
                continue;
            }
            let (body, closes) = match text.strip_suffix(']') {
                Some(b) => (b.trim(), true),
                None => (text, false),
            };
            if !body.is_empty() {
                let row = body.split_whitespace().map(|t| number(t, line)).collect::<Result<Vec<_>>>()?;
                if let Some((_, first)) = rows.first() {
                    if first.len() != row.len() {
                        return err(line, format!("row has {} entries, expected {}", row.len(), first.len()));
                    }
                }
                rows.push((line, row));
            }
            if closes {
                let (key, start, rows) = open.take().expect("open block");
                if rows.is_empty() {
                    return err(start, format!("matrix '{key}' has no rows"));
                }
                let sec = sections.last_mut().expect("blocks only open inside sections");
                sec.entries.push(Entry { key, line: start, value: Value::Rows(rows) });
            }
            continue;
        }

        if text.is_empty() {
            continue;
        }
        if let Some(name) = text.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            let name = name.trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return err(line, format!("bad section header '{text}'"));
            }
            if sections.iter().any(|s| s.name == name) {
                return err(line, format!("duplicate section [{name}]"));
            }
            sections.push(Section { name: name.to_string(), line, entries: Vec::new() });
            continue;
        }
        let Some((key, rest)) = text.split_once('=') else {
            return err(line, format!("expected 'key = value', found '{text}'"));
        };
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return err(line, format!("bad key '{key}'"));
        }
        let Some(sec) = sections.last_mut() else {
            return err(line, "entry outside of any section");
        };
        if sec.entries.iter().any(|e| e.key == key) {
            return err(line, format!("duplicate key '{key}' in [{}]", sec.name));
        }
        let rest = rest.trim();
        if let Some(inner) = rest.strip_prefix('[') {
            let inner = inner.trim();
            if let Some(row) = inner.strip_suffix(']') {
                let row = row.split_whitespace().map(|t| number(t, line)).collect::<Result<Vec<_>>>()?;
                if row.is_empty() {
                    return err(line, format!("matrix '{key}' has no entries"));
                }
                sec.entries.push(Entry { key: key.to_string(), line, value: Value::Rows(vec![(line, row)]) });
            } else if inner.is_empty() {
                open = Some((key.to_string(), line, Vec::new()));
            } else {
                return err(line, "a matrix block starts with '[' alone on the line");
            }
        } else {
            let words: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            if words.is_empty() {
                return err(line, format!("key '{key}' has no value"));
            }
            sec.entries.push(Entry { key: key.to_string(), line, value: Value::Words(words) });
        }
    }
    if let Some((key, start, _)) = open {
        return err(start, format!("matrix '{key}' is never closed"));
    }
    Ok(Document { sections, last_line })
}

impl Document {
    pub fn get(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn section(&self, name: &str) -> Result<&Section> {
        self.get(name).map_or_else(|| err(self.last_line, format!("missing section [{name}]")), Ok)
    }
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn entry(&self, key: &str) -> Result<&Entry> {
        self.get(key).map_or_else(|| err(self.line, format!("[{}] is missing '{key}'", self.name)), Ok)
    }

    pub fn matrix(&self, key: &str) -> Result<Matrix> {
        self.entry(key)?.matrix()
    }

    pub fn floats(&self, key: &str) -> Result<Vec<f64>> {
        self.entry(key)?.floats()
    }

    pub fn scalar(&self, key: &str) -> Result<f64> {
        self.entry(key)?.scalar()
    }

    pub fn word(&self, key: &str) -> Result<&str> {
        self.entry(key)?.word()
    }

    pub fn count(&self, key: &str) -> Result<usize> {
        self.entry(key)?.count()
    }

    /// Rejects keys outside `known`, catching typos in hand-written files.
    pub fn only(&self, known: &[&str]) -> Result<()> {
        match self.entries.iter().find(|e| !known.contains(&e.key.as_str())) {
            Some(e) => err(e.line, format!("unknown key '{}' in [{}]", e.key, self.name)),
            None => Ok(()),
        }
    }
}

impl Entry {
    pub fn matrix(&self) -> Result<Matrix> {
        match &self.value {
            Value::Rows(rows) => {
                let cols = rows[0].1.len();
                Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i].1[j]))
            }
            Value::Words(_) => err(self.line, format!("'{}' must be a bracketed matrix", self.key)),
        }
    }

    pub fn floats(&self) -> Result<Vec<f64>> {
        match &self.value {
            Value::Words(w) => w.iter().map(|t| number(t, self.line)).collect(),
            Value::Rows(rows) if rows.len() == 1 => Ok(rows[0].1.clone()),
            Value::Rows(_) => err(self.line, format!("'{}' must be a list of numbers", self.key)),
        }
    }

    pub fn scalar(&self) -> Result<f64> {
        match self.floats()?.as_slice() {
            [v] => Ok(*v),
            other => err(self.line, format!("'{}' takes one number, got {}", self.key, other.len())),
        }
    }

    pub fn word(&self) -> Result<&str> {
        match &self.value {
            Value::Words(w) if w.len() == 1 => Ok(&w[0]),
            _ => err(self.line, format!("'{}' takes a single word", self.key)),
        }
    }

    pub fn count(&self) -> Result<usize> {
        let w = self.word()?;
        w.parse().or_else(|_| err(self.line, format!("'{}' must be a nonnegative integer, got '{w}'", self.key)))
    }
}

/// Builds a document in the format [`parse`] reads.
#[derive(Debug, Default, Clone)]
pub struct Writer {
    out: String,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        for line in text.lines() {
            let _ = writeln!(self.out, "# {line}");
        }
        self
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        if !self.out.is_empty() {
            self.out.push('\n');
        }
        let _ = writeln!(self.out, "[{name}]");
        self
    }

    pub fn word(&mut self, key: &str, value: &str) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {value}");
        self
    }

    pub fn floats(&mut self, key: &str, values: &[f64]) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {}", join(values));
        self
    }

    pub fn matrix(&mut self, key: &str, m: &Matrix) -> &mut Self {
        let _ = writeln!(self.out, "{key} = [");
        for i in 0..m.nrows() {
            let row: Vec<f64> = m.row(i).iter().copied().collect();
            let _ = writeln!(self.out, "  {}", join(&row));
        }
        self.out.push_str("]\n");
        self
    }

    pub fn finish(&self) -> String {
        self.out.clone()
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
}
