//! Shared plumbing for the line-oriented model formats.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Reads a file as UTF-8, replacing invalid sequences.
///
/// Returns the text and the number of invalid byte sequences replaced.
pub(crate) fn read_lossy(path: &Path) -> Result<(String, usize)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let invalid = bytes
        .utf8_chunks()
        .filter(|chunk| !chunk.invalid().is_empty())
        .count();
    Ok((String::from_utf8_lossy(&bytes).into_owned(), invalid))
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Shortest decimal text that parses back to the same `f64`.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub(crate) fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

/// Cursor over the lines of a model file.
pub(crate) struct Lines<'a> {
    format: &'static str,
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(format: &'static str, text: &'a str) -> Self {
        Lines {
            format,
            lines: text.lines(),
            line_no: 0,
        }
    }

    pub(crate) fn err(&self, message: impl Into<String>) -> Error {
        Error::format(self.format, self.line_no, message)
    }

    pub(crate) fn next_line(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        self.lines
            .next()
            .ok_or_else(|| Error::format(self.format, self.line_no, "unexpected end of file"))
    }

    pub(crate) fn expect(&mut self, exact: &str) -> Result<()> {
        let line = self.next_line()?;
        if line != exact {
            return Err(self.err(format!("expected {exact:?}, found {line:?}")));
        }
        Ok(())
    }

    /// Reads a `key value` line and returns the value text.
    pub(crate) fn field(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(self.err(format!("expected field {key:?}, found {line:?}"))),
        }
    }

    pub(crate) fn parsed<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let value = self.field(key)?;
        value
            .parse()
            .map_err(|_| self.err(format!("cannot parse value {value:?} for {key:?}")))
    }

    pub(crate) fn parse<T: FromStr>(&self, token: &str) -> Result<T> {
        token
            .parse()
            .map_err(|_| self.err(format!("cannot parse {token:?}")))
    }

    pub(crate) fn floats(&mut self, expected: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let values = line
            .split_ascii_whitespace()
            .map(|t| self.parse::<f64>(t))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != expected {
            return Err(self.err(format!(
                "expected {expected} values, found {}",
                values.len()
            )));
        }
        Ok(values)
    }
}
