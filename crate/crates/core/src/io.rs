// SPDX-License-Identifier: MIT OR Apache-2.0

//! Text input: numeric series from CSV and interval lists from JSON.

use serde::Deserialize;

use crate::error::{LbdError, Result};
use crate::intervals::ClosedInterval;

/// Which CSV field holds the series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    /// 0-based field index.
    Index(usize),
    /// Header name; requires a header row.
    Name(String),
}

impl Column {
    /// Digits select by index, anything else by name.
    pub fn parse(spec: &str) -> Column {
        match spec.trim().parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(spec.trim().to_string()),
        }
    }
}

/// A parsed series and the 1-based input line of each value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub values: Vec<f64>,
    pub lines: Vec<usize>,
    pub header: Option<Vec<String>>,
}

impl Series {
    /// Input line of the value at `index`.
    pub fn line_of(&self, index: usize) -> Option<usize> {
        self.lines.get(index).copied()
    }

    /// Rewrites a data error on a value index into a parse error on its
    /// input line.
    pub fn locate(&self, err: LbdError) -> LbdError {
        match err {
            LbdError::InvalidData { index, reason } => match self.line_of(index) {
                Some(line) => LbdError::Parse { line, message: reason },
                None => LbdError::InvalidData { index, reason },
            },
            other => other,
        }
    }
}

struct LineCounter<'a> {
    bytes: &'a [u8],
    offset: usize,
    line: usize,
}

impl<'a> LineCounter<'a> {
    fn new(text: &'a str) -> Self {
        LineCounter {
            bytes: text.as_bytes(),
            offset: 0,
            line: 1,
        }
    }

    /// 1-based line of the first record content at or after `byte`;
    /// offsets must not decrease between calls.
    fn line_at(&mut self, byte: usize) -> usize {
        let mut end = byte.min(self.bytes.len());
        // a record's start may precede the blank or comment lines skipped
        // before it
        while end < self.bytes.len() {
            match self.bytes[end] {
                b'\n' | b'\r' => end += 1,
                b'#' => {
                    while end < self.bytes.len() && !matches!(self.bytes[end], b'\n' | b'\r') {
                        end += 1;
                    }
                }
                _ => break,
            }
        }
        if end > self.offset {
            // \n, \r\n and a lone \r each end a line
            let bytes = self.bytes;
            self.line += (self.offset..end)
                .filter(|&i| bytes[i] == b'\n' || (bytes[i] == b'\r' && bytes.get(i + 1) != Some(&b'\n')))
                .count();
            self.offset = end;
        }
        self.line
    }
}

fn parse_number(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok()
}

/// Parses one numeric series from CSV text.
///
/// A first row whose selected field is not a number is taken as a header.
/// Blank lines and lines starting with `#` are skipped. Without `column`, every row must have a single
/// field.
pub fn parse_series_csv(text: &str, column: Option<&Column>) -> Result<Series> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Series::default();
    let mut index: Option<usize> = match column {
        Some(Column::Index(i)) => Some(*i),
        _ => None,
    };
    let mut first = true;
    // the reader's own line counter skips blank lines, so count newlines
    let mut lines = LineCounter::new(text);
    for record in reader.records() {
        let record = record.map_err(|e| LbdError::Parse {
            line: e.position().map_or(0, |p| lines.line_at(p.byte() as usize)),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| lines.line_at(p.byte() as usize));
        if record.iter().all(str::is_empty) {
            continue;
        }
        if first {
            first = false;
            let names: Vec<String> = record.iter().map(str::to_string).collect();
            let looks_like_header = match column {
                Some(Column::Name(name)) => {
                    let pos = names.iter().position(|h| h == name).ok_or_else(|| LbdError::Parse {
                        line,
                        message: format!("no column named {name:?} in header"),
                    })?;
                    index = Some(pos);
                    true
                }
                _ => {
                    let i = index.unwrap_or(0);
                    names.get(i).is_some_and(|f| parse_number(f).is_none())
                }
            };
            if looks_like_header {
                out.header = Some(names);
                continue;
            }
        }
        let field = match index {
            Some(i) => record.get(i).ok_or_else(|| LbdError::Parse {
                line,
                message: format!("row has {} fields, column {i} requested", record.len()),
            })?,
            None if record.len() == 1 => &record[0],
            None => {
                return Err(LbdError::Parse {
                    line,
                    message: format!("row has {} fields; select one with a column", record.len()),
                })
            }
        };
        let value = parse_number(field).ok_or_else(|| LbdError::Parse {
            line,
            message: format!("not a number: {field:?}"),
        })?;
        if !value.is_finite() {
            return Err(LbdError::Parse {
                line,
                message: format!("non-finite value {field:?}"),
            });
        }
        out.values.push(value);
        out.lines.push(line);
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IntervalRepr {
    Pair([i64; 2]),
    Object { lo: i64, hi: i64 },
}

/// Parses a JSON array of intervals, each either `[lo, hi]` or
/// `{"lo": .., "hi": ..}`.
pub fn parse_interval_list(text: &str) -> Result<Vec<ClosedInterval>> {
    let raw: Vec<IntervalRepr> = serde_json::from_str(text).map_err(|e| LbdError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let (lo, hi) = match r {
                IntervalRepr::Pair([lo, hi]) => (lo, hi),
                IntervalRepr::Object { lo, hi } => (lo, hi),
            };
            ClosedInterval::new(lo, hi).map_err(|_| LbdError::InvalidData {
                index: i,
                reason: format!("interval [{lo}, {hi}] has lo > hi"),
            })
        })
        .collect()
}
