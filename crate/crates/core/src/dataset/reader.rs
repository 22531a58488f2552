//! Streaming reader for KDD-format text.
//!
//! One record per line, comma separated, 41 features followed by the label.
//! The label's trailing `.` is stripped. Gzip input is detected by its magic
//! bytes and decompressed on the fly.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use thiserror::Error;

use super::schema::{ColumnKind, FeatureSchema};

const READ_BUFFER: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount { line: u64, expected: usize, found: usize },
    #[error("line {line}: column `{column}` is not a number: `{text}`")]
    Numeric { line: u64, column: String, text: String },
    #[error("line {line}: column `{column}` value {value} is out of range")]
    OutOfRange { line: u64, column: String, value: f64 },
    #[error("line {line}: empty label")]
    EmptyLabel { line: u64 },
    #[error("read error: {0}")]
    Io(#[from] io::Error),
}

impl RecordError {
    pub fn line(&self) -> Option<u64> {
        match self {
            RecordError::FieldCount { line, .. }
            | RecordError::Numeric { line, .. }
            | RecordError::OutOfRange { line, .. }
            | RecordError::EmptyLabel { line } => Some(*line),
            RecordError::Io(_) => None,
        }
    }
}

/// One parsed connection.
///
/// `values` holds one entry per schema column. Nominal columns store the
/// symbol index (an exact small integer) so trees can read every column
/// through the same slice.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConnectionRecord {
    pub values: Vec<f64>,
    pub label: String,
}

impl ConnectionRecord {
    pub fn nominal(&self, col: usize) -> u32 {
        self.values[col] as u32
    }

    /// Render as a KDD text line (without newline). UNSEEN symbols are
    /// written as `<unseen>`, which parses back to UNSEEN.
    pub fn to_kdd_line(&self, schema: &FeatureSchema) -> String {
        let mut out = String::with_capacity(128);
        for (col, value) in self.values.iter().enumerate() {
            match &schema.column(col).kind {
                ColumnKind::Numeric => out.push_str(&format!("{value}")),
                ColumnKind::Nominal(domain) => {
                    out.push_str(domain.get(*value as usize).map_or("<unseen>", String::as_str))
                }
            }
            out.push(',');
        }
        out.push_str(&self.label);
        out.push('.');
        out
    }
}

/// Open a file, transparently decompressing gzip.
pub fn open_source(path: impl AsRef<Path>) -> io::Result<Box<dyn BufRead + Send>> {
    let file = File::open(path)?;
    Ok(wrap_source(file)?)
}

/// Wrap any byte stream, transparently decompressing gzip.
pub fn wrap_source<R: Read + Send + 'static>(source: R) -> io::Result<Box<dyn BufRead + Send>> {
    let mut buffered = BufReader::with_capacity(READ_BUFFER, source);
    let head = buffered.fill_buf()?;
    if head.len() >= 2 && head[0] == 0x1f && head[1] == 0x8b {
        Ok(Box::new(BufReader::with_capacity(READ_BUFFER, MultiGzDecoder::new(buffered))))
    } else {
        Ok(Box::new(buffered))
    }
}

pub struct RecordReader<'s, R> {
    source: R,
    schema: &'s FeatureSchema,
    line: u64,
    buf: Vec<u8>,
    unseen: u64,
}

impl<'s, R: BufRead> RecordReader<'s, R> {
    pub fn new(source: R, schema: &'s FeatureSchema) -> Self {
        Self { source, schema, line: 0, buf: Vec::with_capacity(256), unseen: 0 }
    }

    /// Number of nominal values seen so far that fell outside their domain.
    pub fn unseen_count(&self) -> u64 {
        self.unseen
    }

    /// Lines consumed so far, including blank and failed ones.
    pub fn lines_read(&self) -> u64 {
        self.line
    }

    /// Parse the next record into `record`, reusing its allocations.
    /// Returns `None` at end of input. Blank lines are skipped.
    pub fn read_into(&mut self, record: &mut ConnectionRecord) -> Option<Result<(), RecordError>> {
        loop {
            self.buf.clear();
            match self.source.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line += 1;
            let mut end = self.buf.len();
            while end > 0 && matches!(self.buf[end - 1], b'\n' | b'\r') {
                end -= 1;
            }
            if end == 0 {
                continue;
            }
            let line = self.line;
            let (buf, schema) = (&self.buf[..end], self.schema);
            return Some(parse_line(buf, line, schema, record, &mut self.unseen));
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<'_, R> {
    type Item = Result<ConnectionRecord, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut record = ConnectionRecord::default();
        self.read_into(&mut record).map(|r| r.map(|()| record))
    }
}

/// Stream records from `source` in file order.
pub fn parse_records<R: BufRead>(source: R, schema: &FeatureSchema) -> RecordReader<'_, R> {
    RecordReader::new(source, schema)
}

fn parse_line(
    line: &[u8],
    line_no: u64,
    schema: &FeatureSchema,
    record: &mut ConnectionRecord,
    unseen: &mut u64,
) -> Result<(), RecordError> {
    let expected = schema.len() + 1;
    record.values.clear();
    let mut fields = line.split(|b| *b == b',');
    for col in 0..schema.len() {
        let Some(field) = fields.next() else {
            return Err(RecordError::FieldCount { line: line_no, expected, found: col });
        };
        let column = schema.column(col);
        let value = match &column.kind {
            ColumnKind::Numeric => {
                let v = parse_number(field).ok_or_else(|| RecordError::Numeric {
                    line: line_no,
                    column: column.name.clone(),
                    text: String::from_utf8_lossy(field).into_owned(),
                })?;
                if v < 0.0 || (v > 1.0 && column.is_rate()) {
                    return Err(RecordError::OutOfRange {
                        line: line_no,
                        column: column.name.clone(),
                        value: v,
                    });
                }
                v
            }
            ColumnKind::Nominal(domain) => {
                let symbol = std::str::from_utf8(field).unwrap_or("");
                let idx = schema.symbol_index(col, symbol).unwrap_or(domain.len() as u32);
                if idx as usize == domain.len() {
                    *unseen += 1;
                    log::debug!("line {line_no}: unseen symbol `{symbol}` in `{}`", column.name);
                }
                idx as f64
            }
        };
        record.values.push(value);
    }
    let label = fields.next().ok_or(RecordError::FieldCount {
        line: line_no,
        expected,
        found: schema.len(),
    })?;
    let extra = fields.count();
    if extra > 0 {
        return Err(RecordError::FieldCount { line: line_no, expected, found: expected + extra });
    }
    let label = label.strip_suffix(b".").unwrap_or(label);
    let label = std::str::from_utf8(label).unwrap_or("").trim();
    if label.is_empty() {
        return Err(RecordError::EmptyLabel { line: line_no });
    }
    record.label.clear();
    record.label.push_str(label);
    Ok(())
}

const POW10: [f64; 23] = [
    1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12, 1e13, 1e14, 1e15, 1e16,
    1e17, 1e18, 1e19, 1e20, 1e21, 1e22,
];

/// Decimal parsing with an exact fast path for `digits[.digits]` of at most
/// 15 significant digits: the mantissa and the power of ten are both exact
/// doubles, so one IEEE division gives the correctly rounded result. Anything
/// else falls back to the standard library parser.
fn parse_number(field: &[u8]) -> Option<f64> {
    let mut mantissa: u64 = 0;
    let mut digits = 0usize;
    let mut frac_digits = 0usize;
    let mut seen_dot = false;
    for &b in field {
        match b {
            b'0'..=b'9' => {
                mantissa = mantissa.wrapping_mul(10).wrapping_add((b - b'0') as u64);
                digits += 1;
                if seen_dot {
                    frac_digits += 1;
                }
            }
            b'.' if !seen_dot => seen_dot = true,
            _ => return parse_slow(field),
        }
    }
    if digits == 0 || digits > 15 {
        return parse_slow(field);
    }
    Some(mantissa as f64 / POW10[frac_digits])
}

fn parse_slow(field: &[u8]) -> Option<f64> {
    let text = std::str::from_utf8(field).ok()?.trim();
    let v: f64 = text.parse().ok()?;
    v.is_finite().then_some(v)
}
