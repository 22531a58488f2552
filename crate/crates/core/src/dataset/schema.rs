//! Column layout of a KDD-format file.
//!
//! The schema is data rather than code: a plain-text file with one column per
//! line, `<name>,<numeric|nominal>[,<symbol>;<symbol>;...]`. Blank lines and
//! lines starting with `#` are ignored. The label column is implicit and
//! always follows the last feature column.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Number of feature columns in a KDD Cup 99 record.
pub const FEATURE_COUNT: usize = 41;

const KDD99_SCHEMA: &str = include_str!("../../data/kdd99.schema");

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema declares {found} feature columns, expected {expected}")]
    Arity { found: usize, expected: usize },
    #[error("schema line {line}: duplicate column name `{name}`")]
    DuplicateColumn { line: usize, name: String },
    #[error("schema line {line}: nominal column `{name}` has an empty domain")]
    EmptyDomain { line: usize, name: String },
    #[error("cannot read schema: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    /// Declared symbols, in file order. Index `domain.len()` is reserved for
    /// symbols outside the declared domain.
    Nominal(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    /// Rate columns (`*_rate`) must lie in `[0, 1]`.
    pub fn is_rate(&self) -> bool {
        matches!(self.kind, ColumnKind::Numeric) && self.name.ends_with("_rate")
    }

    pub fn is_nominal(&self) -> bool {
        matches!(self.kind, ColumnKind::Nominal(_))
    }
}

#[derive(Debug, Clone)]
pub struct FeatureSchema {
    columns: Vec<Column>,
    lookup: Vec<Option<HashMap<String, u32>>>,
}

impl PartialEq for FeatureSchema {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
    }
}

impl FeatureSchema {
    /// The shipped 41-column KDD Cup 99 schema.
    pub fn kdd99() -> Self {
        Self::parse(KDD99_SCHEMA).expect("shipped schema is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let mut columns: Vec<Column> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.splitn(3, ',');
            let name = parts.next().unwrap_or("").trim();
            let kind = parts.next().map(str::trim);
            let domain = parts.next();
            if name.is_empty() {
                return Err(SchemaError::Parse { line, message: "missing column name".into() });
            }
            let kind = match (kind, domain) {
                (Some("numeric"), None) => ColumnKind::Numeric,
                (Some("numeric"), Some(_)) => {
                    return Err(SchemaError::Parse {
                        line,
                        message: format!("numeric column `{name}` cannot declare a domain"),
                    })
                }
                (Some("nominal"), Some(symbols)) => {
                    let symbols: Vec<String> = symbols
                        .split(';')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_owned)
                        .collect();
                    if symbols.is_empty() {
                        return Err(SchemaError::EmptyDomain { line, name: name.to_owned() });
                    }
                    ColumnKind::Nominal(symbols)
                }
                (Some("nominal"), None) => {
                    return Err(SchemaError::EmptyDomain { line, name: name.to_owned() })
                }
                (Some(other), _) => {
                    return Err(SchemaError::Parse {
                        line,
                        message: format!("unknown column kind `{other}`"),
                    })
                }
                (None, _) => {
                    return Err(SchemaError::Parse {
                        line,
                        message: format!("column `{name}` has no kind"),
                    })
                }
            };
            if columns.iter().any(|c| c.name == name) {
                return Err(SchemaError::DuplicateColumn { line, name: name.to_owned() });
            }
            columns.push(Column { name: name.to_owned(), kind });
        }
        Self::from_columns(columns)
    }

    pub fn from_columns(columns: Vec<Column>) -> Result<Self, SchemaError> {
        if columns.len() != FEATURE_COUNT {
            return Err(SchemaError::Arity { found: columns.len(), expected: FEATURE_COUNT });
        }
        let lookup = columns
            .iter()
            .map(|c| match &c.kind {
                ColumnKind::Numeric => None,
                ColumnKind::Nominal(domain) => Some(
                    domain
                        .iter()
                        .enumerate()
                        .map(|(i, s)| (s.clone(), i as u32))
                        .collect(),
                ),
            })
            .collect();
        Ok(Self { columns, lookup })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn nominal_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.columns.iter().enumerate().filter(|(_, c)| c.is_nominal()).map(|(i, _)| i)
    }

    /// Declared domain size for a nominal column, `None` for numeric columns.
    pub fn domain_size(&self, col: usize) -> Option<usize> {
        match &self.columns[col].kind {
            ColumnKind::Numeric => None,
            ColumnKind::Nominal(d) => Some(d.len()),
        }
    }

    /// Index reserved for symbols outside a nominal column's domain.
    pub fn unseen_index(&self, col: usize) -> Option<u32> {
        self.domain_size(col).map(|n| n as u32)
    }

    /// Symbol index, or the UNSEEN index when the symbol is not declared.
    pub fn symbol_index(&self, col: usize, symbol: &str) -> Option<u32> {
        let table = self.lookup[col].as_ref()?;
        Some(table.get(symbol).copied().unwrap_or(table.len() as u32))
    }

    pub fn symbol(&self, col: usize, index: u32) -> Option<&str> {
        match &self.columns[col].kind {
            ColumnKind::Nominal(d) => d.get(index as usize).map(String::as_str),
            ColumnKind::Numeric => None,
        }
    }

    /// Canonical text rendering; parses back to an identical schema.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            match &c.kind {
                ColumnKind::Numeric => out.push_str(&format!("{},numeric\n", c.name)),
                ColumnKind::Nominal(d) => {
                    out.push_str(&format!("{},nominal,{}\n", c.name, d.join(";")))
                }
            }
        }
        out
    }

    /// SHA-256 of the canonical rendering.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }
}
