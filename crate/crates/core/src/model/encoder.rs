use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::dataset::FeatureSchema;
use crate::preprocess::Category;
use crate::trees::FeatureKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EncodedColumn {
    /// Scaled as `(x - min) / (max - min)`; not clamped.
    Numeric { min: f64, max: f64 },
    /// One-hot over the declared domain; UNSEEN encodes as all zeros.
    Nominal { domain: usize },
}

/// Min-max scaling and one-hot expansion fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub columns: Vec<EncodedColumn>,
    pub class_names: Vec<String>,
    width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInstance {
    pub values: Vec<f64>,
    pub class: usize,
}

/// Fits ranges on `rows` (raw record values). Constant columns get the
/// range `(min, min + 1)`.
pub fn fit_encoder<'a>(
    rows: impl IntoIterator<Item = &'a [f64]>,
    schema: &FeatureSchema,
) -> Result<Encoder, ModelError> {
    let n = schema.len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut seen = 0usize;
    for row in rows {
        if row.len() != n {
            return Err(ModelError::Arity { expected: n, found: row.len() });
        }
        for (f, &x) in row.iter().enumerate() {
            lo[f] = lo[f].min(x);
            hi[f] = hi[f].max(x);
        }
        seen += 1;
    }
    if seen == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let columns: Vec<EncodedColumn> = (0..n)
        .map(|f| match schema.domain_size(f) {
            Some(domain) => EncodedColumn::Nominal { domain },
            None if hi[f] > lo[f] => EncodedColumn::Numeric { min: lo[f], max: hi[f] },
            None => EncodedColumn::Numeric { min: lo[f], max: lo[f] + 1.0 },
        })
        .collect();
    Ok(Encoder::from_columns(columns))
}

impl Encoder {
    pub fn from_columns(columns: Vec<EncodedColumn>) -> Self {
        let width = columns
            .iter()
            .map(|c| match c {
                EncodedColumn::Numeric { .. } => 1,
                EncodedColumn::Nominal { domain } => *domain,
            })
            .sum();
        Self { columns, class_names: Category::ALL.iter().map(|c| c.name().to_string()).collect(), width }
    }

    /// Raw feature count.
    pub fn n_inputs(&self) -> usize {
        self.columns.len()
    }

    /// Length of [`Encoder::transform`] output.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    fn check(&self, raw: &[f64]) -> Result<(), ModelError> {
        if raw.len() != self.columns.len() {
            return Err(ModelError::Arity { expected: self.columns.len(), found: raw.len() });
        }
        Ok(())
    }

    /// Dense vector: scaled numerics, one-hot nominals.
    pub fn transform(&self, raw: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check(raw)?;
        let mut out = Vec::with_capacity(self.width);
        for (c, &x) in self.columns.iter().zip(raw) {
            match *c {
                EncodedColumn::Numeric { min, max } => out.push((x - min) / (max - min)),
                EncodedColumn::Nominal { domain } => {
                    let start = out.len();
                    out.resize(start + domain, 0.0);
                    if x >= 0.0 && (x as usize) < domain {
                        out[start + x as usize] = 1.0;
                    }
                }
            }
        }
        Ok(out)
    }

    /// One value per column: scaled numerics, nominal symbol indices kept.
    pub fn scale(&self, raw: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check(raw)?;
        Ok(self
            .columns
            .iter()
            .zip(raw)
            .map(|(c, &x)| match *c {
                EncodedColumn::Numeric { min, max } => (x - min) / (max - min),
                EncodedColumn::Nominal { .. } => x,
            })
            .collect())
    }

    pub fn encode(&self, raw: &[f64], class: usize) -> Result<EncodedInstance, ModelError> {
        Ok(EncodedInstance { values: self.transform(raw)?, class })
    }

    /// Column kinds as seen by [`Encoder::scale`]; nominal arity counts the
    /// UNSEEN slot.
    pub fn kinds(&self) -> Vec<FeatureKind> {
        self.columns
            .iter()
            .map(|c| match *c {
                EncodedColumn::Numeric { .. } => FeatureKind::Numeric,
                EncodedColumn::Nominal { domain } => FeatureKind::Nominal(domain + 1),
            })
            .collect()
    }
}

/// Tree view of the raw schema: nominal arity includes UNSEEN.
pub fn schema_kinds(schema: &FeatureSchema) -> Vec<FeatureKind> {
    (0..schema.len())
        .map(|f| match schema.domain_size(f) {
            Some(d) => FeatureKind::Nominal(d + 1),
            None => FeatureKind::Numeric,
        })
        .collect()
}
