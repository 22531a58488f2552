//! Parsing KDD Cup 99 files and counting instances per label.

mod census;
mod reader;
mod schema;

pub use census::LabelCensus;
pub use reader::{
    open_source, parse_records, wrap_source, ConnectionRecord, RecordError, RecordReader,
};
pub use schema::{Column, ColumnKind, FeatureSchema, SchemaError, FEATURE_COUNT};
