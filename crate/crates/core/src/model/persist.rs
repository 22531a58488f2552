//! Model file layout (all integers little-endian):
//!
//! | offset   | bytes | field                                           |
//! |----------|-------|-------------------------------------------------|
//! | 0        | 4     | magic `KDDM`                                    |
//! | 4        | 2     | format version                                  |
//! | 6        | 32    | SHA-256 of the schema's canonical text          |
//! | 38       | 1     | model-type tag (`ClassifierKind::tag`)          |
//! | 39       | 8     | payload length `n`                              |
//! | 47       | n     | payload: bincode encoding of `TrainedModel`     |
//! | 47 + n   | 32    | SHA-256 of the payload                          |

use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{ClassifierKind, TrainedModel};
use crate::dataset::FeatureSchema;

pub const MAGIC: [u8; 4] = *b"KDDM";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 47;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("model file format version {found}, this build reads version {supported}")]
    VersionMismatch { found: u16, supported: u16 },
    #[error("model file truncated: {found} bytes, at least {expected} needed")]
    Truncated { expected: usize, found: usize },
    #[error("model was trained against a different feature schema")]
    DigestMismatch,
    #[error("unknown model-type tag {0}")]
    UnknownTag(u8),
    #[error("model file corrupt: {0}")]
    Corrupt(String),
    #[error("could not encode model: {0}")]
    Encode(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_model(model: &TrainedModel) -> Result<Vec<u8>, ModelFileError> {
    let payload = bincode::serialize(model).map_err(|e| ModelFileError::Encode(e.to_string()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CHECKSUM_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&model.metadata.schema_digest);
    out.push(model.kind().tag());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&Sha256::digest(&payload));
    Ok(out)
}

fn need(bytes: &[u8], expected: usize) -> Result<(), ModelFileError> {
    if bytes.len() < expected {
        return Err(ModelFileError::Truncated { expected, found: bytes.len() });
    }
    Ok(())
}

/// Decodes a model, refusing it unless it was trained against `schema`.
pub fn read_model(bytes: &[u8], schema: &FeatureSchema) -> Result<TrainedModel, ModelFileError> {
    let magic_len = bytes.len().min(4);
    if bytes[..magic_len] != MAGIC[..magic_len] {
        return Err(ModelFileError::BadMagic);
    }
    need(bytes, 6)?;
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(ModelFileError::VersionMismatch { found: version, supported: FORMAT_VERSION });
    }
    need(bytes, HEADER_LEN)?;
    let digest: [u8; 32] = bytes[6..38].try_into().expect("32-byte slice");
    if digest != schema.digest() {
        return Err(ModelFileError::DigestMismatch);
    }
    let tag = bytes[38];
    let kind = ClassifierKind::from_tag(tag).ok_or(ModelFileError::UnknownTag(tag))?;
    let len = u64::from_le_bytes(bytes[39..47].try_into().expect("8-byte slice"));
    let end = usize::try_from(len)
        .ok()
        .and_then(|l| l.checked_add(HEADER_LEN + CHECKSUM_LEN))
        .ok_or_else(|| ModelFileError::Corrupt(format!("payload length {len}")))?;
    need(bytes, end)?;
    if bytes.len() > end {
        return Err(ModelFileError::Corrupt(format!("{} trailing bytes", bytes.len() - end)));
    }
    let payload = &bytes[HEADER_LEN..end - CHECKSUM_LEN];
    if Sha256::digest(payload).as_slice() != &bytes[end - CHECKSUM_LEN..] {
        return Err(ModelFileError::Corrupt("payload checksum mismatch".into()));
    }
    let model: TrainedModel =
        bincode::deserialize(payload).map_err(|e| ModelFileError::Corrupt(e.to_string()))?;
    if model.kind() != kind || model.metadata.schema_digest != digest {
        return Err(ModelFileError::Corrupt("header disagrees with payload".into()));
    }
    Ok(model)
}

/// Writes through a sibling temporary file so a failed save never leaves a
/// partial model at `path`.
pub fn save_model(path: impl AsRef<Path>, model: &TrainedModel) -> Result<(), ModelFileError> {
    let path = path.as_ref();
    let bytes = write_model(model)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<TrainedModel, ModelFileError> {
    read_model(&fs::read(path)?, schema)
}
