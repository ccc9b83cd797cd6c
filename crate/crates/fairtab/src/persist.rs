//! Versioned JSON model files and content hashing.

use crate::error::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile<T> {
    pub format: String,
    pub version: u32,
    pub payload: T,
}

pub fn save_json<T: Serialize>(
    path: impl AsRef<Path>,
    format: &str,
    version: u32,
    payload: &T,
) -> Result<()> {
    let file = ModelFile {
        format: format.to_string(),
        version,
        payload,
    };
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>, format: &str) -> Result<T> {
    let text = std::fs::read_to_string(&path)?;
    let file: ModelFile<T> = serde_json::from_str(&text)?;
    if file.format != format {
        return Err(Error::Data(format!(
            "expected a `{format}` file, found `{}`",
            file.format
        )));
    }
    Ok(file.payload)
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hex SHA-256 of a file's contents.
pub fn hash_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Hash of a serializable value's canonical JSON.
pub fn hash_value<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(value)?.as_bytes()))
}
