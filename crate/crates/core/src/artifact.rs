//! Saved models: posterior draws plus the training schema, as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::sampler::PosteriorDraws;

pub const FORMAT_VERSION: &str = "1.0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: String,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    pub seed: u64,
    pub draws: PosteriorDraws,
}

impl ModelArtifact {
    pub fn new(draws: PosteriorDraws, feature_names: Vec<String>, label_names: Vec<String>) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            seed: draws.config.seed,
            feature_names,
            label_names,
            draws,
        }
    }

    /// Error unless `columns` matches the training feature names exactly.
    pub fn check_features(&self, columns: &[String]) -> Result<()> {
        if columns != self.feature_names.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "model expects features [{}], got [{}]",
                self.feature_names.join(","),
                columns.join(",")
            )));
        }
        Ok(())
    }
}

fn major(version: &str) -> Option<&str> {
    version.split('.').next().filter(|m| !m.is_empty())
}

pub fn to_json(artifact: &ModelArtifact) -> Result<String> {
    Ok(serde_json::to_string(artifact)? + "\n")
}

pub fn from_json(text: &str) -> Result<ModelArtifact> {
    let value: Value = serde_json::from_str(text)?;
    let version = value
        .get("format_version")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::FormatVersion("missing format_version".into()))?;
    if major(version) != major(FORMAT_VERSION) {
        return Err(Error::FormatVersion(format!(
            "unsupported format version {version} (this build reads {FORMAT_VERSION})"
        )));
    }
    Ok(serde_json::from_value(value)?)
}

pub fn save_model(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(artifact)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelArtifact> {
    from_json(&std::fs::read_to_string(path)?)
}
