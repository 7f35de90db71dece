//! TOML model specification files.
//!
//! ```toml
//! link = "identity"          # or "logit"
//! intercept = true
//!
//! [[covariate]]
//! name = "bmi"
//! class = "II"               # I, II, III or time-invariant
//! blocks = [[0], [1], [2, 3]]
//!
//! [[covariate]]
//! name = "age"
//! class = "I"
//! blocks = "semi:first-lag-separate"   # or "aggregated", "full", "semi:single-block", "lag1"
//! ```
//!
//! Named groupings depend on `T`, so a file is resolved against a panel with
//! [`ModelFile::resolve`].

use serde::Deserialize;
use thiserror::Error;

use crate::design::{CovariateClass, CovariateSpec, DesignError, LagGrouping, ModelSpec};
use crate::moments::LinkFunction;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("cannot parse model file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown covariate class `{0}` (expected I, II, III or time-invariant)")]
    UnknownClass(String),
    #[error("unknown grouping shortcut `{0}`")]
    UnknownShortcut(String),
    #[error(transparent)]
    Design(#[from] DesignError),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BlocksEntry {
    Named(String),
    Explicit(Vec<Vec<usize>>),
}

impl BlocksEntry {
    pub fn resolve(&self, times: usize) -> Result<LagGrouping, ModelFileError> {
        match self {
            BlocksEntry::Explicit(blocks) => Ok(LagGrouping::new(blocks.clone())?),
            BlocksEntry::Named(name) => match name.as_str() {
                "aggregated" => Ok(LagGrouping::contemporaneous()),
                "semi:first-lag-separate" => Ok(LagGrouping::first_lag_separate(times)),
                "semi:single-block" => Ok(LagGrouping::single_block(times)),
                "full" => Ok(LagGrouping::fully_partitioned(times)),
                "lag1" => Ok(LagGrouping::lag1_only()),
                other => Err(ModelFileError::UnknownShortcut(other.to_string())),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateEntry {
    pub name: String,
    pub class: String,
    pub blocks: BlocksEntry,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub link: LinkFunction,
    #[serde(default = "default_intercept")]
    pub intercept: bool,
    #[serde(rename = "covariate", default)]
    pub covariates: Vec<CovariateEntry>,
}

fn default_intercept() -> bool {
    true
}

pub fn parse_class(raw: &str) -> Result<CovariateClass, ModelFileError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "i" | "1" | "type1" | "typei" => Ok(CovariateClass::TypeI),
        "ii" | "2" | "type2" | "typeii" => Ok(CovariateClass::TypeII),
        "iii" | "3" | "type3" | "typeiii" => Ok(CovariateClass::TypeIII),
        "time-invariant" | "invariant" | "constant" => Ok(CovariateClass::TimeInvariant),
        _ => Err(ModelFileError::UnknownClass(raw.to_string())),
    }
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, ModelFileError> {
        let file: ModelFile = toml::from_str(text)?;
        for c in &file.covariates {
            parse_class(&c.class)?;
        }
        Ok(file)
    }

    pub fn covariate_names(&self) -> Vec<String> {
        self.covariates.iter().map(|c| c.name.clone()).collect()
    }

    pub fn resolve(&self, times: usize) -> Result<ModelSpec, ModelFileError> {
        let covariates = self
            .covariates
            .iter()
            .map(|c| {
                Ok(CovariateSpec::new(
                    c.name.clone(),
                    parse_class(&c.class)?,
                    c.blocks.resolve(times)?,
                ))
            })
            .collect::<Result<Vec<_>, ModelFileError>>()?;
        let spec = ModelSpec::new(self.link, self.intercept, covariates)?;
        spec.check_times(times)?;
        Ok(spec)
    }
}
