//! Versioned JSON persistence for models, policies and hypothesis classes.
//!
//! Every document is an envelope `{"schema": ..., "version": ..., "data": ...}`.
//! Floats are written in shortest round-trip form, so save → load is exact.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::env::HypothesisClass;
use crate::error::{Error, Result};
use crate::flambe::ModelEstimate;
use crate::mdp::{LowRankMdp, Policy};

pub const SCHEMA_VERSION: u32 = 1;

/// Types that persist through the versioned envelope.
pub trait Document: Serialize + DeserializeOwned {
    const SCHEMA: &'static str;
}

impl Document for LowRankMdp {
    const SCHEMA: &'static str = "flambe.mdp";
}

impl Document for Policy {
    const SCHEMA: &'static str = "flambe.policy";
}

impl Document for HypothesisClass {
    const SCHEMA: &'static str = "flambe.hypothesis_class";
}

impl Document for ModelEstimate {
    const SCHEMA: &'static str = "flambe.model_estimate";
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema: String,
    version: u32,
    data: T,
}

pub fn to_json<T: Document>(value: &T) -> Result<String> {
    let env = Envelope {
        schema: T::SCHEMA.to_string(),
        version: SCHEMA_VERSION,
        data: value,
    };
    Ok(serde_json::to_string_pretty(&env)?)
}

pub fn from_json<T: Document>(text: &str) -> Result<T> {
    let env: Envelope<serde_json::Value> = serde_json::from_str(text)?;
    if env.schema != T::SCHEMA {
        return Err(Error::config(format!(
            "document schema is {:?}, expected {:?}",
            env.schema,
            T::SCHEMA
        )));
    }
    if env.version != SCHEMA_VERSION {
        return Err(Error::config(format!(
            "document version {} is not supported (expected {SCHEMA_VERSION})",
            env.version
        )));
    }
    Ok(serde_json::from_value(env.data)?)
}

pub fn save<T: Document>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn load<T: Document>(path: &Path) -> Result<T> {
    from_json(&std::fs::read_to_string(path)?)
}
