//! Run manifest: what was run, from which configuration, and which files it
//! produced.
//!
//! Nothing in the manifest depends on the wall clock or the output location,
//! so identical runs produce identical manifests. A timestamp is recorded only
//! when `SOURCE_DATE_EPOCH` is set.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::output::{sha256_hex, WrittenFile};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub files: Vec<WrittenFile>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_digest: String,
    pub input_digests: BTreeMap<String, Option<String>>,
    pub generated_at: Option<String>,
    pub status: StageStatus,
    pub failed_stage: Option<String>,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Result<Self, CliError> {
        let (config_digest, input_digests) = config_digest(config)?;
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed: config.seed,
            config_digest,
            input_digests,
            generated_at: source_date(),
            status: StageStatus::Ok,
            failed_stage: None,
            stages: Vec::new(),
        })
    }

    pub fn push(&mut self, stage: StageRecord) {
        if stage.status == StageStatus::Failed && self.failed_stage.is_none() {
            self.status = StageStatus::Failed;
            self.failed_stage = Some(stage.name.clone());
        }
        self.stages.push(stage);
    }

    /// Every file listed by every stage, in write order.
    pub fn files(&self) -> impl Iterator<Item = &WrittenFile> {
        self.stages.iter().flat_map(|s| s.files.iter())
    }
}

/// Digest over the configuration (output location excluded) and the contents
/// of every configured input file.
pub fn config_digest(config: &PipelineConfig) -> Result<(String, BTreeMap<String, Option<String>>), CliError> {
    let i = &config.inputs;
    let mut inputs = BTreeMap::new();
    for (name, path) in [
        ("flights", &i.flights),
        ("airports", &i.airports),
        ("prices", &i.prices),
        ("mobility", &i.mobility),
        ("covid", &i.covid),
    ] {
        let digest = match path {
            Some(p) => std::fs::read(config.resolve(p)).ok().map(|b| sha256_hex(&b)),
            None => None,
        };
        inputs.insert(name.to_string(), digest);
    }
    let mut canonical = config.clone();
    canonical.output_dir = None;
    #[derive(Serialize)]
    struct View<'a> {
        config: &'a PipelineConfig,
        inputs: &'a BTreeMap<String, Option<String>>,
    }
    let bytes = serde_json::to_vec(&View {
        config: &canonical,
        inputs: &inputs,
    })
    .map_err(|e| CliError::Config(format!("serializing config: {e}")))?;
    Ok((sha256_hex(&bytes), inputs))
}

fn source_date() -> Option<String> {
    let secs: i64 = std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()?;
    chrono::DateTime::from_timestamp(secs, 0).map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}
