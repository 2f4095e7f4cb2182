use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SuspicionStats;
use crate::graph::NetworkSpec;
use crate::intervention::SimSettings;
use crate::io::serialize_model;

/// SHA-256 of the canonical model text, hex encoded.
pub fn model_hash(spec: &NetworkSpec) -> String {
    hex::encode(Sha256::digest(serialize_model(spec).as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRef {
    pub name: String,
    pub sha256: String,
}

impl ModelRef {
    pub fn of(spec: &NetworkSpec) -> ModelRef {
        ModelRef { name: spec.name.clone(), sha256: model_hash(spec) }
    }
}

/// Everything needed to audit or replay a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub engine: String,
    pub world: ModelRef,
    pub folk: ModelRef,
    pub settings: SimSettings,
    pub stats: SuspicionStats,
}

impl RunRecord {
    pub fn new(world: &NetworkSpec, folk: &NetworkSpec, settings: SimSettings, stats: SuspicionStats) -> RunRecord {
        RunRecord {
            engine: concat!("shadowfolk ", env!("CARGO_PKG_VERSION")).to_string(),
            world: ModelRef::of(world),
            folk: ModelRef::of(folk),
            settings,
            stats,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }
}
