use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AgentKind;
use crate::error::{Error, Result};
use crate::nn::{MlpSpec, ParamVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub file: String,
    pub spec: MlpSpec,
}

/// `manifest.json` of a checkpoint directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub algorithm: AgentKind,
    pub round: Option<usize>,
    pub networks: Vec<NetworkEntry>,
}

/// Writes one `net_<i>.bin` per network plus `manifest.json` into `dir`.
pub fn save_checkpoint(
    dir: &Path,
    algorithm: AgentKind,
    round: Option<usize>,
    specs: &[MlpSpec],
    params: &[ParamVector],
) -> Result<()> {
    if specs.len() != params.len() {
        return Err(Error::Checkpoint(format!("{} specs for {} networks", specs.len(), params.len())));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut networks = Vec::with_capacity(params.len());
    for (i, (spec, p)) in specs.iter().zip(params).enumerate() {
        if &spec.layout() != p.layout() {
            return Err(Error::Checkpoint(format!("network {i} does not match its spec")));
        }
        let file = format!("net_{i}.bin");
        let path = dir.join(&file);
        fs::write(&path, p.to_bytes()).map_err(|e| Error::io(&path, e))?;
        networks.push(NetworkEntry {
            file,
            spec: spec.clone(),
        });
    }
    let manifest = CheckpointManifest {
        algorithm,
        round,
        networks,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(CheckpointManifest, Vec<ParamVector>)> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    let mut params = Vec::with_capacity(manifest.networks.len());
    for entry in &manifest.networks {
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let p = ParamVector::from_bytes(&bytes)?;
        if p.layout() != &entry.spec.layout() {
            return Err(Error::Checkpoint(format!("{} does not match its manifest spec", entry.file)));
        }
        params.push(p);
    }
    Ok((manifest, params))
}
