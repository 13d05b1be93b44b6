//! Per-round metric rows and their CSV form.
//!
//! Header: `round,model,client_id,phase,cum_reward,episodes`. Train rows
//! hold one episode each, with `episodes` the running count of episodes
//! that model (or client) has trained. Eval rows hold the mean over
//! `episodes` evaluation episodes. Rounds are numbered from 1.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "round,model,client_id,phase,cum_reward,episodes";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Center,
    Client,
    Global,
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelTag::Center => "center",
            ModelTag::Client => "client",
            ModelTag::Global => "global",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub model: ModelTag,
    pub client_id: Option<usize>,
    pub phase: Phase,
    pub cum_reward: f64,
    pub episodes: usize,
}

impl RoundRecord {
    pub fn train(round: usize, model: ModelTag, client_id: Option<usize>, reward: f64, episodes: usize) -> Self {
        Self {
            round,
            model,
            client_id,
            phase: Phase::Train,
            cum_reward: reward,
            episodes,
        }
    }

    pub fn eval(round: usize, model: ModelTag, reward: f64, episodes: usize) -> Self {
        Self {
            round,
            model,
            client_id: None,
            phase: Phase::Eval,
            cum_reward: reward,
            episodes,
        }
    }
}

pub fn to_csv_string(records: &[RoundRecord]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let body = w.into_inner().map_err(|e| Error::Metrics(e.to_string()))?;
    let body = String::from_utf8(body).map_err(|e| Error::Metrics(e.to_string()))?;
    Ok(format!("{CSV_HEADER}\n{body}"))
}

pub fn write_metrics(path: &Path, records: &[RoundRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, to_csv_string(records)?).map_err(|e| Error::io(path, e))
}

pub fn parse_metrics(text: &str) -> Result<Vec<RoundRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Metrics(format!("unexpected header `{}`", header.join(","))));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn read_metrics(path: &Path) -> Result<Vec<RoundRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text)
}

/// `(round, reward)` of the eval rows for `model`, in file order.
pub fn eval_series(records: &[RoundRecord], model: ModelTag) -> Vec<(usize, f64)> {
    records
        .iter()
        .filter(|r| r.phase == Phase::Eval && r.model == model)
        .map(|r| (r.round, r.cum_reward))
        .collect()
}

/// Eval series of whichever model a run evaluates (global or center).
pub fn primary_eval_series(records: &[RoundRecord]) -> Vec<(usize, f64)> {
    let global = eval_series(records, ModelTag::Global);
    if global.is_empty() {
        eval_series(records, ModelTag::Center)
    } else {
        global
    }
}
