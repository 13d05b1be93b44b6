use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::AgentKind;
use crate::error::{Error, Result};
use crate::federation::{run_centralized, run_federated, RunOutput};
use crate::metrics::{eval_series, write_metrics, ModelTag, RoundRecord};

use super::compare::convergence_round;
use super::config::{write_config, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fed,
    Central,
    Both,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fed" => Ok(Mode::Fed),
            "central" => Ok(Mode::Central),
            "both" => Ok(Mode::Both),
            other => Err(Error::validation("mode", format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Fed => "fed",
            Mode::Central => "central",
            Mode::Both => "both",
        })
    }
}

/// One evaluated model of a run: its best validation reward and the
/// round at which it converged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: ModelTag,
    pub metrics_file: String,
    pub rounds: usize,
    pub final_reward: Option<f64>,
    pub peak_reward: Option<f64>,
    pub peak_round: Option<usize>,
    pub convergence_round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: AgentKind,
    pub seed: u64,
    pub mode: Mode,
    pub runs: Vec<RunSummary>,
}

/// Summary of the `model` eval rows, computed from the records alone.
pub fn summarize(model: ModelTag, records: &[RoundRecord], metrics_file: &str) -> RunSummary {
    let series = eval_series(records, model);
    let peak = series.iter().copied().reduce(|a, b| if b.1 > a.1 { b } else { a });
    RunSummary {
        model,
        metrics_file: metrics_file.to_owned(),
        rounds: series.len(),
        final_reward: series.last().map(|p| p.1),
        peak_reward: peak.map(|p| p.1),
        peak_round: peak.map(|p| p.0),
        convergence_round: convergence_round(&series),
    }
}

/// Runs the requested trainings under `cfg.out_dir`, writing the
/// effective config, metrics CSVs, per-round checkpoints and
/// `summary.json`.
pub fn run_experiment(cfg: &RunConfig, mode: Mode) -> Result<Summary> {
    cfg.validate()?;
    let out = cfg.out_dir.as_path();
    write_config(cfg, out)?;
    let ckpt = out.join("checkpoints");
    let plan = cfg.plan(Some(&ckpt));

    let (fed, central): (Option<Result<RunOutput>>, Option<Result<RunOutput>>) = match mode {
        Mode::Fed => (Some(run_federated(&plan)), None),
        Mode::Central => (None, Some(run_centralized(&plan))),
        Mode::Both => {
            let (f, c) = rayon::join(|| run_federated(&plan), || run_centralized(&plan));
            (Some(f), Some(c))
        }
    };

    let mut runs = Vec::new();
    if let Some(res) = fed {
        runs.push(persist(out, "metrics_fed.csv", ModelTag::Global, &res?.records)?);
    }
    if let Some(res) = central {
        runs.push(persist(out, "metrics_central.csv", ModelTag::Center, &res?.records)?);
    }
    let summary = Summary {
        algorithm: cfg.agent.algorithm,
        seed: cfg.seed,
        mode,
        runs,
    };
    let path = out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

fn persist(out: &Path, name: &str, model: ModelTag, records: &[RoundRecord]) -> Result<RunSummary> {
    write_metrics(&out.join(name), records)?;
    Ok(summarize(model, records, name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::read_metrics;

    fn tiny(dir: &Path) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.env.horizon = 20;
        cfg.federation.n_clients = 3;
        cfg.federation.k_selected = 2;
        cfg.federation.local_epochs = 1;
        cfg.federation.global_epochs = 2;
        cfg.eval_episodes = 1;
        cfg.agent.hidden_dims = vec![8];
        cfg.out_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn both_mode_writes_aligned_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        let summary = run_experiment(&cfg, Mode::Both).unwrap();
        assert_eq!(summary.runs.len(), 2);
        let fed = read_metrics(&dir.path().join("metrics_fed.csv")).unwrap();
        let cen = read_metrics(&dir.path().join("metrics_central.csv")).unwrap();
        let rf: Vec<usize> = eval_series(&fed, ModelTag::Global).iter().map(|p| p.0).collect();
        let rc: Vec<usize> = eval_series(&cen, ModelTag::Center).iter().map(|p| p.0).collect();
        assert_eq!(rf, vec![1, 2]);
        assert_eq!(rf, rc);
        for name in ["config.json", "summary.json", "checkpoints/global/round_002/manifest.json"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        assert_eq!(summary.runs[0], summarize(ModelTag::Global, &fed, "metrics_fed.csv"));
    }

    #[test]
    fn summary_of_monotone_run() {
        let recs: Vec<RoundRecord> = [10.0, 50.0, 99.0, 100.0]
            .iter()
            .enumerate()
            .map(|(i, v)| RoundRecord::eval(i + 1, ModelTag::Center, *v, 5))
            .collect();
        let s = summarize(ModelTag::Center, &recs, "m.csv");
        assert_eq!(s.convergence_round, Some(3));
        assert_eq!(s.peak_reward, Some(100.0));
        assert_eq!(s.peak_round, Some(4));
    }

    #[test]
    fn mode_parse() {
        assert_eq!("both".parse::<Mode>().unwrap(), Mode::Both);
        assert!("fedd".parse::<Mode>().unwrap_err().is_validation());
    }
}
