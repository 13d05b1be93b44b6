use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{primary_eval_series, ModelTag, Phase, RoundRecord};

/// First round whose reward is within 2% of the series maximum.
pub fn convergence_round(series: &[(usize, f64)]) -> Option<usize> {
    let max = series.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let threshold = max - 0.02 * max.abs();
    series.iter().find(|p| p.1 >= threshold).map(|p| p.0)
}

fn peak(series: &[(usize, f64)]) -> (usize, f64) {
    series
        .iter()
        .fold((0, f64::NEG_INFINITY), |best, p| if p.1 > best.1 { *p } else { best })
}

/// Round-by-round comparison of the evaluation curves of two runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rounds: Vec<usize>,
    pub reward_a: Vec<f64>,
    pub reward_b: Vec<f64>,
    /// `reward_a - reward_b` per round.
    pub deltas: Vec<f64>,
    pub peak_a: f64,
    pub peak_b: f64,
    pub peak_delta: f64,
    pub convergence_a: Option<usize>,
    pub convergence_b: Option<usize>,
    /// Share of rounds where A is at least B.
    pub dominance: f64,
    /// A's client training rewards against B's center, when both have them.
    pub training: Option<TrainingAlignment>,
}

pub fn compare_runs(a: &[RoundRecord], b: &[RoundRecord]) -> Result<Comparison> {
    let sa = primary_eval_series(a);
    let sb = primary_eval_series(b);
    if sa.is_empty() || sb.is_empty() {
        return Err(Error::Metrics("run has no evaluation rows".into()));
    }
    let ra: Vec<usize> = sa.iter().map(|p| p.0).collect();
    let rb: Vec<usize> = sb.iter().map(|p| p.0).collect();
    if ra != rb {
        return Err(Error::Metrics(format!(
            "round axes differ: {} rounds vs {} rounds",
            ra.len(),
            rb.len()
        )));
    }
    let reward_a: Vec<f64> = sa.iter().map(|p| p.1).collect();
    let reward_b: Vec<f64> = sb.iter().map(|p| p.1).collect();
    let deltas = reward_a.iter().zip(&reward_b).map(|(x, y)| x - y).collect();
    let wins = reward_a.iter().zip(&reward_b).filter(|(x, y)| x >= y).count();
    let peak_a = peak(&sa).1;
    let peak_b = peak(&sb).1;
    Ok(Comparison {
        rounds: ra,
        reward_a,
        reward_b,
        deltas,
        peak_a,
        peak_b,
        peak_delta: peak_a - peak_b,
        convergence_a: convergence_round(&sa),
        convergence_b: convergence_round(&sb),
        dominance: wins as f64 / sa.len() as f64,
        training: training_alignment(a, b).ok(),
    })
}

/// Training rewards of a federated run's clients against a centralized
/// run, aligned by cumulative local epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingAlignment {
    pub epochs: Vec<usize>,
    /// Mean over clients of the reward of their `epoch`-th local episode.
    pub client_mean: Vec<f64>,
    pub center: Vec<f64>,
    /// Share of aligned points where the client mean is at least the center.
    pub dominance: f64,
}

fn train_by_epoch(records: &[RoundRecord], model: ModelTag) -> BTreeMap<usize, (f64, usize)> {
    let mut out: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.phase == Phase::Train && r.model == model) {
        let e = out.entry(r.episodes).or_insert((0.0, 0));
        e.0 += r.cum_reward;
        e.1 += 1;
    }
    out
}

/// Mean training reward per cumulative episode count for `model`.
pub(crate) fn train_curve(records: &[RoundRecord], model: ModelTag) -> Vec<(f64, f64)> {
    train_by_epoch(records, model)
        .into_iter()
        .map(|(e, (sum, n))| (e as f64, sum / n as f64))
        .collect()
}

pub fn training_alignment(federated: &[RoundRecord], central: &[RoundRecord]) -> Result<TrainingAlignment> {
    let fed = train_by_epoch(federated, ModelTag::Client);
    let cen = train_by_epoch(central, ModelTag::Center);
    let mut out = TrainingAlignment {
        epochs: Vec::new(),
        client_mean: Vec::new(),
        center: Vec::new(),
        dominance: 0.0,
    };
    for (e, (sum, n)) in &fed {
        if let Some((c, _)) = cen.get(e) {
            out.epochs.push(*e);
            out.client_mean.push(sum / *n as f64);
            out.center.push(*c);
        }
    }
    if out.epochs.is_empty() {
        return Err(Error::Metrics("no shared cumulative-epoch points".into()));
    }
    let wins = out.client_mean.iter().zip(&out.center).filter(|(a, b)| a >= b).count();
    out.dominance = wins as f64 / out.epochs.len() as f64;
    Ok(out)
}
