//! Seven independent 4-way categoricals over a flat logit vector.

use rand::Rng;

use crate::env::{ActionLevels, NUM_ACTIONS, NUM_LEVELS};

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn groups(logits: &[f64]) -> impl Iterator<Item = &[f64]> {
    debug_assert_eq!(logits.len(), NUM_ACTIONS * NUM_LEVELS);
    logits.chunks_exact(NUM_LEVELS)
}

/// Per-action probability vectors.
pub fn probabilities(logits: &[f64]) -> Vec<Vec<f64>> {
    groups(logits).map(softmax).collect()
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Joint log-probability of `levels`.
pub fn log_prob(logits: &[f64], levels: &ActionLevels) -> f64 {
    groups(logits)
        .zip(levels.get())
        .map(|(z, &l)| log_softmax(z)[l as usize])
        .sum()
}

/// Sum of the per-action entropies.
pub fn entropy(logits: &[f64]) -> f64 {
    groups(logits)
        .map(|z| {
            let lp = log_softmax(z);
            -lp.iter().map(|l| l.exp() * l).sum::<f64>()
        })
        .sum()
}

/// Gradient with respect to the logits of
/// `lp_coef * log_prob(levels) + ent_coef * entropy`.
pub fn grad_logits(logits: &[f64], levels: &ActionLevels, lp_coef: f64, ent_coef: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for (z, &l) in groups(logits).zip(levels.get()) {
        let lp = log_softmax(z);
        let p: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
        let h = -p.iter().zip(&lp).map(|(p, l)| p * l).sum::<f64>();
        for j in 0..NUM_LEVELS {
            let onehot = if j == l as usize { 1.0 } else { 0.0 };
            let d_lp = onehot - p[j];
            let d_h = -p[j] * (lp[j] + h);
            out.push(lp_coef * d_lp + ent_coef * d_h);
        }
    }
    out
}

pub fn sample(logits: &[f64], rng: &mut impl Rng) -> ActionLevels {
    let mut levels = [0u8; NUM_ACTIONS];
    for (slot, z) in levels.iter_mut().zip(groups(logits)) {
        let p = softmax(z);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = NUM_LEVELS - 1;
        for (j, pj) in p.iter().enumerate() {
            acc += pj;
            if u < acc {
                pick = j;
                break;
            }
        }
        *slot = pick as u8;
    }
    ActionLevels::new(levels).expect("picks are below NUM_LEVELS")
}

/// Per-action argmax; ties go to the lowest level.
pub fn greedy(logits: &[f64]) -> ActionLevels {
    let mut levels = [0u8; NUM_ACTIONS];
    for (slot, z) in levels.iter_mut().zip(groups(logits)) {
        let mut best = 0;
        for j in 1..NUM_LEVELS {
            if z[j] > z[best] {
                best = j;
            }
        }
        *slot = best as u8;
    }
    ActionLevels::new(levels).expect("argmax is below NUM_LEVELS")
}
