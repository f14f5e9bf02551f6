use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, Record};
use crate::error::{param, Result};

const POSITIVE_RATE: f64 = 0.95;

fn uniform_scores(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Calibrated synthetic dataset with exactly `floor(pos_frac * n)` positives.
///
/// Scores are uniform on [0, 1). Walking down from the highest score, each
/// record becomes positive with probability 0.95 until the quota is met; a
/// shortfall is repaired by flipping the highest-scored negatives.
pub fn gen_synthetic(n: usize, pos_frac: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(param("synthetic dataset needs n >= 1"));
    }
    if !(0.0..=1.0).contains(&pos_frac) {
        return Err(param(format!("pos_frac {pos_frac} must lie in [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = uniform_scores(n, &mut rng);
    let quota = (pos_frac * n as f64).floor() as usize;
    let unlabeled = Dataset::new(
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| Record::agreeing(i as u64, s, 0))
            .collect(),
    )?;
    let mut labels = vec![0u32; n];
    let mut count = 0;
    for &i in unlabeled.score_order() {
        if count == quota {
            break;
        }
        if rng.random_bool(POSITIVE_RATE) {
            labels[i] = 1;
            count += 1;
        }
    }
    for &i in unlabeled.score_order() {
        if count == quota {
            break;
        }
        if labels[i] == 0 {
            labels[i] = 1;
            count += 1;
        }
    }
    let records = unlabeled
        .into_records()
        .into_iter()
        .zip(labels)
        .map(|(r, l)| Record::agreeing(r.id, r.proxy_score, l))
        .collect();
    Dataset::new(records)
}

/// Sparse-positive dataset: uniform scores with `positives` positives drawn
/// uniformly from the records scoring above `min_score`.
pub fn gen_imagenet_like(n: usize, positives: usize, min_score: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(param("dataset needs n >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = uniform_scores(n, &mut rng);
    let eligible: Vec<usize> = (0..n).filter(|&i| scores[i] > min_score).collect();
    if eligible.len() < positives {
        return Err(param(format!(
            "only {} records score above {min_score}, cannot place {positives} positives",
            eligible.len()
        )));
    }
    let mut labels = vec![0u32; n];
    for k in sample(&mut rng, eligible.len(), positives) {
        labels[eligible[k]] = 1;
    }
    Dataset::new(
        scores
            .into_iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (s, l))| Record::agreeing(i as u64, s, l))
            .collect(),
    )
}

/// Marks the records at ascending-score ranks `[start_rank, start_rank + width)`
/// as oracle positives.
pub fn gen_adversarial(dataset: &Dataset, start_rank: usize, width: usize) -> Result<Dataset> {
    let n = dataset.len();
    if start_rank.checked_add(width).is_none_or(|end| end > n) {
        return Err(param(format!(
            "rank range [{start_rank}, {start_rank}+{width}) exceeds dataset size {n}"
        )));
    }
    let mut records = dataset.records().to_vec();
    for &i in dataset
        .score_order()
        .iter()
        .rev()
        .skip(start_rank)
        .take(width)
    {
        records[i].oracle_label = 1;
    }
    Dataset::new(records)
}

/// Adds independent N(0, sigma^2) noise to every score, clamped to [0, 1].
pub fn inject_noise(dataset: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(param(format!(
            "noise sigma {sigma} must be a non-negative number"
        )));
    }
    if sigma == 0.0 {
        return Ok(dataset.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = dataset
        .records()
        .iter()
        .map(|r| Record {
            proxy_score: (r.proxy_score + normal.sample(&mut rng)).clamp(0.0, 1.0),
            ..*r
        })
        .collect();
    Dataset::new(records)
}
