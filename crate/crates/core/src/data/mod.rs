//! Datasets of proxy scores and labels, quality metrics, candidate thresholds,
//! generators and CSV persistence.

mod csv_io;
mod generate;
mod metrics;
mod query;

pub use csv_io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use generate::{gen_adversarial, gen_imagenet_like, gen_synthetic, inject_noise};
pub(crate) use metrics::candidates_from_desc;
pub use metrics::{
    candidate_thresholds, dense_cutoff, dense_recall, metric_at, positive_density, MetricKind,
};
pub use query::{QueryKind, QuerySpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One record: the proxy's score and answer, and the oracle's answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: u64,
    pub proxy_score: f64,
    pub proxy_label: u32,
    pub oracle_label: u32,
}

impl Record {
    pub fn new(id: u64, proxy_score: f64, proxy_label: u32, oracle_label: u32) -> Self {
        Self {
            id,
            proxy_score,
            proxy_label,
            oracle_label,
        }
    }

    /// Record whose proxy agrees with the oracle.
    pub fn agreeing(id: u64, proxy_score: f64, label: u32) -> Self {
        Self::new(id, proxy_score, label, label)
    }

    pub fn is_positive(&self) -> bool {
        self.oracle_label == 1
    }

    pub fn proxy_correct(&self) -> bool {
        self.proxy_label == self.oracle_label
    }
}

/// An immutable dataset with its records indexed by descending proxy score.
///
/// `score_order[k]` is the index of the record with the k-th highest score;
/// ties are broken by ascending id.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<Record>,
    score_order: Vec<usize>,
    scores_desc: Vec<f64>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl Dataset {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.proxy_score) {
                return Err(Error::Parameter(format!(
                    "record {i} has proxy_score {} outside [0, 1]",
                    r.proxy_score
                )));
            }
        }
        let mut score_order: Vec<usize> = (0..records.len()).collect();
        score_order.sort_by(|&a, &b| {
            let (ra, rb) = (&records[a], &records[b]);
            rb.proxy_score
                .total_cmp(&ra.proxy_score)
                .then(ra.id.cmp(&rb.id))
        });
        let scores_desc = score_order
            .iter()
            .map(|&i| records[i].proxy_score)
            .collect();
        Ok(Self {
            records,
            score_order,
            scores_desc,
        })
    }

    /// Builds a dataset from `(score, label)` pairs where proxy and oracle agree.
    pub fn from_scored_labels(pairs: &[(f64, u32)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .enumerate()
                .map(|(i, &(s, l))| Record::agreeing(i as u64, s, l))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, index: usize) -> &Record {
        &self.records[index]
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    pub fn score_order(&self) -> &[usize] {
        &self.score_order
    }

    /// Proxy scores in descending order (aligned with `score_order`).
    pub fn scores_desc(&self) -> &[f64] {
        &self.scores_desc
    }

    /// Number of records with score strictly above `rho`.
    pub fn count_above(&self, rho: f64) -> usize {
        self.scores_desc.partition_point(|&s| s > rho)
    }

    /// Indices of the records with score strictly above `rho`, highest first.
    pub fn above(&self, rho: f64) -> &[usize] {
        &self.score_order[..self.count_above(rho)]
    }

    /// The count-based density window: the `r` lowest-scored records among
    /// those with score `>= rho` (all of them when fewer than `r` qualify).
    pub fn window(&self, rho: f64, r: usize) -> &[usize] {
        let at_least = self.scores_desc.partition_point(|&s| s >= rho);
        &self.score_order[at_least.saturating_sub(r)..at_least]
    }

    pub fn positives(&self) -> usize {
        self.records.iter().filter(|r| r.is_positive()).count()
    }

    pub fn is_binary(&self) -> bool {
        self.records
            .iter()
            .all(|r| r.oracle_label <= 1 && r.proxy_label <= 1)
    }

    pub(crate) fn ensure_binary(&self) -> Result<()> {
        if self.is_binary() {
            Ok(())
        } else {
            Err(Error::InvalidTask(
                "precision and recall need binary labels".to_string(),
            ))
        }
    }

    pub(crate) fn ensure_non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyDataset)
        } else {
            Ok(())
        }
    }

    /// Distinct proxy labels, ascending.
    pub fn proxy_classes(&self) -> Vec<u32> {
        let mut classes: Vec<u32> = self.records.iter().map(|r| r.proxy_label).collect();
        classes.sort_unstable();
        classes.dedup();
        classes
    }
}
