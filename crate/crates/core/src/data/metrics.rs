use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Precision,
    Recall,
    Accuracy,
}

/// Precision, recall or proxy accuracy of the set `{score > rho}`.
///
/// `None` when the denominator is empty (no records above `rho`, or no
/// positives for recall).
pub fn metric_at(dataset: &Dataset, kind: MetricKind, rho: f64) -> Result<Option<f64>> {
    dataset.ensure_non_empty()?;
    if kind != MetricKind::Accuracy {
        dataset.ensure_binary()?;
    }
    let above = dataset.above(rho);
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let value = match kind {
        MetricKind::Precision => {
            let tp = above
                .iter()
                .filter(|&&i| dataset.record(i).is_positive())
                .count();
            ratio(tp, above.len())
        }
        MetricKind::Recall => {
            let tp = above
                .iter()
                .filter(|&&i| dataset.record(i).is_positive())
                .count();
            ratio(tp, dataset.positives())
        }
        MetricKind::Accuracy => {
            let ok = above
                .iter()
                .filter(|&&i| dataset.record(i).proxy_correct())
                .count();
            ratio(ok, above.len())
        }
    };
    Ok(value)
}

pub(crate) fn candidates_from_desc(scores_desc: &[f64], m: usize) -> Result<Vec<f64>> {
    let n = scores_desc.len();
    if m == 0 || m > n {
        return Err(param(format!("candidate count M={m} must lie in [1, {n}]")));
    }
    let mut out: Vec<f64> = Vec::with_capacity(m);
    for j in 1..=m {
        let rank = j * n / m;
        let score = scores_desc[rank - 1];
        if out.last() != Some(&score) {
            out.push(score);
        }
    }
    Ok(out)
}

/// Percentile candidate thresholds, highest first.
///
/// Candidate `j` (1..=M) is the score of the `floor(j*n/M)`-th highest record;
/// duplicate scores collapse to one candidate.
pub fn candidate_thresholds(dataset: &Dataset, m: usize) -> Result<Vec<f64>> {
    candidates_from_desc(dataset.scores_desc(), m)
}

/// Fraction of positives in the density window of `r` records at `rho`.
pub fn positive_density(dataset: &Dataset, rho: f64, r: usize) -> Result<Option<f64>> {
    dataset.ensure_binary()?;
    if r == 0 {
        return Err(param("density window must hold at least one record"));
    }
    let window = dataset.window(rho, r);
    if window.is_empty() {
        return Ok(None);
    }
    let pos = window
        .iter()
        .filter(|&&i| dataset.record(i).is_positive())
        .count();
    Ok(Some(pos as f64 / window.len() as f64))
}

/// Lowest score `rho_beta` such that every threshold at or above it has
/// positive density at least `beta`. `None` when even the top window is sparse.
///
/// The dense subset is `{score >= rho_beta}`. Windows only change at record
/// scores, so checking each distinct score is exhaustive.
pub fn dense_cutoff(dataset: &Dataset, beta: f64, r: usize) -> Result<Option<f64>> {
    dataset.ensure_binary()?;
    if r == 0 {
        return Err(param("density window must hold at least one record"));
    }
    let scores = dataset.scores_desc();
    let order = dataset.score_order();
    // prefix[k] = positives among the k highest-scored records
    let mut prefix = Vec::with_capacity(order.len() + 1);
    prefix.push(0usize);
    for &i in order {
        prefix.push(prefix.last().unwrap() + dataset.record(i).is_positive() as usize);
    }
    let mut cutoff = None;
    let mut k = 0;
    while k < scores.len() {
        let s = scores[k];
        let mut end = k;
        while end < scores.len() && scores[end] == s {
            end += 1;
        }
        let start = end.saturating_sub(r);
        let density = (prefix[end] - prefix[start]) as f64 / (end - start) as f64;
        if density < beta {
            break;
        }
        cutoff = Some(s);
        k = end;
    }
    Ok(cutoff)
}

/// Recall of `{score > rho}` measured only over the dense subset.
///
/// `rho = None` selects nothing. Returns `None` when the dense subset holds no
/// positives.
pub fn dense_recall(
    dataset: &Dataset,
    beta: f64,
    r: usize,
    rho: Option<f64>,
) -> Result<Option<f64>> {
    let Some(floor) = dense_cutoff(dataset, beta, r)? else {
        return Ok(None);
    };
    let dense_pos = dataset
        .records()
        .iter()
        .filter(|x| x.proxy_score >= floor && x.is_positive());
    let (mut total, mut hit) = (0usize, 0usize);
    for x in dense_pos {
        total += 1;
        if rho.is_some_and(|t| x.proxy_score > t) {
            hit += 1;
        }
    }
    Ok((total > 0).then(|| hit as f64 / total as f64))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::d6;
    use super::super::Record;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn d6_examples() {
        let ds = d6();
        assert_eq!(
            metric_at(&ds, MetricKind::Precision, 0.6).unwrap(),
            Some(2.0 / 3.0)
        );
        assert_eq!(metric_at(&ds, MetricKind::Recall, 0.0).unwrap(), Some(1.0));
        assert_eq!(
            metric_at(&ds, MetricKind::Accuracy, 0.6).unwrap(),
            Some(1.0)
        );
        assert_eq!(metric_at(&ds, MetricKind::Precision, 0.9).unwrap(), None);
    }

    #[test]
    fn precision_rejects_multiclass() {
        let ds = Dataset::new(vec![Record::agreeing(0, 0.5, 2)]).unwrap();
        assert!(metric_at(&ds, MetricKind::Precision, 0.1).is_err());
        assert!(metric_at(&ds, MetricKind::Accuracy, 0.1).is_ok());
    }

    #[test]
    fn recall_undefined_without_positives() {
        let ds = Dataset::from_scored_labels(&[(0.2, 0), (0.4, 0)]).unwrap();
        assert_eq!(metric_at(&ds, MetricKind::Recall, 0.0).unwrap(), None);
    }

    fn ten() -> Dataset {
        let pairs: Vec<(f64, u32)> = (1..=10).map(|i| (i as f64 / 10.0, 0)).collect();
        Dataset::from_scored_labels(&pairs).unwrap()
    }

    #[test]
    fn candidates_every_other_rank() {
        let ds = ten();
        let d = ds.scores_desc().to_vec();
        assert_eq!(
            candidate_thresholds(&ds, 5).unwrap(),
            vec![d[1], d[3], d[5], d[7], d[9]]
        );
        assert_eq!(candidate_thresholds(&ds, 1).unwrap(), vec![d[9]]);
        assert_eq!(candidate_thresholds(&ds, 10).unwrap(), d);
    }

    #[test]
    fn candidates_reject_bad_m() {
        let ds = ten();
        assert!(candidate_thresholds(&ds, 0).is_err());
        assert!(candidate_thresholds(&ds, 11).is_err());
    }

    #[test]
    fn candidates_dedupe_ties() {
        let ds = Dataset::from_scored_labels(&[(0.5, 0), (0.5, 0), (0.5, 0), (0.2, 0)]).unwrap();
        assert_eq!(candidate_thresholds(&ds, 4).unwrap(), vec![0.5, 0.2]);
    }

    #[test]
    fn density_examples() {
        let ds = d6();
        assert_eq!(positive_density(&ds, 0.6, 2).unwrap(), Some(0.5));
        assert_eq!(positive_density(&ds, 0.0, 6).unwrap(), Some(0.5));
        assert_eq!(positive_density(&ds, 0.95, 2).unwrap(), None);
    }

    #[test]
    fn dense_cutoff_stops_at_first_sparse_window() {
        // scores 0.1..1.0, positives at 0.7 and above
        let pairs: Vec<(f64, u32)> = (1..=10)
            .map(|i| (i as f64 / 10.0, (i >= 7) as u32))
            .collect();
        let ds = Dataset::from_scored_labels(&pairs).unwrap();
        // window of 2: at 0.6 it holds {0.6, 0.7} -> 0.5; at 0.5 it holds {0.5, 0.6} -> 0
        assert_eq!(dense_cutoff(&ds, 0.5, 2).unwrap(), Some(0.6));
        assert_eq!(dense_recall(&ds, 0.5, 2, Some(0.75)).unwrap(), Some(0.75));
        assert_eq!(dense_recall(&ds, 0.5, 2, None).unwrap(), Some(0.0));
        assert_eq!(dense_cutoff(&ds, 0.0, 2).unwrap(), Some(0.1));
    }

    #[test]
    fn dense_cutoff_none_when_top_is_sparse() {
        let ds = Dataset::from_scored_labels(&[(0.9, 0), (0.1, 1)]).unwrap();
        assert_eq!(dense_cutoff(&ds, 0.5, 1).unwrap(), None);
        assert_eq!(dense_recall(&ds, 0.5, 1, Some(0.0)).unwrap(), None);
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        prop::collection::vec((0u32..20, 0u32..2, 0u32..2), 1..50).prop_map(|rows| {
            let records = rows
                .into_iter()
                .enumerate()
                .map(|(i, (s, p, o))| Record::new(i as u64, s as f64 / 19.0, p, o))
                .collect();
            Dataset::new(records).unwrap()
        })
    }

    proptest! {
        #[test]
        fn recall_non_increasing(ds in arb_dataset()) {
            let mut prev = f64::INFINITY;
            for rho in (0..=20).map(|k| k as f64 / 20.0 - 0.01) {
                if let Some(r) = metric_at(&ds, MetricKind::Recall, rho).unwrap() {
                    prop_assert!(r <= prev + 1e-12);
                    prev = r;
                }
            }
        }

        #[test]
        fn metrics_in_unit_interval(ds in arb_dataset(), rho in -0.1f64..1.0) {
            for kind in [MetricKind::Precision, MetricKind::Recall, MetricKind::Accuracy] {
                if let Some(v) = metric_at(&ds, kind, rho).unwrap() {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn candidates_strictly_descending_subset(ds in arb_dataset(), m_seed in 1usize..100) {
            let m = 1 + m_seed % ds.len();
            let c = candidate_thresholds(&ds, m).unwrap();
            prop_assert!(c.windows(2).all(|w| w[0] > w[1]));
            prop_assert!(c.iter().all(|s| ds.scores_desc().contains(s)));
            prop_assert_eq!(*c.last().unwrap(), *ds.scores_desc().last().unwrap());
        }
    }
}
