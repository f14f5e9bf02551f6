use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedKind {
    Hoeffding,
    Chernoff,
}

/// Confidence margin added to the target before comparing the sample mean.
pub fn margin(kind: FixedKind, total: usize, target: f64, alpha: f64) -> f64 {
    let n = total as f64;
    let log_term = (1.0 / alpha).ln();
    match kind {
        FixedKind::Hoeffding => (log_term / (2.0 * n)).sqrt(),
        FixedKind::Chernoff => (2.0 * (1.0 - target).max(0.0) * log_term / n).sqrt(),
    }
}

/// Whether `positives / total >= target + margin`. No observations means no
/// evidence, so the test rejects.
pub fn fixed_sample_test(
    kind: FixedKind,
    positives: usize,
    total: usize,
    target: f64,
    alpha: f64,
) -> Result<bool> {
    if positives > total {
        return Err(param(format!(
            "{positives} positives exceed {total} observations"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(param(format!("alpha={alpha} must lie in (0, 1]")));
    }
    if total == 0 {
        return Ok(false);
    }
    Ok(positives as f64 / total as f64 >= target + margin(kind, total, target, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hoeffding_examples() {
        assert!((margin(FixedKind::Hoeffding, 50, 0.9, 0.1) - 0.15174).abs() < 1e-5);
        assert!(!fixed_sample_test(FixedKind::Hoeffding, 50, 50, 0.9, 0.1).unwrap());
        assert!((margin(FixedKind::Hoeffding, 200, 0.9, 0.1) - 0.07587).abs() < 1e-5);
        assert!(fixed_sample_test(FixedKind::Hoeffding, 200, 200, 0.9, 0.1).unwrap());
    }

    #[test]
    fn chernoff_example() {
        assert!((margin(FixedKind::Chernoff, 50, 0.9, 0.1) - 0.09597).abs() < 1e-5);
        assert!(fixed_sample_test(FixedKind::Chernoff, 50, 50, 0.9, 0.1).unwrap());
    }

    #[test]
    fn alpha_one_is_plain_comparison() {
        assert_eq!(margin(FixedKind::Hoeffding, 10, 0.5, 1.0), 0.0);
        assert!(fixed_sample_test(FixedKind::Hoeffding, 5, 10, 0.5, 1.0).unwrap());
        assert!(!fixed_sample_test(FixedKind::Chernoff, 4, 10, 0.5, 1.0).unwrap());
    }

    #[test]
    fn degenerate_inputs() {
        assert!(!fixed_sample_test(FixedKind::Hoeffding, 0, 0, 0.5, 0.1).unwrap());
        assert!(fixed_sample_test(FixedKind::Hoeffding, 3, 2, 0.5, 0.1).is_err());
        assert!(fixed_sample_test(FixedKind::Hoeffding, 1, 2, 0.5, 0.0).is_err());
    }

    #[test]
    fn acceptance_is_monotone_in_target() {
        for kind in [FixedKind::Hoeffding, FixedKind::Chernoff] {
            for total in [1usize, 7, 50, 300] {
                for pos in 0..=total {
                    let mut prev = true;
                    for t in 1..100 {
                        let now =
                            fixed_sample_test(kind, pos, total, t as f64 / 100.0, 0.1).unwrap();
                        assert!(prev || !now, "{kind:?} {pos}/{total} at {t}");
                        prev = now;
                    }
                }
            }
        }
    }
}
