use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::estimation::{mc_false_positive_rate, TestKind};
use crate::seed::derive_seed;

/// One null configuration of an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub kind: TestKind,
    pub mu: f64,
    pub m: f64,
    pub alpha: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCase {
    #[serde(flatten)]
    pub point: ValidationPoint,
    pub rate: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub trials: usize,
    pub seed: u64,
    pub cases: Vec<ValidationCase>,
    pub pass: bool,
}

/// Lower tests at two sub-target means, the upper test at a super-target mean,
/// each at two levels.
pub fn default_grid() -> Vec<ValidationPoint> {
    let mut grid = Vec::new();
    for alpha in [0.05, 0.1] {
        for kind in [
            TestKind::LowerIid,
            TestKind::LowerWr,
            TestKind::Hoeffding,
            TestKind::Chernoff,
        ] {
            for (mu, m) in [(0.85, 0.9), (0.6, 0.7)] {
                grid.push(ValidationPoint {
                    kind,
                    mu,
                    m,
                    alpha,
                    horizon: 1000,
                });
            }
        }
        grid.push(ValidationPoint {
            kind: TestKind::UpperIid,
            mu: 0.95,
            m: 0.9,
            alpha,
            horizon: 1000,
        });
    }
    grid
}

/// Checks each point's rejection rate against `alpha` plus three binomial
/// standard errors, using `rate` to measure it.
pub fn validate_with(
    grid: &[ValidationPoint],
    trials: usize,
    seed: u64,
    rate: impl Fn(&ValidationPoint, usize, u64) -> Result<f64>,
) -> Result<ValidationSummary> {
    if trials == 0 {
        return Err(param("trials must be positive"));
    }
    let cases = grid
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let r = rate(p, trials, derive_seed(seed, i as u64))?;
            let bound = p.alpha + 3.0 * (p.alpha * (1.0 - p.alpha) / trials as f64).sqrt();
            Ok(ValidationCase {
                point: *p,
                rate: r,
                bound,
                pass: r <= bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = cases.iter().all(|c| c.pass);
    Ok(ValidationSummary {
        trials,
        seed,
        cases,
        pass,
    })
}

/// Monte Carlo false-positive check of every estimator on [`default_grid`].
pub fn validate_estimators(trials: usize, seed: u64) -> Result<ValidationSummary> {
    validate_with(&default_grid(), trials, seed, |p, t, s| {
        mc_false_positive_rate(p.kind, p.mu, p.m, p.alpha, p.horizon, t, s)
    })
}
