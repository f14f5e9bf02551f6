use std::fmt;

use super::precision::uniform_sample;
use super::{check_budgeted, AlgoParams, CascadeMethod, CascadeOutcome, Selection, Tally};
use crate::data::{QueryKind, QuerySpec};
use crate::error::{param, Result};
use crate::estimation::{start_test, BettingState, TestKind};
use crate::sampling::{BudgetedOracle, Draw};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtMethod {
    /// Recall test over one uniform sample.
    Uniform,
    /// Density-cutoff search, then the uniform method above the cutoff.
    Adaptive,
}

impl fmt::Display for RtMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const MAX_PROBES: usize = 64;

/// Largest observed-positive score whose recall test passes, over labels drawn
/// above `floor`.
fn uniform(
    oracle: &mut BudgetedOracle,
    floor: f64,
    target: f64,
    delta: f64,
    estimator: TestKind,
) -> Result<Option<f64>> {
    let positives: Vec<usize> = uniform_sample(oracle, |o| o.draw_above(floor))
        .into_iter()
        .filter_map(|(i, y)| y.then_some(i))
        .collect();
    if target >= 1.0 {
        return Ok(None);
    }
    let kind = match estimator {
        TestKind::Hoeffding | TestKind::Chernoff => estimator,
        _ => TestKind::LowerIid,
    };
    let mut candidates: Vec<f64> = positives.iter().map(|&i| oracle.score(i)).collect();
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();
    for rho in candidates {
        let mut test = start_test(kind, target, delta, None)?;
        for &i in &positives {
            if test.observe(oracle.score(i) > rho)? {
                break;
            }
        }
        if test.accepts() {
            return Ok(Some(rho));
        }
    }
    Ok(None)
}

/// Whether the density window at `rho` is certified sparse. `None` when the
/// stage budget ran out first.
fn probe_sparse(
    oracle: &mut BudgetedOracle,
    rho: f64,
    params: &AlgoParams,
    alpha: f64,
) -> Result<Option<bool>> {
    let mut test = BettingState::upper_iid(params.beta, alpha)?;
    let mut tally = Tally::default();
    loop {
        match oracle.draw_window(rho, params.r) {
            Draw::Label { label, .. } => {
                tally.push(label == 1);
                if test.step(label == 1)? {
                    return Ok(Some(true));
                }
            }
            Draw::BudgetExhausted => return Ok(None),
            Draw::PopulationExhausted => {
                return Ok(Some(tally.n > 0 && tally.mean() < params.beta))
            }
        }
    }
}

/// Binary search for the highest score below which records are sparse.
fn density_cutoff(
    oracle: &mut BudgetedOracle,
    params: &AlgoParams,
    alpha: f64,
) -> Result<Option<f64>> {
    if params.beta <= 0.0 {
        return Ok(None);
    }
    let mut rho = 0.5;
    let mut cutoff = None;
    for _ in 0..MAX_PROBES {
        match probe_sparse(oracle, rho, params, alpha)? {
            Some(true) => {
                cutoff = Some(rho);
                let next = 0.5 * (1.0 + rho);
                if next <= rho {
                    break;
                }
                rho = next;
            }
            _ => break,
        }
    }
    Ok(cutoff)
}

/// Selects a recall-target threshold with `method`.
pub fn run_rt(
    oracle: &mut BudgetedOracle,
    query: &QuerySpec,
    params: &AlgoParams,
    method: RtMethod,
) -> Result<CascadeOutcome> {
    check_budgeted(oracle, query)?;
    let k = oracle.budget_remaining().expect("checked budget");
    let (selection, cutoff) = match method {
        RtMethod::Uniform => {
            let rho = uniform(
                oracle,
                f64::NEG_INFINITY,
                query.target,
                query.delta,
                params.estimator,
            )?;
            (
                rho.map_or(Selection::IncludeAll, Selection::Threshold),
                None,
            )
        }
        RtMethod::Adaptive => {
            if k < 2 {
                return Err(param(
                    "the adaptive recall method needs a budget of at least 2",
                ));
            }
            let half = k / 2;
            let delta = query.delta / 2.0;
            oracle.set_allowance(half);
            let cutoff = density_cutoff(oracle, params, delta)?;
            oracle.set_allowance(half);
            let floor = cutoff.unwrap_or(f64::NEG_INFINITY);
            let rho = uniform(oracle, floor, query.target, delta, params.estimator)?;
            oracle.clear_allowance();
            let selection = match (rho, cutoff) {
                (Some(r), _) => Selection::Threshold(r),
                (None, Some(c)) => Selection::Threshold(c),
                (None, None) => Selection::IncludeAll,
            };
            (selection, cutoff)
        }
    };
    Ok(CascadeOutcome::membership(
        method.name(),
        oracle,
        selection,
        cutoff,
    ))
}

impl CascadeMethod for RtMethod {
    fn name(&self) -> &'static str {
        match self {
            RtMethod::Uniform => "rt-u",
            RtMethod::Adaptive => "rt-a",
        }
    }

    fn query(&self) -> QueryKind {
        QueryKind::Rt
    }

    fn run(
        &self,
        oracle: &mut BudgetedOracle,
        query: &QuerySpec,
        params: &AlgoParams,
    ) -> Result<CascadeOutcome> {
        run_rt(oracle, query, params, *self)
    }
}
