use std::fmt;

use super::{
    check_budgeted, select_with_tolerance, sequential_kind, target_test, AlgoParams, CascadeMethod,
    CascadeOutcome, Selection, Tally,
};
use crate::data::{candidates_from_desc, QueryKind, QuerySpec};
use crate::error::Result;
use crate::estimation::{fixed_sample_test, FixedKind, TestKind};
use crate::sampling::{BudgetedOracle, Draw};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtMethod {
    /// Union-bounded fixed-sample test over every observed score.
    Naive,
    /// Sequential tests over one uniform sample.
    Uniform,
    /// Adaptive sampling from each candidate's own region.
    Adaptive,
}

impl fmt::Display for PtMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Draws uniformly until the budget or the dataset runs out.
pub(crate) fn uniform_sample(
    oracle: &mut BudgetedOracle,
    mut draw: impl FnMut(&mut BudgetedOracle) -> Draw,
) -> Vec<(usize, bool)> {
    let mut sample = Vec::new();
    while let Draw::Label { index, label, .. } = draw(oracle) {
        sample.push((index, label == 1));
    }
    sample
}

fn naive(oracle: &mut BudgetedOracle, query: &QuerySpec, params: &AlgoParams) -> Option<f64> {
    let sample = uniform_sample(oracle, |o| o.draw_any());
    let mut candidates: Vec<f64> = sample.iter().map(|&(i, _)| oracle.score(i)).collect();
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();
    let kind = if params.estimator == TestKind::Chernoff {
        FixedKind::Chernoff
    } else {
        FixedKind::Hoeffding
    };
    let alpha = query.delta / candidates.len().max(1) as f64;
    candidates.into_iter().rev().find(|&rho| {
        let mut t = Tally::default();
        for &(i, y) in &sample {
            if oracle.score(i) > rho {
                t.push(y);
            }
        }
        fixed_sample_test(kind, t.ones, t.n, query.target, alpha).unwrap_or(false)
    })
}

fn uniform(
    oracle: &mut BudgetedOracle,
    query: &QuerySpec,
    params: &AlgoParams,
) -> Result<Option<f64>> {
    let candidates = candidates_from_desc(oracle.scores_desc(), params.m)?;
    let sample = uniform_sample(oracle, |o| o.draw_any());
    let alpha = params.alpha(query.delta);
    let mut estimates = Vec::new();
    let mut misses = 0;
    for &rho in &candidates {
        let mut accepted = false;
        if let Some(mut test) = target_test(
            params.estimator,
            query.target,
            alpha,
            oracle.count_above(rho),
        )? {
            for &(i, y) in &sample {
                if oracle.score(i) > rho && test.observe(y)? {
                    break;
                }
            }
            accepted = test.accepts();
        }
        estimates.push(accepted);
        if !accepted {
            misses += 1;
            if misses > params.eta {
                break;
            }
        }
    }
    Ok(select_with_tolerance(&candidates, &estimates, params.eta))
}

enum Probe {
    Accept,
    Reject,
    OutOfBudget,
}

fn adaptive(
    oracle: &mut BudgetedOracle,
    query: &QuerySpec,
    params: &AlgoParams,
) -> Result<Option<f64>> {
    let kind = sequential_kind(params.estimator)?;
    let candidates = candidates_from_desc(oracle.scores_desc(), params.m)?;
    let alpha = params.alpha(query.delta);
    let mut estimates = Vec::new();
    let mut misses = 0;
    'candidates: for &rho in &candidates {
        let n_rho = oracle.count_above(rho);
        let c = params.min_samples(n_rho);
        let mut test = target_test(kind, query.target, alpha, n_rho.max(1))?;
        let mut tally = Tally::default();
        let probe = loop {
            match oracle.draw_above(rho) {
                Draw::Label { label, .. } => {
                    let y = label == 1;
                    tally.push(y);
                    if let Some(t) = test.as_mut() {
                        if t.observe(y)? {
                            break Probe::Accept;
                        }
                    }
                    if params.eta > 0 && tally.n >= c && tally.mean() - tally.std() < query.target {
                        break Probe::Reject;
                    }
                }
                Draw::BudgetExhausted => break Probe::OutOfBudget,
                Draw::PopulationExhausted => {
                    let exact = tally.n == 0 || tally.mean() >= query.target;
                    break if exact { Probe::Accept } else { Probe::Reject };
                }
            }
        };
        match probe {
            Probe::Accept => estimates.push(true),
            Probe::Reject => {
                estimates.push(false);
                misses += 1;
                if misses > params.eta {
                    break 'candidates;
                }
            }
            Probe::OutOfBudget => break 'candidates,
        }
    }
    Ok(select_with_tolerance(&candidates, &estimates, params.eta))
}

/// Selects a precision-target threshold with `method`.
pub fn run_pt(
    oracle: &mut BudgetedOracle,
    query: &QuerySpec,
    params: &AlgoParams,
    method: PtMethod,
) -> Result<CascadeOutcome> {
    check_budgeted(oracle, query)?;
    let rho = match method {
        PtMethod::Naive => naive(oracle, query, params),
        PtMethod::Uniform => uniform(oracle, query, params)?,
        PtMethod::Adaptive => adaptive(oracle, query, params)?,
    };
    Ok(CascadeOutcome::membership(
        method.name(),
        oracle,
        Selection::from_option(rho),
        None,
    ))
}

impl CascadeMethod for PtMethod {
    fn name(&self) -> &'static str {
        match self {
            PtMethod::Naive => "pt-naive",
            PtMethod::Uniform => "pt-u",
            PtMethod::Adaptive => "pt-a",
        }
    }

    fn query(&self) -> QueryKind {
        QueryKind::Pt
    }

    fn run(
        &self,
        oracle: &mut BudgetedOracle,
        query: &QuerySpec,
        params: &AlgoParams,
    ) -> Result<CascadeOutcome> {
        run_pt(oracle, query, params, *self)
    }
}
