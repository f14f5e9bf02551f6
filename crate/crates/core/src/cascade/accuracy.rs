use std::collections::BTreeMap;
use std::fmt;

use super::precision::uniform_sample;
use super::{
    adjusted_accuracy_target, check_budgeted, select_with_tolerance, sequential_kind, target_test,
    AlgoParams, CascadeMethod, CascadeOutcome, Selection, Tally,
};
use crate::data::{candidates_from_desc, QueryKind, QuerySpec};
use crate::error::Result;
use crate::estimation::{fixed_sample_test, FixedKind, TestKind};
use crate::sampling::{BudgetedOracle, Draw};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtMethod {
    /// Fixed-sample baseline on one uniform sample.
    Naive,
    /// One adaptive threshold for all records.
    Adaptive,
    /// One adaptive threshold per proxy class.
    PerClass,
}

impl fmt::Display for AtMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Records a threshold search may see: all of them, or one proxy class.
#[derive(Clone, Copy)]
enum Scope {
    All,
    Class(u32),
}

impl Scope {
    fn draw(self, oracle: &mut BudgetedOracle, rho: f64) -> Draw {
        match self {
            Scope::All => oracle.draw_above(rho),
            Scope::Class(c) => oracle.draw_above_in_class(rho, c),
        }
    }
}

/// Adaptive search over the candidates of `scores_desc` (the scope's scores).
fn search(
    oracle: &mut BudgetedOracle,
    scope: Scope,
    scores_desc: &[f64],
    target: f64,
    delta: f64,
    params: &AlgoParams,
) -> Result<Option<f64>> {
    let kind = sequential_kind(params.estimator)?;
    let n = scores_desc.len();
    let candidates = candidates_from_desc(scores_desc, params.m.min(n))?;
    let alpha = params.alpha(delta);
    let c = params.min_samples(n);
    let mut estimates = Vec::new();
    let mut misses = 0;
    for &rho in &candidates {
        let n_rho = scores_desc.partition_point(|&s| s > rho);
        let accepted = match adjusted_accuracy_target(n, n_rho, target) {
            None => true,
            Some(t) if t <= 0.0 => true,
            Some(t) => {
                let mut test = target_test(kind, t, alpha, n_rho)?;
                let mut tally = Tally::default();
                loop {
                    match scope.draw(oracle, rho) {
                        Draw::Label { index, label, .. } => {
                            let y = oracle.proxy_label(index) == label;
                            tally.push(y);
                            if let Some(test) = test.as_mut() {
                                if test.observe(y)? {
                                    break true;
                                }
                            }
                            if tally.n >= c && tally.mean() - tally.std() < t {
                                break false;
                            }
                        }
                        Draw::PopulationExhausted => break tally.n > 0 && tally.mean() >= t,
                        Draw::BudgetExhausted => break false,
                    }
                }
            }
        };
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

fn naive(oracle: &mut BudgetedOracle, query: &QuerySpec, params: &AlgoParams) -> Option<f64> {
    let n = oracle.len();
    let mut remaining = params.sample_size;
    let sample: Vec<(usize, bool)> = uniform_sample(oracle, |o| {
        if remaining == 0 {
            return Draw::BudgetExhausted;
        }
        remaining -= 1;
        o.draw_any()
    })
    .into_iter()
    .map(|(i, _)| {
        (
            i,
            oracle.proxy_label(i) == oracle.cached_label(i).expect("sampled"),
        )
    })
    .collect();
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
        match adjusted_accuracy_target(n, oracle.count_above(rho), query.target) {
            None => true,
            Some(t) if t <= 0.0 => true,
            Some(t) => {
                let mut tally = Tally::default();
                for &(i, y) in &sample {
                    if oracle.score(i) > rho {
                        tally.push(y);
                    }
                }
                fixed_sample_test(kind, tally.ones, tally.n, t, alpha).unwrap_or(false)
            }
        }
    })
}

/// Selects accuracy-target thresholds with `method`.
pub fn run_at(
    oracle: &mut BudgetedOracle,
    query: &QuerySpec,
    params: &AlgoParams,
    method: AtMethod,
) -> Result<CascadeOutcome> {
    check_budgeted(oracle, query)?;
    let (selections, per_class) = match method {
        AtMethod::Naive => {
            let rho = naive(oracle, query, params);
            (BTreeMap::from([(0, Selection::from_option(rho))]), false)
        }
        AtMethod::Adaptive => {
            let scores = oracle.scores_desc().to_vec();
            let rho = search(
                oracle,
                Scope::All,
                &scores,
                query.target,
                query.delta,
                params,
            )?;
            (BTreeMap::from([(0, Selection::from_option(rho))]), false)
        }
        AtMethod::PerClass => {
            let classes = oracle.proxy_classes();
            let delta = query.delta / classes.len() as f64;
            let mut selections = BTreeMap::new();
            for class in classes {
                let scores = oracle.class_scores_desc(class);
                let rho = search(
                    oracle,
                    Scope::Class(class),
                    &scores,
                    query.target,
                    delta,
                    params,
                )?;
                selections.insert(class, Selection::from_option(rho));
            }
            (selections, true)
        }
    };
    Ok(CascadeOutcome::labeling(
        method.name(),
        oracle,
        selections,
        per_class,
    ))
}

impl CascadeMethod for AtMethod {
    fn name(&self) -> &'static str {
        match self {
            AtMethod::Naive => "at-naive",
            AtMethod::Adaptive => "at-aa",
            AtMethod::PerClass => "at-am",
        }
    }

    fn query(&self) -> QueryKind {
        QueryKind::At
    }

    fn run(
        &self,
        oracle: &mut BudgetedOracle,
        query: &QuerySpec,
        params: &AlgoParams,
    ) -> Result<CascadeOutcome> {
        run_at(oracle, query, params, *self)
    }
}
