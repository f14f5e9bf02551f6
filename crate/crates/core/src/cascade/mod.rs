//! Threshold selection algorithms for accuracy, precision and recall targets.
//!
//! Each algorithm implements [`CascadeMethod`] and is looked up by name in the
//! global [`registry`].

mod accuracy;
mod precision;
mod recall;

pub use accuracy::{run_at, AtMethod};
pub use precision::{run_pt, PtMethod};
pub use recall::{run_rt, RtMethod};

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::data::{QueryKind, QuerySpec};
use crate::error::{Error, Result};
use crate::estimation::{start_test, MeanTest, TestKind};
use crate::sampling::BudgetedOracle;

/// Tuning knobs shared by the algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgoParams {
    /// Number of percentile candidates.
    #[serde(rename = "M")]
    pub m: usize,
    /// Rejected larger thresholds tolerated before committing.
    pub eta: usize,
    /// Minimum observations before an accuracy threshold may be abandoned.
    /// `None` resolves to `max(10, ceil(0.02 n))`.
    pub c: Option<usize>,
    /// Minimum positive density for recall queries.
    pub beta: f64,
    /// Density window size in records.
    pub r: usize,
    pub estimator: TestKind,
    /// Uniform sample size of the naive accuracy baseline.
    pub sample_size: usize,
}

impl Default for AlgoParams {
    fn default() -> Self {
        Self {
            m: 20,
            eta: 0,
            c: None,
            beta: 0.02,
            r: 150,
            estimator: TestKind::LowerWr,
            sample_size: 400,
        }
    }
}

impl AlgoParams {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        if self.r == 0 {
            return Err(Error::Config("r must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!(
                "beta={} must lie in [0, 1]",
                self.beta
            )));
        }
        if self.sample_size == 0 {
            return Err(Error::Config("sample_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn min_samples(&self, n: usize) -> usize {
        self.c
            .unwrap_or_else(|| 10.max((0.02 * n as f64).ceil() as usize))
    }

    fn alpha(&self, delta: f64) -> f64 {
        delta / (self.eta as f64 + 1.0)
    }
}

/// Outcome of selection for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Threshold(f64),
    /// Nothing validated: the proxy answers no record.
    UseOracleForAll,
    /// Recall fallback: every record is in the answer.
    IncludeAll,
}

impl Selection {
    /// Threshold equivalent for set membership `score > rho`.
    pub fn rho(self) -> f64 {
        match self {
            Selection::Threshold(t) => t,
            Selection::UseOracleForAll => f64::INFINITY,
            Selection::IncludeAll => f64::NEG_INFINITY,
        }
    }

    fn from_option(rho: Option<f64>) -> Self {
        rho.map_or(Selection::UseOracleForAll, Selection::Threshold)
    }
}

/// Selected thresholds, their cost and the answer the cascade produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeOutcome {
    pub method: String,
    /// Keyed by proxy class for per-class methods, otherwise a single entry at 0.
    pub selections: BTreeMap<u32, Selection>,
    /// Density cutoff found by the recall search, if any.
    pub cutoff: Option<f64>,
    /// Oracle labels used, including those the cascade itself requests.
    pub cost: usize,
    /// Records whose labels were bought during selection, ascending.
    pub labeled: Vec<usize>,
    /// Per-record final label (accuracy) or 0/1 membership (precision, recall).
    pub answer: Vec<u32>,
}

impl CascadeOutcome {
    /// The single selection of a non-per-class method.
    pub fn selection(&self) -> Selection {
        self.selections
            .get(&0)
            .copied()
            .unwrap_or(Selection::UseOracleForAll)
    }

    fn labeled_sorted(oracle: &BudgetedOracle) -> Vec<usize> {
        let mut labeled = oracle.labeled().to_vec();
        labeled.sort_unstable();
        labeled
    }

    /// Precision/recall outcome: members are `score > rho` plus every
    /// observed positive.
    fn membership(
        method: &str,
        oracle: &BudgetedOracle,
        selection: Selection,
        cutoff: Option<f64>,
    ) -> Self {
        let rho = selection.rho();
        let answer = (0..oracle.len())
            .map(|i| u32::from(oracle.score(i) > rho || oracle.cached_label(i) == Some(1)))
            .collect();
        Self {
            method: method.to_string(),
            selections: BTreeMap::from([(0, selection)]),
            cutoff,
            cost: oracle.charges(),
            labeled: Self::labeled_sorted(oracle),
            answer,
        }
    }

    /// Accuracy outcome: proxy answers unlabeled records above their class
    /// threshold; the oracle answers everything else.
    fn labeling(
        method: &str,
        oracle: &BudgetedOracle,
        selections: BTreeMap<u32, Selection>,
        per_class: bool,
    ) -> Self {
        let mut cost = 0;
        let answer = (0..oracle.len())
            .map(|i| {
                let key = if per_class { oracle.proxy_label(i) } else { 0 };
                let rho = selections.get(&key).map_or(f64::INFINITY, |s| s.rho());
                match oracle.cached_label(i) {
                    None if oracle.score(i) > rho => oracle.proxy_label(i),
                    _ => {
                        cost += 1;
                        oracle.cascade_label(i)
                    }
                }
            })
            .collect();
        Self {
            method: method.to_string(),
            selections,
            cutoff: None,
            cost,
            labeled: Self::labeled_sorted(oracle),
            answer,
        }
    }
}

/// Smallest candidate with a positive estimate that has at most `eta`
/// negative estimates at or above it. `candidates` are descending.
pub fn select_with_tolerance(candidates: &[f64], estimates: &[bool], eta: usize) -> Option<f64> {
    let mut misses = 0;
    let mut best = None;
    for (&rho, &ok) in candidates.iter().zip(estimates) {
        if !ok {
            misses += 1;
            if misses > eta {
                break;
            }
        } else {
            best = Some(rho);
        }
    }
    best
}

/// Accuracy the proxy region of size `n_rho` must reach so the whole dataset
/// of size `n` reaches `target`. `None` for an empty region.
pub fn adjusted_accuracy_target(n: usize, n_rho: usize, target: f64) -> Option<f64> {
    (n_rho > 0).then(|| {
        let t = (n_rho as f64 - n as f64 * (1.0 - target)) / n_rho as f64;
        // absorb rounding in n * (1 - target)
        if t < 1e-12 {
            0.0
        } else {
            t
        }
    })
}

/// Running count of Bernoulli observations.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Tally {
    pub n: usize,
    pub ones: usize,
}

impl Tally {
    pub fn push(&mut self, y: bool) {
        self.n += 1;
        self.ones += usize::from(y);
    }

    pub fn mean(&self) -> f64 {
        self.ones as f64 / self.n as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        (m * (1.0 - m)).sqrt()
    }
}

/// A test of `mean >= target`, or `None` when no finite sample can certify it.
pub(crate) fn target_test(
    kind: TestKind,
    target: f64,
    alpha: f64,
    population: usize,
) -> Result<Option<Box<dyn MeanTest + Send>>> {
    if target >= 1.0 {
        return Ok(None);
    }
    start_test(kind, target, alpha, Some(population)).map(Some)
}

/// Betting estimators only; the adaptive algorithms test after every draw.
pub(crate) fn sequential_kind(kind: TestKind) -> Result<TestKind> {
    match kind {
        TestKind::LowerIid | TestKind::LowerWr => Ok(kind),
        other => Err(Error::Config(format!(
            "estimator {other} cannot drive an adaptive method; use betting-wr or betting-iid"
        ))),
    }
}

/// One selection algorithm, selectable by name.
pub trait CascadeMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn query(&self) -> QueryKind;
    fn run(
        &self,
        oracle: &mut BudgetedOracle,
        query: &QuerySpec,
        params: &AlgoParams,
    ) -> Result<CascadeOutcome>;
}

/// Name-indexed set of algorithms.
pub struct Registry {
    methods: Vec<Box<dyn CascadeMethod>>,
}

impl Registry {
    pub fn new() -> Self {
        Self {
            methods: Vec::new(),
        }
    }

    pub fn register(&mut self, method: Box<dyn CascadeMethod>) -> Result<()> {
        if self.methods.iter().any(|m| m.name() == method.name()) {
            return Err(Error::Config(format!(
                "method {} registered twice",
                method.name()
            )));
        }
        self.methods.push(method);
        Ok(())
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::new();
        let builtins: Vec<Box<dyn CascadeMethod>> = vec![
            Box::new(PtMethod::Naive),
            Box::new(PtMethod::Uniform),
            Box::new(PtMethod::Adaptive),
            Box::new(AtMethod::Naive),
            Box::new(AtMethod::Adaptive),
            Box::new(AtMethod::PerClass),
            Box::new(RtMethod::Uniform),
            Box::new(RtMethod::Adaptive),
        ];
        for m in builtins {
            reg.register(m).expect("builtin names are unique");
        }
        reg
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.iter().map(|m| m.name()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&dyn CascadeMethod> {
        self.methods
            .iter()
            .find(|m| m.name() == name)
            .map(|m| m.as_ref())
    }

    /// Looks up `name`, also accepting a short form such as `a` that is
    /// qualified by the query kind (`pt-a`).
    pub fn resolve(&self, name: &str, query: QueryKind) -> Result<&dyn CascadeMethod> {
        let qualified = format!("{query}-{name}");
        let method = self
            .get(name)
            .or_else(|| self.get(&qualified))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method {name:?}; available: {}",
                    self.names().join(", ")
                ))
            })?;
        if method.query() != query {
            return Err(Error::Config(format!(
                "method {} answers {} queries, not {query}",
                method.name(),
                method.query()
            )));
        }
        Ok(method)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

/// The process-wide registry of built-in methods.
pub fn registry() -> &'static Registry {
    static REGISTRY: OnceLock<Registry> = OnceLock::new();
    REGISTRY.get_or_init(Registry::with_builtins)
}

/// Runs the named method after checking the query and parameters.
pub fn run_method(
    name: &str,
    oracle: &mut BudgetedOracle,
    query: &QuerySpec,
    params: &AlgoParams,
) -> Result<CascadeOutcome> {
    query.validate()?;
    params.validate()?;
    let method = registry().resolve(name, query.kind)?;
    method.run(oracle, query, params)
}

pub(crate) fn check_budgeted(oracle: &BudgetedOracle, query: &QuerySpec) -> Result<()> {
    if oracle.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if query.kind != QueryKind::At && !oracle.is_binary() {
        return Err(Error::InvalidTask(
            "precision and recall need binary labels".into(),
        ));
    }
    if query.kind != QueryKind::At && oracle.budget().is_none() {
        return Err(Error::Config(format!(
            "{} queries need a label budget",
            query.kind
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tolerance_examples() {
        let c = [0.9, 0.7, 0.5, 0.3];
        let e = [true, true, false, true];
        assert_eq!(select_with_tolerance(&c, &e, 0), Some(0.7));
        assert_eq!(select_with_tolerance(&c, &e, 1), Some(0.3));
        assert_eq!(select_with_tolerance(&c, &[false; 4], 4), None);
        assert_eq!(
            select_with_tolerance(&c, &[false, true, true, true], 0),
            None
        );
    }

    #[test]
    fn adjusted_target_examples() {
        assert!((adjusted_accuracy_target(1000, 800, 0.9).unwrap() - 0.875).abs() < 1e-12);
        assert!((adjusted_accuracy_target(1000, 1000, 0.9).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(adjusted_accuracy_target(1000, 100, 0.9), Some(0.0));
        assert_eq!(adjusted_accuracy_target(1000, 0, 0.9), None);
    }

    #[test]
    fn registry_resolution() {
        let reg = registry();
        assert_eq!(reg.names().len(), 8);
        assert_eq!(reg.resolve("a", QueryKind::Pt).unwrap().name(), "pt-a");
        assert_eq!(reg.resolve("aa", QueryKind::At).unwrap().name(), "at-aa");
        assert_eq!(reg.resolve("rt-u", QueryKind::Rt).unwrap().name(), "rt-u");
        assert!(reg.resolve("pt-a", QueryKind::Rt).is_err());
        assert!(reg.resolve("zz", QueryKind::Pt).is_err());
        let mut fresh = Registry::new();
        fresh.register(Box::new(PtMethod::Adaptive)).unwrap();
        assert!(fresh.register(Box::new(PtMethod::Adaptive)).is_err());
    }

    #[test]
    fn params_serde_defaults() {
        let p: AlgoParams = serde_json::from_str(r#"{"M": 5}"#).unwrap();
        assert_eq!(p.m, 5);
        assert_eq!(p.r, 150);
        assert_eq!(p.min_samples(10_000), 200);
        assert_eq!(p.min_samples(100), 10);
        assert!(serde_json::from_str::<AlgoParams>(r#"{"bogus": 1}"#).is_err());
    }

    proptest! {
        #[test]
        fn full_tolerance_is_plain_minimum(estimates in prop::collection::vec(any::<bool>(), 1..30)) {
            let candidates: Vec<f64> = (0..estimates.len()).map(|i| 1.0 - i as f64 / 40.0).collect();
            let plain = candidates
                .iter()
                .zip(&estimates)
                .filter(|(_, &ok)| ok)
                .map(|(&c, _)| c)
                .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.min(c))));
            prop_assert_eq!(select_with_tolerance(&candidates, &estimates, estimates.len()), plain);
        }
    }
}
