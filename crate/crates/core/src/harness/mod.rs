//! Seeded repeated-run experiments: configuration, ground-truth evaluation,
//! aggregation and report output.

mod sweep;
mod validate;

pub use sweep::{sweep, SweepAxis, SweepSpec};
pub use validate::{
    default_grid, validate_estimators, validate_with, ValidationCase, ValidationPoint,
    ValidationSummary,
};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{registry, AlgoParams, CascadeOutcome, Selection};
use crate::data::{
    dense_recall, gen_adversarial, gen_imagenet_like, gen_synthetic, inject_noise, load_dataset,
    metric_at, Dataset, MetricKind, QueryKind, QuerySpec,
};
use crate::error::{Error, Result};
use crate::sampling::BudgetedOracle;
use crate::seed::derive_seed;

/// Where the dataset of an experiment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    File {
        path: PathBuf,
    },
    Synthetic {
        n: usize,
        pos_frac: f64,
        seed: u64,
    },
    ImagenetLike {
        n: usize,
        positives: usize,
        min_score: f64,
        seed: u64,
    },
}

/// Modification applied to a dataset after it is loaded or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    Adversarial { start_rank: usize, width: usize },
    Noise { sigma: f64, seed: u64 },
}

fn default_runs() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<Transform>,
    pub query: QuerySpec,
    pub method: String,
    #[serde(default)]
    pub params: AlgoParams,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Worker threads. Never echoed: reports must not depend on it.
    #[serde(default, skip_serializing)]
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec, query: QuerySpec, method: &str) -> Self {
        Self {
            dataset,
            transforms: Vec::new(),
            query,
            method: method.to_string(),
            params: AlgoParams::default(),
            runs: default_runs(),
            base_seed: 0,
            out: None,
            sweep: None,
            jobs: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        self.query.validate()?;
        self.params.validate()?;
        registry().resolve(&self.method, self.query.kind)?;
        Ok(())
    }

    /// Builds the dataset described by `dataset` and `transforms`.
    pub fn build_dataset(&self) -> Result<Dataset> {
        let mut ds = match &self.dataset {
            DatasetSpec::File { path } => load_dataset(path)?,
            DatasetSpec::Synthetic { n, pos_frac, seed } => gen_synthetic(*n, *pos_frac, *seed)?,
            DatasetSpec::ImagenetLike {
                n,
                positives,
                min_score,
                seed,
            } => gen_imagenet_like(*n, *positives, *min_score, *seed)?,
        };
        for t in &self.transforms {
            ds = match *t {
                Transform::Adversarial { start_rank, width } => {
                    gen_adversarial(&ds, start_rank, width)?
                }
                Transform::Noise { sigma, seed } => inject_noise(&ds, sigma, seed)?,
            };
        }
        Ok(ds)
    }
}

/// One seeded run scored against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub selections: BTreeMap<u32, Selection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    pub cost: usize,
    /// Avoided oracle fraction (accuracy), recall (precision) or precision
    /// (recall) at the selected threshold. `None` when undefined.
    pub utility: Option<f64>,
    pub met_target: bool,
    /// Recall target evaluated on the dense subset (recall queries only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub met_target_dense: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer_recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    /// Mean over runs with a defined utility.
    pub mean_utility: Option<f64>,
    /// Population standard deviation over the same runs.
    pub std_utility: Option<f64>,
    pub met_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub met_fraction_dense: Option<f64>,
    pub mean_cost: f64,
}

impl Aggregates {
    pub fn from_runs(runs: &[RunRecord]) -> Self {
        let n = runs.len() as f64;
        let utilities: Vec<f64> = runs.iter().filter_map(|r| r.utility).collect();
        let (mean_utility, std_utility) = if utilities.is_empty() {
            (None, None)
        } else {
            let k = utilities.len() as f64;
            let mean = utilities.iter().sum::<f64>() / k;
            let var = utilities.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / k;
            (Some(mean), Some(var.sqrt()))
        };
        let dense: Vec<bool> = runs.iter().filter_map(|r| r.met_target_dense).collect();
        Self {
            mean_utility,
            std_utility,
            met_fraction: runs.iter().filter(|r| r.met_target).count() as f64 / n,
            met_fraction_dense: (!dense.is_empty())
                .then(|| dense.iter().filter(|&&d| d).count() as f64 / dense.len() as f64),
            mean_cost: runs.iter().map(|r| r.cost as f64).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dataset_size: usize,
    pub runs: Vec<RunRecord>,
    pub aggregates: Aggregates,
}

fn answer_set_metrics(ds: &Dataset, answer: &[u32]) -> (Option<f64>, Option<f64>) {
    let (mut tp, mut chosen) = (0usize, 0usize);
    for (r, &a) in ds.records().iter().zip(answer) {
        if a == 1 {
            chosen += 1;
            tp += usize::from(r.is_positive());
        }
    }
    let positives = ds.positives();
    (
        (chosen > 0).then(|| tp as f64 / chosen as f64),
        (positives > 0).then(|| tp as f64 / positives as f64),
    )
}

/// Scores an outcome against the ground truth in `dataset`.
pub fn evaluate(
    dataset: &Dataset,
    query: &QuerySpec,
    params: &AlgoParams,
    outcome: &CascadeOutcome,
    run: usize,
    seed: u64,
) -> Result<RunRecord> {
    let n = dataset.len();
    let rho = outcome.selection().rho();
    let mut record = RunRecord {
        run,
        seed,
        selections: outcome.selections.clone(),
        cutoff: outcome.cutoff,
        cost: outcome.cost,
        utility: None,
        met_target: false,
        met_target_dense: None,
        answer_accuracy: None,
        answer_precision: None,
        answer_recall: None,
    };
    match query.kind {
        QueryKind::At => {
            let correct = dataset
                .records()
                .iter()
                .zip(&outcome.answer)
                .filter(|(r, &a)| r.oracle_label == a)
                .count();
            let accuracy = correct as f64 / n as f64;
            record.utility = Some((n - outcome.cost) as f64 / n as f64);
            record.met_target = accuracy >= query.target;
            record.answer_accuracy = Some(accuracy);
        }
        QueryKind::Pt => {
            record.utility = metric_at(dataset, MetricKind::Recall, rho)?;
            record.met_target =
                metric_at(dataset, MetricKind::Precision, rho)?.is_none_or(|p| p >= query.target);
        }
        QueryKind::Rt => {
            record.utility = metric_at(dataset, MetricKind::Precision, rho)?;
            record.met_target =
                metric_at(dataset, MetricKind::Recall, rho)?.is_none_or(|r| r >= query.target);
            record.met_target_dense = Some(
                dense_recall(dataset, params.beta, params.r, Some(rho))?
                    .is_none_or(|r| r >= query.target),
            );
        }
    }
    if query.kind != QueryKind::At {
        let (p, r) = answer_set_metrics(dataset, &outcome.answer);
        record.answer_precision = p;
        record.answer_recall = r;
    }
    Ok(record)
}

/// Runs the configured method once with the seed of run `run`.
pub fn run_once(
    config: &ExperimentConfig,
    dataset: &Dataset,
    run: usize,
) -> Result<(CascadeOutcome, RunRecord)> {
    let method = registry().resolve(&config.method, config.query.kind)?;
    let seed = derive_seed(config.base_seed, run as u64);
    let mut oracle = BudgetedOracle::new(dataset, config.query.budget, seed);
    let outcome = method.run(&mut oracle, &config.query, &config.params)?;
    let record = evaluate(dataset, &config.query, &config.params, &outcome, run, seed)?;
    Ok((outcome, record))
}

fn check_dataset(config: &ExperimentConfig, dataset: &Dataset) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.query.kind != QueryKind::At && !dataset.is_binary() {
        return Err(Error::Config(format!(
            "{} queries need binary labels but the dataset has other classes",
            config.query.kind
        )));
    }
    Ok(())
}

/// Runs `config.runs` seeded repetitions on up to `jobs` threads. The report
/// does not depend on `jobs`.
pub fn run_trials(
    config: &ExperimentConfig,
    dataset: &Dataset,
    jobs: usize,
) -> Result<ExperimentReport> {
    config.validate()?;
    check_dataset(config, dataset)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let runs = pool.install(|| {
        (0..config.runs)
            .into_par_iter()
            .map(|i| run_once(config, dataset, i).map(|(_, rec)| rec))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ExperimentReport {
        config: config.clone(),
        dataset_size: dataset.len(),
        aggregates: Aggregates::from_runs(&runs),
        runs,
    })
}

fn selection_cell(selections: &BTreeMap<u32, Selection>) -> String {
    let fmt = |s: &Selection| match s {
        Selection::Threshold(t) => format!("{t}"),
        Selection::UseOracleForAll => "use_oracle_for_all".into(),
        Selection::IncludeAll => "include_all".into(),
    };
    if selections.len() == 1 && selections.contains_key(&0) {
        return fmt(&selections[&0]);
    }
    selections
        .iter()
        .map(|(c, s)| format!("{c}:{}", fmt(s)))
        .collect::<Vec<_>>()
        .join(";")
}

fn opt_cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per run.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "run",
            "seed",
            "threshold",
            "cutoff",
            "cost",
            "utility",
            "met_target",
            "met_target_dense",
        ])?;
        for r in &self.runs {
            w.write_record([
                r.run.to_string(),
                r.seed.to_string(),
                selection_cell(&r.selections),
                opt_cell(r.cutoff),
                r.cost.to_string(),
                opt_cell(r.utility),
                r.met_target.to_string(),
                opt_cell(r.met_target_dense),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes the JSON report to `path` and the per-run CSV beside it.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json()?)?;
        let csv_path = path.with_extension("csv");
        fs::write(&csv_path, self.to_csv()?)?;
        Ok(csv_path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_pt() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            DatasetSpec::Synthetic {
                n: 2000,
                pos_frac: 0.1,
                seed: 1,
            },
            QuerySpec::precision(0.9, 0.1, 200).unwrap(),
            "a",
        );
        c.runs = 6;
        c
    }

    #[test]
    fn single_run_aggregates() {
        let mut c = small_pt();
        c.runs = 1;
        let ds = c.build_dataset().unwrap();
        let rep = run_trials(&c, &ds, 1).unwrap();
        assert_eq!(rep.runs.len(), 1);
        assert_eq!(rep.aggregates.mean_utility, rep.runs[0].utility);
        assert_eq!(rep.aggregates.std_utility, rep.runs[0].utility.map(|_| 0.0));
        assert_eq!(
            rep.aggregates.met_fraction,
            f64::from(u8::from(rep.runs[0].met_target))
        );
    }

    #[test]
    fn reports_are_identical_across_job_counts() {
        let c = small_pt();
        let ds = c.build_dataset().unwrap();
        let a = run_trials(&c, &ds, 1).unwrap();
        let b = run_trials(&c, &ds, 3).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        let seeds: Vec<usize> = a.runs.iter().map(|r| r.run).collect();
        assert_eq!(seeds, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let c = small_pt();
        let ds = c.build_dataset().unwrap();
        let rep = run_trials(&c, &ds, 2).unwrap();
        assert_eq!(Aggregates::from_runs(&rep.runs), rep.aggregates);
    }

    #[test]
    fn multiclass_rejected_for_precision() {
        let c = small_pt();
        let ds = Dataset::from_scored_labels(&[(0.5, 2), (0.4, 0)]).unwrap();
        assert!(matches!(run_trials(&c, &ds, 1), Err(Error::Config(_))));
    }

    #[test]
    fn jobs_is_read_but_not_echoed() {
        let c = small_pt();
        let text = serde_json::to_string(&c).unwrap();
        let with_jobs = text.replacen('{', "{\"jobs\": 3,", 1);
        let parsed = ExperimentConfig::from_json(&with_jobs).unwrap();
        assert_eq!(parsed.jobs, Some(3));
        assert!(!serde_json::to_string(&parsed).unwrap().contains("jobs"));
    }

    #[test]
    fn config_json_roundtrip_and_unknown_keys() {
        let c = small_pt();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        let bad = text.replacen('{', "{\"bogus\": 1,", 1);
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn transforms_apply_in_order() {
        let mut c = small_pt();
        c.transforms = vec![Transform::Adversarial {
            start_rank: 0,
            width: 10,
        }];
        let ds = c.build_dataset().unwrap();
        assert_eq!(ds.positives(), 210);
    }

    #[test]
    fn recall_runs_record_dense_flag() {
        let mut c = ExperimentConfig::new(
            DatasetSpec::Synthetic {
                n: 2000,
                pos_frac: 0.1,
                seed: 1,
            },
            QuerySpec::recall(0.9, 0.1, 200).unwrap(),
            "rt-a",
        );
        c.runs = 3;
        let ds = c.build_dataset().unwrap();
        let rep = run_trials(&c, &ds, 1).unwrap();
        assert!(rep.runs.iter().all(|r| r.met_target_dense.is_some()));
        assert!(rep.aggregates.met_fraction_dense.is_some());
    }
}
