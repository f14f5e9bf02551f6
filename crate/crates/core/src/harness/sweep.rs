use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{run_trials, ExperimentConfig, ExperimentReport};
use crate::cascade::registry;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    M,
    #[serde(rename = "c")]
    C,
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "beta")]
    Beta,
    T,
    #[serde(rename = "k")]
    K,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::M => "M",
            SweepAxis::C => "c",
            SweepAxis::Eta => "eta",
            SweepAxis::Beta => "beta",
            SweepAxis::T => "T",
            SweepAxis::K => "k",
        }
    }

    fn applies_to(self, method: &str) -> bool {
        match self {
            SweepAxis::M => matches!(method, "pt-u" | "pt-a" | "at-aa" | "at-am"),
            SweepAxis::C => matches!(method, "pt-a" | "at-aa" | "at-am"),
            SweepAxis::Eta => matches!(method, "pt-u" | "pt-a" | "at-aa" | "at-am"),
            SweepAxis::Beta => method == "rt-a",
            SweepAxis::T => true,
            SweepAxis::K => method.starts_with("pt-") || method.starts_with("rt-"),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepAxis::M,
            SweepAxis::C,
            SweepAxis::Eta,
            SweepAxis::Beta,
            SweepAxis::T,
            SweepAxis::K,
        ]
        .into_iter()
        .find(|a| a.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown sweep axis {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn as_count(axis: SweepAxis, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!(
            "{axis} takes non-negative integers, got {v}"
        )))
    }
}

fn with_value(base: &ExperimentConfig, axis: SweepAxis, v: f64) -> Result<ExperimentConfig> {
    let mut c = base.clone();
    c.sweep = None;
    match axis {
        SweepAxis::M => c.params.m = as_count(axis, v)?,
        SweepAxis::C => c.params.c = Some(as_count(axis, v)?),
        SweepAxis::Eta => c.params.eta = as_count(axis, v)?,
        SweepAxis::Beta => c.params.beta = v,
        SweepAxis::T => c.query.target = v,
        SweepAxis::K => c.query.budget = Some(as_count(axis, v)?),
    }
    Ok(c)
}

/// One report per value of `axis`, all sharing the base seed.
pub fn sweep(
    config: &ExperimentConfig,
    dataset: &Dataset,
    spec: &SweepSpec,
    jobs: usize,
) -> Result<Vec<ExperimentReport>> {
    let method = registry()
        .resolve(&config.method, config.query.kind)?
        .name();
    if !spec.axis.applies_to(method) {
        return Err(Error::Config(format!(
            "sweep axis {} does not apply to {method}",
            spec.axis
        )));
    }
    if spec.values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    spec.values
        .iter()
        .map(|&v| run_trials(&with_value(config, spec.axis, v)?, dataset, jobs))
        .collect()
}
