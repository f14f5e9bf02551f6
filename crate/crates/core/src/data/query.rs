use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy-, precision- or recall-target query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    At,
    Pt,
    Rt,
}

impl QueryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QueryKind::At => "at",
            QueryKind::Pt => "pt",
            QueryKind::Rt => "rt",
        }
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "at" => Ok(QueryKind::At),
            "pt" => Ok(QueryKind::Pt),
            "rt" => Ok(QueryKind::Rt),
            other => Err(Error::Config(format!("unknown query kind `{other}`"))),
        }
    }
}

/// Target `T`, failure probability `delta` and (for PT/RT) oracle budget `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub kind: QueryKind,
    pub target: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
}

impl QuerySpec {
    pub fn new(kind: QueryKind, target: f64, delta: f64, budget: Option<usize>) -> Result<Self> {
        let q = Self {
            kind,
            target,
            delta,
            budget,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn accuracy(target: f64, delta: f64) -> Result<Self> {
        Self::new(QueryKind::At, target, delta, None)
    }

    pub fn precision(target: f64, delta: f64, budget: usize) -> Result<Self> {
        Self::new(QueryKind::Pt, target, delta, Some(budget))
    }

    pub fn recall(target: f64, delta: f64, budget: usize) -> Result<Self> {
        Self::new(QueryKind::Rt, target, delta, Some(budget))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target > 0.0 && self.target <= 1.0) {
            return Err(Error::Config(format!(
                "target {} must lie in (0, 1]",
                self.target
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta {} must lie in (0, 1)",
                self.delta
            )));
        }
        match (self.kind, self.budget) {
            (QueryKind::At, Some(_)) => Err(Error::Config(
                "accuracy queries take no oracle budget".into(),
            )),
            (QueryKind::Pt | QueryKind::Rt, None) => Err(Error::Config(format!(
                "{} queries need an oracle budget",
                self.kind
            ))),
            (QueryKind::Pt | QueryKind::Rt, Some(0)) => {
                Err(Error::Config("oracle budget must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}
