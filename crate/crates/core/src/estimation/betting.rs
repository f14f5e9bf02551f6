use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Which capital process a [`BettingState`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BettingKind {
    /// Certifies a mean above `m` from i.i.d. draws.
    LowerIid,
    /// Certifies a mean below `m` from i.i.d. draws.
    UpperIid,
    /// Certifies a population mean above `m` from draws without replacement.
    LowerWr,
}

const ZERO_TOL: f64 = 1e-12;

/// Incremental state of one betting test on a Bernoulli stream.
#[derive(Debug, Clone, PartialEq)]
pub struct BettingState {
    kind: BettingKind,
    m: f64,
    alpha: f64,
    step: usize,
    log_capital: f64,
    sum_y: u64,
    sum_sq_dev: f64,
    fired: bool,
    population: Option<usize>,
    wr_refuted: bool,
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(param(format!(
            "{name}={x} must lie strictly between 0 and 1"
        )))
    }
}

impl BettingState {
    fn build(kind: BettingKind, m: f64, alpha: f64, population: Option<usize>) -> Result<Self> {
        check_unit("m", m)?;
        check_unit("alpha", alpha)?;
        Ok(Self {
            kind,
            m,
            alpha,
            step: 0,
            log_capital: 0.0,
            sum_y: 0,
            sum_sq_dev: 0.0,
            fired: false,
            population,
            wr_refuted: false,
        })
    }

    pub fn lower_iid(m: f64, alpha: f64) -> Result<Self> {
        Self::build(BettingKind::LowerIid, m, alpha, None)
    }

    pub fn upper_iid(m: f64, alpha: f64) -> Result<Self> {
        Self::build(BettingKind::UpperIid, m, alpha, None)
    }

    /// Without-replacement test over a population of `population` records.
    pub fn lower_wr(m: f64, alpha: f64, population: usize) -> Result<Self> {
        if population == 0 {
            return Err(param(
                "without-replacement test needs a non-empty population",
            ));
        }
        Self::build(BettingKind::LowerWr, m, alpha, Some(population))
    }

    pub fn new(kind: BettingKind, m: f64, alpha: f64, population: Option<usize>) -> Result<Self> {
        match kind {
            BettingKind::LowerIid => Self::lower_iid(m, alpha),
            BettingKind::UpperIid => Self::upper_iid(m, alpha),
            BettingKind::LowerWr => {
                let n = population
                    .ok_or_else(|| param("without-replacement test needs a population size"))?;
                Self::lower_wr(m, alpha, n)
            }
        }
    }

    pub fn kind(&self) -> BettingKind {
        self.kind
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn capital(&self) -> f64 {
        self.log_capital.exp()
    }

    pub fn log_capital(&self) -> f64 {
        self.log_capital
    }

    pub fn fired(&self) -> bool {
        self.fired
    }

    pub fn wr_refuted(&self) -> bool {
        self.wr_refuted
    }

    pub fn sum_y(&self) -> u64 {
        self.sum_y
    }

    pub fn mean_estimate(&self) -> f64 {
        (0.5 + self.sum_y as f64) / (self.step as f64 + 1.0)
    }

    pub fn variance_estimate(&self) -> f64 {
        (0.25 + self.sum_sq_dev) / (self.step as f64 + 1.0)
    }

    /// Bet size for the next observation, before capping.
    pub fn next_lambda(&self) -> f64 {
        let i1 = self.step as f64 + 1.0;
        let num = 2.0 * (2.0 / self.alpha).ln();
        (num / (i1 * (i1 + 1.0).ln() * self.variance_estimate())).sqrt()
    }

    /// Running target for the next draw without replacement.
    pub fn wr_target(&self) -> Option<f64> {
        self.population.map(|n| {
            let remaining = (n - self.step.min(n)) as f64;
            (n as f64 * self.m - self.sum_y as f64) / remaining
        })
    }

    /// Multiplicative factor the next observation `y` would apply, or `None`
    /// when the without-replacement rule refutes the null outright.
    fn factor(&self, y: f64) -> Option<f64> {
        let lambda = self.next_lambda();
        match self.kind {
            BettingKind::LowerIid => Some(1.0 + lambda.min(0.75 / self.m) * (y - self.m)),
            BettingKind::UpperIid => Some(1.0 - lambda.min(0.75 / (1.0 - self.m)) * (y - self.m)),
            BettingKind::LowerWr => {
                let mut mp = self.wr_target().expect("population set");
                if mp.abs() < ZERO_TOL {
                    mp = 0.0;
                }
                if mp < 0.0 || (mp == 0.0 && y == 1.0) {
                    return None;
                }
                let cap = if mp == 0.0 { f64::INFINITY } else { 0.75 / mp };
                Some(1.0 + lambda.min(cap) * (y - mp))
            }
        }
    }

    /// Consumes one observation and returns whether the test has fired.
    pub fn step(&mut self, y: bool) -> Result<bool> {
        if let Some(n) = self.population {
            if self.step >= n {
                return Err(Error::State(format!(
                    "without-replacement test already consumed its population of {n}"
                )));
            }
        }
        let yf = f64::from(u8::from(y));
        match self.factor(yf) {
            Some(f) => self.log_capital += f.ln(),
            None => {
                self.fired = true;
                self.wr_refuted = true;
            }
        }
        self.step += 1;
        self.sum_y += u64::from(y);
        let mu = self.mean_estimate();
        self.sum_sq_dev += (yf - mu) * (yf - mu);
        if self.log_capital >= -self.alpha.ln() {
            self.fired = true;
        }
        Ok(self.fired)
    }
}

/// Runs a betting test over `stream` and returns the 1-based step at which it
/// first fires.
pub fn anytime_test(
    kind: BettingKind,
    stream: &[bool],
    m: f64,
    alpha: f64,
    population: Option<usize>,
) -> Result<Option<usize>> {
    let mut state = BettingState::new(kind, m, alpha, population)?;
    for (i, &y) in stream.iter().enumerate() {
        if state.step(y)? {
            return Ok(Some(i + 1));
        }
    }
    Ok(None)
}
