//! Budgeted oracle access through one shared random permutation.
//!
//! Every threshold sees the records above it in permutation order, so a label
//! bought for one threshold is replayed for free at every other threshold.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;

/// Result of one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Draw {
    Label {
        index: usize,
        label: u32,
        charged: bool,
    },
    /// A new label was needed but no budget remains. The cursor stays put.
    BudgetExhausted,
    /// Every record in the restricted stream has been emitted.
    PopulationExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Stream {
    Above { rho: u64, class: Option<u32> },
    Window { rho: u64, r: usize },
}

/// Sole gateway to oracle labels for the selection algorithms.
#[derive(Debug)]
pub struct BudgetedOracle<'a> {
    dataset: &'a Dataset,
    permutation: Vec<usize>,
    cache: Vec<Option<u32>>,
    labeled: Vec<usize>,
    cursors: HashMap<Stream, usize>,
    windows: HashMap<Stream, Vec<usize>>,
    budget: Option<usize>,
    limit: Option<usize>,
}

fn key(rho: f64) -> u64 {
    // normalise -0.0 so both zeros share a cursor
    (rho + 0.0).to_bits()
}

impl<'a> BudgetedOracle<'a> {
    /// `budget = None` is unbounded.
    pub fn new(dataset: &'a Dataset, budget: Option<usize>, seed: u64) -> Self {
        let mut permutation: Vec<usize> = (0..dataset.len()).collect();
        permutation.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self {
            dataset,
            permutation,
            cache: vec![None; dataset.len()],
            labeled: Vec::new(),
            cursors: HashMap::new(),
            windows: HashMap::new(),
            budget,
            limit: None,
        }
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    pub fn score(&self, index: usize) -> f64 {
        self.dataset.record(index).proxy_score
    }

    pub fn proxy_label(&self, index: usize) -> u32 {
        self.dataset.record(index).proxy_label
    }

    pub fn scores_desc(&self) -> &[f64] {
        self.dataset.scores_desc()
    }

    pub fn count_above(&self, rho: f64) -> usize {
        self.dataset.count_above(rho)
    }

    pub fn is_binary(&self) -> bool {
        self.dataset.is_binary()
    }

    /// Oracle label of a record the finished cascade routes to the oracle.
    /// Not for use during selection; the caller accounts for its cost.
    pub fn cascade_label(&self, index: usize) -> u32 {
        self.dataset.record(index).oracle_label
    }

    pub fn proxy_classes(&self) -> Vec<u32> {
        self.dataset.proxy_classes()
    }

    /// Scores of one proxy class, descending.
    pub fn class_scores_desc(&self, class: u32) -> Vec<f64> {
        self.dataset
            .score_order()
            .iter()
            .map(|&i| self.dataset.record(i))
            .filter(|r| r.proxy_label == class)
            .map(|r| r.proxy_score)
            .collect()
    }

    pub fn window_len(&self, rho: f64, r: usize) -> usize {
        self.dataset.window(rho, r).len()
    }

    pub fn budget(&self) -> Option<usize> {
        self.budget
    }

    pub fn charges(&self) -> usize {
        self.labeled.len()
    }

    pub fn budget_remaining(&self) -> Option<usize> {
        self.budget.map(|k| k - self.charges())
    }

    /// Record indices whose labels were bought, in purchase order.
    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn cached_label(&self, index: usize) -> Option<u32> {
        self.cache[index]
    }

    /// Caps further purchases at `extra` labels until cleared.
    pub fn set_allowance(&mut self, extra: usize) {
        self.limit = Some(self.charges() + extra);
    }

    pub fn clear_allowance(&mut self) {
        self.limit = None;
    }

    fn can_charge(&self) -> bool {
        let n = self.charges();
        self.budget.is_none_or(|k| n < k) && self.limit.is_none_or(|l| n < l)
    }

    fn emit(&mut self, index: usize) -> Option<Draw> {
        if let Some(label) = self.cache[index] {
            return Some(Draw::Label {
                index,
                label,
                charged: false,
            });
        }
        if !self.can_charge() {
            return None;
        }
        let label = self.dataset.record(index).oracle_label;
        self.cache[index] = Some(label);
        self.labeled.push(index);
        Some(Draw::Label {
            index,
            label,
            charged: true,
        })
    }

    fn draw_permuted(&mut self, stream: Stream, keep: impl Fn(usize) -> bool) -> Draw {
        let mut pos = self.cursors.get(&stream).copied().unwrap_or(0);
        while pos < self.permutation.len() && !keep(self.permutation[pos]) {
            pos += 1;
        }
        self.cursors.insert(stream, pos);
        if pos == self.permutation.len() {
            return Draw::PopulationExhausted;
        }
        match self.emit(self.permutation[pos]) {
            Some(draw) => {
                self.cursors.insert(stream, pos + 1);
                draw
            }
            None => Draw::BudgetExhausted,
        }
    }

    /// Next record with score strictly above `rho`, in permutation order.
    pub fn draw_above(&mut self, rho: f64) -> Draw {
        let ds = self.dataset;
        self.draw_permuted(
            Stream::Above {
                rho: key(rho),
                class: None,
            },
            |i| ds.record(i).proxy_score > rho,
        )
    }

    /// Next record of any score.
    pub fn draw_any(&mut self) -> Draw {
        self.draw_above(f64::NEG_INFINITY)
    }

    /// As [`draw_above`](Self::draw_above), restricted to one proxy class.
    pub fn draw_above_in_class(&mut self, rho: f64, class: u32) -> Draw {
        let ds = self.dataset;
        self.draw_permuted(
            Stream::Above {
                rho: key(rho),
                class: Some(class),
            },
            |i| {
                let rec = ds.record(i);
                rec.proxy_label == class && rec.proxy_score > rho
            },
        )
    }

    /// Next record of the density window of `r` records at `rho`.
    pub fn draw_window(&mut self, rho: f64, r: usize) -> Draw {
        let stream = Stream::Window { rho: key(rho), r };
        if !self.windows.contains_key(&stream) {
            let mut rank = vec![0usize; self.permutation.len()];
            for (p, &i) in self.permutation.iter().enumerate() {
                rank[i] = p;
            }
            let mut members = self.dataset.window(rho, r).to_vec();
            members.sort_by_key(|&i| rank[i]);
            self.windows.insert(stream, members);
        }
        let pos = self.cursors.get(&stream).copied().unwrap_or(0);
        let Some(&index) = self.windows[&stream].get(pos) else {
            return Draw::PopulationExhausted;
        };
        match self.emit(index) {
            Some(draw) => {
                self.cursors.insert(stream, pos + 1);
                draw
            }
            None => Draw::BudgetExhausted,
        }
    }
}
