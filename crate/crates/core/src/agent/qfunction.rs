use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

/// One experience tuple. `steps` is the number of primitive steps the
/// choice lasted; the bootstrap term is discounted by `discount^steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition<S, C = usize> {
    pub s: S,
    pub choice: C,
    pub r: f64,
    pub s_next: S,
    pub terminal: bool,
    #[serde(default = "one")]
    pub steps: u32,
}

fn one() -> u32 {
    1
}

impl<S, C> Transition<S, C> {
    pub fn new(s: S, choice: C, r: f64, s_next: S, terminal: bool) -> Self {
        Self {
            s,
            choice,
            r,
            s_next,
            terminal,
            steps: 1,
        }
    }
}

/// Tabular action-value function. Choices are dense indices; missing
/// entries read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction<S: Hash + Eq> {
    table: HashMap<S, Vec<f64>>,
    learning_rate: f64,
    discount: f64,
}

impl<S: Hash + Eq + Clone> QFunction<S> {
    pub fn new(learning_rate: f64, discount: f64) -> Self {
        assert!(learning_rate > 0.0 && learning_rate <= 1.0, "learning rate in (0, 1]");
        assert!((0.0..1.0).contains(&discount), "discount in [0, 1)");
        Self {
            table: HashMap::new(),
            learning_rate,
            discount,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn value(&self, s: &S, choice: usize) -> f64 {
        self.table
            .get(s)
            .and_then(|row| row.get(choice))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set(&mut self, s: S, choice: usize, v: f64) {
        let row = self.table.entry(s).or_default();
        if row.len() <= choice {
            row.resize(choice + 1, 0.0);
        }
        row[choice] = v;
    }

    pub fn row(&self, s: &S) -> Option<&[f64]> {
        self.table.get(s).map(Vec::as_slice)
    }

    /// max over choices `0..n` at `s`.
    pub fn max_value(&self, s: &S, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self.table.get(s) {
            None => 0.0,
            Some(row) => {
                let stored = row.iter().take(n).copied().fold(f64::NEG_INFINITY, f64::max);
                if row.len() < n {
                    stored.max(0.0)
                } else {
                    stored
                }
            }
        }
    }

    /// Greedy choice among `choices`, first-listed wins ties.
    pub fn greedy(&self, s: &S, choices: impl IntoIterator<Item = usize>) -> Option<usize> {
        let row = self.table.get(s);
        let mut best: Option<(usize, f64)> = None;
        for c in choices {
            let v = row.and_then(|r| r.get(c)).copied().unwrap_or(0.0);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((c, v));
            }
        }
        best.map(|(c, _)| c)
    }

    /// Sequential Q-learning updates in batch order. `n_choices` is the
    /// size of the choice set used for the bootstrap max.
    pub fn update<'a>(&mut self, batch: impl IntoIterator<Item = &'a Transition<S>>, n_choices: usize)
    where
        S: 'a,
    {
        for tr in batch {
            let target = if tr.terminal {
                tr.r
            } else {
                tr.r + self.discount.powi(tr.steps as i32) * self.max_value(&tr.s_next, n_choices)
            };
            let q = self.value(&tr.s, tr.choice);
            self.set(tr.s.clone(), tr.choice, q + self.learning_rate * (target - q));
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.table
            .values()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&S, usize, f64)> + '_ {
        self.table
            .iter()
            .flat_map(|(s, row)| row.iter().enumerate().map(move |(c, v)| (s, c, *v)))
    }
}

/// Applies one batch of updates to `q`. Free-function form of
/// [`QFunction::update`].
pub fn q_update<S: Hash + Eq + Clone>(q: &mut QFunction<S>, batch: &[Transition<S>], n_choices: usize) {
    q.update(batch, n_choices);
}
