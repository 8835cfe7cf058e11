//! Compressed served-feature histories.
//!
//! Arms are drawn from a finite pool, so a long history repeats the same
//! feature vectors many times. Policies intern every served vector in an
//! [`ArmCatalog`] and keep per-scope multiplicities in [`ArmCounts`]; the
//! `ε*` sum over a history then costs one term per distinct vector.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::cluster::History;

#[derive(Debug, Clone)]
pub struct ArmCatalog {
    dim: usize,
    index: HashMap<Box<[u64]>, usize>,
    rows: Vec<f64>,
}

impl ArmCatalog {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            index: HashMap::new(),
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Distinct vectors, row-major, in first-seen order.
    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    /// Slot of `x`, keyed on its exact bit pattern.
    pub fn intern(&mut self, x: &DVector<f64>) -> usize {
        debug_assert_eq!(x.len(), self.dim);
        let key: Box<[u64]> = x.iter().map(|v| v.to_bits()).collect();
        let next = self.index.len();
        *self.index.entry(key).or_insert_with(|| {
            self.rows.extend_from_slice(x.as_slice());
            next
        })
    }

    /// History view over `counts`.
    pub fn history(&self, counts: &ArmCounts) -> History<'_> {
        let mut weights = counts.0.clone();
        weights.resize(self.len(), 0.0);
        History::Weighted {
            rows: &self.rows,
            weights,
        }
    }
}

/// Multiplicity per catalog slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArmCounts(Vec<f64>);

impl ArmCounts {
    pub fn add(&mut self, slot: usize, weight: f64) {
        if slot >= self.0.len() {
            self.0.resize(slot + 1, 0.0);
        }
        self.0[slot] += weight;
    }

    /// `self += sign * other`
    pub fn accumulate(&mut self, other: &ArmCounts, sign: f64) {
        if other.0.len() > self.0.len() {
            self.0.resize(other.0.len(), 0.0);
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += sign * b;
        }
    }

    pub fn get(&self, slot: usize) -> f64 {
        self.0.get(slot).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}
