//! Bernoulli shifts on `{0..k-1}^Z` with the left shift `(Tx)_n = x_{n+1}`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Product-measure shift on a finite alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicShift {
    probabilities: Vec<f64>,
}

/// A set fixed by finitely many coordinates: `{x : x_c = s for (c, s)}`.
///
/// Cylinders `[w]` at position `p` and their intersections and shifts are all
/// of this form. `None` marks the empty set (contradictory constraints).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CylinderSet {
    fixed: Option<BTreeMap<i64, u8>>,
}

impl SymbolicShift {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() < 2 {
            return Err(Error::InvalidSystem("a Bernoulli shift needs at least two symbols".into()));
        }
        if probabilities.len() > u8::MAX as usize + 1 {
            return Err(Error::InvalidSystem("alphabet larger than 256 symbols".into()));
        }
        if probabilities.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::InvalidSystem("Bernoulli probabilities must be strictly positive".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSystem(format!("Bernoulli probabilities sum to {total}, expected 1")));
        }
        Ok(SymbolicShift { probabilities })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn alphabet_size(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Entropy of the one-coordinate generating partition, in nats.
    pub fn symbol_entropy(&self) -> f64 {
        -self.probabilities.iter().map(|p| p * p.ln()).sum::<f64>()
    }

    pub fn measure(&self, set: &CylinderSet) -> f64 {
        match &set.fixed {
            None => 0.0,
            Some(map) => map.values().map(|&s| self.probabilities[s as usize]).product(),
        }
    }

    /// `T^m(A)` for the left shift moves every constraint `m` places left.
    pub fn push(&self, set: &CylinderSet, m: i64) -> CylinderSet {
        set.shifted(-m)
    }

    /// `μ(T^m A ∩ B)` by overlapping-coordinate counting.
    pub fn correlation(&self, a: &CylinderSet, b: &CylinderSet, m: i64) -> f64 {
        self.measure(&self.push(a, m).intersection(b))
    }

    /// `μ(A ∩ T^m A ∩ T^n A)`.
    pub fn triple_correlation(&self, a: &CylinderSet, m: i64, n: i64) -> f64 {
        self.measure(&a.intersection(&self.push(a, m)).intersection(&self.push(a, n)))
    }

    pub fn validate_set(&self, set: &CylinderSet) -> Result<()> {
        let k = self.alphabet_size();
        match &set.fixed {
            Some(map) if map.values().any(|&s| s as usize >= k) => {
                Err(Error::InvalidSet(format!("cylinder uses a symbol outside the alphabet of size {k}")))
            }
            _ => Ok(()),
        }
    }
}

impl CylinderSet {
    /// The whole space.
    pub fn full() -> Self {
        CylinderSet { fixed: Some(BTreeMap::new()) }
    }

    /// `{x : x_{position + t} = word[t]}`.
    pub fn word(position: i64, word: &[u8]) -> Self {
        let fixed = word.iter().enumerate().map(|(t, &s)| (position + t as i64, s)).collect();
        CylinderSet { fixed: Some(fixed) }
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_none()
    }

    pub fn constraints(&self) -> Option<&BTreeMap<i64, u8>> {
        self.fixed.as_ref()
    }

    pub fn shifted(&self, by: i64) -> Self {
        CylinderSet { fixed: self.fixed.as_ref().map(|m| m.iter().map(|(c, s)| (c + by, *s)).collect()) }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let (Some(a), Some(b)) = (&self.fixed, &other.fixed) else {
            return CylinderSet { fixed: None };
        };
        let mut out = a.clone();
        for (c, s) in b {
            match out.insert(*c, *s) {
                Some(prev) if prev != *s => return CylinderSet { fixed: None },
                _ => {}
            }
        }
        CylinderSet { fixed: Some(out) }
    }

    /// Whether a point, given as a coordinate lookup, lies in the set.
    pub fn contains_with(&self, mut coord: impl FnMut(i64) -> u8) -> bool {
        match &self.fixed {
            None => false,
            Some(map) => map.iter().all(|(c, s)| coord(*c) == *s),
        }
    }
}
