//! Finite unions of half-open subintervals of `[0, 1)`.

use super::coord::Coord;
use crate::error::{Error, Result};

/// A sorted list of disjoint half-open intervals `[a, b)` inside `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurableSet<S = f64> {
    intervals: Vec<(S, S)>,
}

impl<S: Coord> MeasurableSet<S> {
    pub fn empty() -> Self {
        MeasurableSet { intervals: Vec::new() }
    }

    pub fn full() -> Self {
        MeasurableSet { intervals: vec![(S::zero(), S::one())] }
    }

    /// A single interval `[a, b)`.
    pub fn interval(a: S, b: S) -> Result<Self> {
        Self::from_intervals(vec![(a, b)])
    }

    /// Validates bounds and normalizes: sorts, drops empty pieces and merges
    /// pieces that overlap or touch.
    pub fn from_intervals(intervals: Vec<(S, S)>) -> Result<Self> {
        for (a, b) in &intervals {
            if *a < S::zero() || *b > S::one() || a > b {
                return Err(Error::InvalidSet(format!(
                    "[{}, {}) is not a subinterval of [0, 1)",
                    a.to_f64(),
                    b.to_f64()
                )));
            }
        }
        Ok(Self::normalized(intervals))
    }

    pub(crate) fn normalized(mut intervals: Vec<(S, S)>) -> Self {
        intervals.retain(|(a, b)| b.clone() - a.clone() > S::tolerance());
        intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite coordinates"));
        let mut out: Vec<(S, S)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match out.last_mut() {
                Some(last) if a <= last.1.clone() + S::tolerance() => {
                    if b > last.1 {
                        last.1 = b;
                    }
                }
                _ => out.push((a, b)),
            }
        }
        MeasurableSet { intervals: out }
    }

    pub fn intervals(&self) -> &[(S, S)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total length, summed in the native scalar before conversion.
    pub fn measure(&self) -> f64 {
        self.measure_exact().to_f64()
    }

    pub fn measure_exact(&self) -> S {
        self.intervals.iter().fold(S::zero(), |acc, (a, b)| acc + (b.clone() - a.clone()))
    }

    pub fn contains(&self, x: &S) -> bool {
        let idx = self.intervals.partition_point(|(a, _)| a <= x);
        idx > 0 && *x < self.intervals[idx - 1].1
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let (mut i, mut k) = (0, 0);
        let mut out = Vec::new();
        while i < self.intervals.len() && k < other.intervals.len() {
            let (a0, a1) = &self.intervals[i];
            let (b0, b1) = &other.intervals[k];
            let lo = if a0 > b0 { a0 } else { b0 };
            let hi = if a1 < b1 { a1 } else { b1 };
            if lo < hi {
                out.push((lo.clone(), hi.clone()));
            }
            if a1 < b1 {
                i += 1;
            } else {
                k += 1;
            }
        }
        Self::normalized(out)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all = self.intervals.clone();
        all.extend(other.intervals.iter().cloned());
        Self::normalized(all)
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut cursor = S::zero();
        for (a, b) in &self.intervals {
            if *a > cursor {
                out.push((cursor.clone(), a.clone()));
            }
            cursor = b.clone();
        }
        if cursor < S::one() {
            out.push((cursor, S::one()));
        }
        Self::normalized(out)
    }

    /// The part of the set inside `[lo, hi)`.
    pub(crate) fn clip<'a>(&'a self, lo: &'a S, hi: &'a S) -> impl Iterator<Item = (S, S)> + 'a {
        let first = self.intervals.partition_point(|(_, b)| b <= lo);
        self.intervals[first..].iter().take_while(move |(a, _)| a < hi).filter_map(move |(a, b)| {
            let s = if a > lo { a } else { lo };
            let e = if b < hi { b } else { hi };
            (s < e).then(|| (s.clone(), e.clone()))
        })
    }

    pub fn to_f64(&self) -> MeasurableSet<f64> {
        MeasurableSet::normalized(self.intervals.iter().map(|(a, b)| (a.to_f64(), b.to_f64())).collect())
    }
}
