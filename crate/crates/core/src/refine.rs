//! Interval partitions, their pullbacks under exchanges, and exact joins
//! along progressions.
//!
//! The join `ζ_L = ⋁_{m=1..L} R^{-m} ξ` is built by the recursion
//! `ζ_L = R^{-1}(ξ ∨ ζ_{L-1})`. Every elementary interval of `ζ_L` is mapped
//! by `R` into a single elementary interval of `ξ ∨ ζ_{L-1}`, so its label
//! tuple `(ξ(Rx), ..., ξ(R^L x))` is determined by the pair (ξ-cell, group in
//! `ζ_{L-1}`) of that image interval. Groups are interned integers, which
//! keeps tuple grouping exact without storing tuples.

use std::collections::HashMap;

use crate::entropy::entropy_of;
use crate::error::{Error, Result};
use crate::systems::{Coord, Iet, Number, Traced};

/// Default cap on the number of elementary intervals of a join.
pub const DEFAULT_ELEMENTARY_CAP: usize = 10_000_000;

/// A partition of `[0, 1)` into intervals `[b_i, b_{i+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalPartition<S = f64> {
    breakpoints: Vec<S>,
}

impl<S: Coord> IntervalPartition<S> {
    /// Breakpoints must be strictly increasing inside `[0, 1)`; a missing
    /// leading 0 is added.
    pub fn new(mut breakpoints: Vec<S>) -> Result<Self> {
        if breakpoints.first().map_or(true, |b| *b != S::zero()) {
            breakpoints.insert(0, S::zero());
        }
        for pair in breakpoints.windows(2) {
            if pair[1].clone() - pair[0].clone() <= S::tolerance() {
                return Err(Error::InvalidPartition(format!(
                    "breakpoints must increase strictly (got {} then {})",
                    pair[0].to_f64(),
                    pair[1].to_f64()
                )));
            }
        }
        if breakpoints.iter().any(|b| *b < S::zero() || *b >= S::one()) {
            return Err(Error::InvalidPartition("breakpoints must lie in [0, 1)".into()));
        }
        Ok(IntervalPartition { breakpoints })
    }

    pub fn trivial() -> Self {
        IntervalPartition { breakpoints: vec![S::zero()] }
    }

    /// The `2^depth` dyadic intervals of equal length.
    pub fn dyadic(depth: u32) -> Self {
        let n = 1i64 << depth;
        IntervalPartition { breakpoints: (0..n).map(|i| S::from_ratio(i, n)).collect() }
    }

    pub fn breakpoints(&self) -> &[S] {
        &self.breakpoints
    }

    pub fn cell_count(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn cell_of(&self, x: &S) -> usize {
        self.breakpoints.partition_point(|b| b <= x).saturating_sub(1)
    }

    pub fn cell(&self, i: usize) -> (S, S) {
        let end = self.breakpoints.get(i + 1).cloned().unwrap_or_else(S::one);
        (self.breakpoints[i].clone(), end)
    }

    pub fn measures(&self) -> Vec<f64> {
        (0..self.cell_count())
            .map(|i| {
                let (a, b) = self.cell(i);
                (b - a).to_f64()
            })
            .collect()
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.measures())
    }

    pub fn to_f64(&self) -> IntervalPartition<f64> {
        IntervalPartition { breakpoints: self.breakpoints.iter().map(Coord::to_f64).collect() }
    }
}

/// Partition descriptor: `{"breakpoints": [...]}` or `{"dyadic": k}`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum PartitionSpec {
    Dyadic { dyadic: u32 },
    Breakpoints { breakpoints: Vec<Number> },
}

/// Deepest dyadic partition accepted from a descriptor.
pub const MAX_DYADIC_DEPTH: u32 = 24;

impl PartitionSpec {
    pub fn dyadic(depth: u32) -> Self {
        PartitionSpec::Dyadic { dyadic: depth }
    }

    pub fn validate(&self) -> Result<()> {
        self.build::<f64>().map(|_| ())
    }

    pub fn build<S: Coord>(&self) -> Result<IntervalPartition<S>> {
        match self {
            PartitionSpec::Dyadic { dyadic } if *dyadic > MAX_DYADIC_DEPTH => {
                Err(Error::InvalidPartition(format!("dyadic depth {dyadic} exceeds {MAX_DYADIC_DEPTH}")))
            }
            PartitionSpec::Dyadic { dyadic } => Ok(IntervalPartition::dyadic(*dyadic)),
            PartitionSpec::Breakpoints { breakpoints } => {
                let points = breakpoints
                    .iter()
                    .map(|b| {
                        b.to_coord::<S>()
                            .ok_or_else(|| Error::InvalidPartition(format!("breakpoint {} is not finite", b.to_f64())))
                    })
                    .collect::<Result<Vec<S>>>()?;
                IntervalPartition::new(points)
            }
        }
    }

    /// Whether every breakpoint is rational, so the partition can be used
    /// with exact arithmetic.
    pub fn is_exact(&self) -> bool {
        match self {
            PartitionSpec::Dyadic { .. } => true,
            PartitionSpec::Breakpoints { breakpoints } => breakpoints.iter().all(Number::is_exact),
        }
    }
}

/// Breakpoints of `T^{-1}` applied to a sorted breakpoint list, together with
/// the discontinuities of `T`, each carrying the label of the interval of
/// `points` its right neighbourhood is mapped into. Output is sorted.
fn pullback_labeled<S: Coord, L: Copy>(
    map: &Iet<S>,
    points: &[S],
    labels: &[L],
    degeneracies: &mut Vec<f64>,
) -> (Vec<S>, Vec<L>) {
    let tol = S::tolerance();
    let mut out = Vec::with_capacity(points.len() + map.dimension());
    let mut out_labels = Vec::with_capacity(points.len() + map.dimension());
    let starts = map.starts();
    let images = map.image_starts();
    let lengths = map.lengths();
    for i in 0..map.dimension() {
        let s = &starts[i];
        let lo = &images[i];
        let hi = lo.clone() + lengths[i].clone();
        let lo_cut = lo.clone() + tol.clone();
        let hi_cut = hi - tol.clone();
        let mut idx = points.partition_point(|b| *b <= lo_cut);
        out.push(s.clone());
        out_labels.push(labels[idx - 1]);
        while idx < points.len() && points[idx] < hi_cut {
            out.push(s.clone() + (points[idx].clone() - lo.clone()));
            out_labels.push(labels[idx]);
            idx += 1;
        }
    }
    // A breakpoint sitting on an image discontinuity pulls back onto a
    // discontinuity of the map and is absorbed there.
    for y in images {
        if *y == S::zero() {
            continue;
        }
        let k = points.partition_point(|b| *b < y.clone() - tol.clone());
        if k < points.len() && points[k].near(y) {
            degeneracies.push(y.to_f64());
        }
    }
    (out, out_labels)
}

/// `T^{-1} ξ`: breakpoints are the preimages of the breakpoints of `ξ` and
/// the discontinuities of `T`.
pub fn pullback<S: Coord>(map: &Iet<S>, partition: &IntervalPartition<S>) -> Traced<IntervalPartition<S>> {
    let mut degeneracies = Vec::new();
    let labels = vec![(); partition.breakpoints.len()];
    let (breakpoints, _) = pullback_labeled(map, &partition.breakpoints, &labels, &mut degeneracies);
    Traced { value: IntervalPartition { breakpoints }, degeneracies }
}

/// Sorted union of the breakpoints of `ξ` and of `ζ`, labelling each
/// resulting interval by its (ξ cell, ζ group). Coinciding points are merged
/// and reported.
fn merge_labeled<S: Coord>(
    xi: &[S],
    zeta: &[S],
    groups: &[u32],
    degeneracies: &mut Vec<f64>,
) -> (Vec<S>, Vec<(u32, u32)>) {
    let mut out: Vec<S> = Vec::with_capacity(xi.len() + zeta.len());
    let mut labels = Vec::with_capacity(xi.len() + zeta.len());
    let (mut i, mut k) = (0, 0);
    let (mut cell, mut group) = (0u32, groups[0]);
    while i < xi.len() || k < zeta.len() {
        let take_xi = k >= zeta.len() || (i < xi.len() && xi[i] <= zeta[k]);
        let p = if take_xi {
            cell = i as u32;
            i += 1;
            &xi[i - 1]
        } else {
            group = groups[k];
            k += 1;
            &zeta[k - 1]
        };
        if let Some(last) = out.last() {
            if p.near(last) {
                if *p != S::zero() {
                    degeneracies.push(p.to_f64());
                }
                *labels.last_mut().expect("parallel to out") = (cell, group);
                continue;
            }
        }
        out.push(p.clone());
        labels.push((cell, group));
    }
    (out, labels)
}

/// Assigns consecutive ids to label pairs in order of first appearance.
enum Interner {
    Dense { table: Vec<u32>, cells: u32 },
    Sparse(HashMap<(u32, u32), u32>),
}

impl Interner {
    fn new(cells: usize, groups: usize) -> Self {
        match cells.checked_mul(groups) {
            Some(n) if n <= 1 << 22 => Interner::Dense { table: vec![u32::MAX; n], cells: cells as u32 },
            _ => Interner::Sparse(HashMap::new()),
        }
    }

    fn id(&mut self, key: (u32, u32), fresh: u32) -> u32 {
        match self {
            Interner::Dense { table, cells } => {
                let slot = &mut table[(key.1 * *cells + key.0) as usize];
                if *slot == u32::MAX {
                    *slot = fresh;
                }
                *slot
            }
            Interner::Sparse(map) => *map.entry(key).or_insert(fresh),
        }
    }
}

/// Incremental construction of `ζ_L` for `L = 0, 1, 2, ...`.
pub struct JoinSweep<S: Coord> {
    map: Iet<S>,
    partition: IntervalPartition<S>,
    cap: usize,
    breakpoints: Vec<S>,
    groups: Vec<u32>,
    group_measures: Vec<f64>,
    factors: usize,
    degeneracies: Vec<f64>,
}

impl<S: Coord> JoinSweep<S> {
    pub fn new(map: Iet<S>, partition: IntervalPartition<S>, cap: usize) -> Self {
        JoinSweep {
            map,
            partition,
            cap,
            breakpoints: vec![S::zero()],
            groups: vec![0],
            group_measures: vec![1.0],
            factors: 0,
            degeneracies: Vec::new(),
        }
    }

    /// Number of factors joined so far.
    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn elementary_count(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn group_count(&self) -> usize {
        self.group_measures.len()
    }

    pub fn group_measures(&self) -> &[f64] {
        &self.group_measures
    }

    /// Entropy of the current join, in nats.
    pub fn entropy(&self) -> f64 {
        entropy_of(&self.group_measures)
    }

    pub fn degeneracies(&self) -> &[f64] {
        &self.degeneracies
    }

    /// Adds one factor: `ζ_L = R^{-1}(ξ ∨ ζ_{L-1})`.
    pub fn step(&mut self) -> Result<()> {
        let (merged, merged_labels) =
            merge_labeled(&self.partition.breakpoints, &self.breakpoints, &self.groups, &mut self.degeneracies);
        let (next, labels) = pullback_labeled(&self.map, &merged, &merged_labels, &mut self.degeneracies);
        if next.len() > self.cap {
            return Err(Error::SizeCap { count: next.len(), cap: self.cap });
        }

        let mut intern = Interner::new(self.partition.cell_count(), self.group_measures.len());
        let mut groups = Vec::with_capacity(next.len());
        let mut measures: Vec<S> = Vec::new();
        for (k, key) in labels.into_iter().enumerate() {
            let hi = next.get(k + 1).cloned().unwrap_or_else(S::one);
            let width = hi - next[k].clone();
            let fresh = measures.len() as u32;
            let id = intern.id(key, fresh);
            if id == fresh {
                measures.push(width);
            } else {
                let slot = &mut measures[id as usize];
                *slot = slot.clone() + width;
            }
            groups.push(id);
        }
        self.breakpoints = next;
        self.groups = groups;
        self.group_measures = measures.iter().map(Coord::to_f64).collect();
        self.factors += 1;
        Ok(())
    }

    /// Steps until `factors` factors are joined.
    pub fn advance_to(&mut self, factors: usize) -> Result<()> {
        while self.factors < factors {
            self.step()?;
        }
        Ok(())
    }

    /// Freezes the current join.
    pub fn into_decomposition(self) -> LabeledDecomposition<S> {
        LabeledDecomposition {
            breakpoints: self.breakpoints,
            groups: self.groups,
            group_measures: self.group_measures,
            factors: self.factors,
            map: self.map,
            partition: self.partition,
            degeneracies: self.degeneracies,
        }
    }
}

/// Exact decomposition of `⋁_{m=1..L} R^{-m} ξ` into elementary intervals
/// grouped by label tuple.
#[derive(Clone, Debug)]
pub struct LabeledDecomposition<S: Coord = f64> {
    breakpoints: Vec<S>,
    groups: Vec<u32>,
    group_measures: Vec<f64>,
    factors: usize,
    map: Iet<S>,
    partition: IntervalPartition<S>,
    pub degeneracies: Vec<f64>,
}

impl<S: Coord> LabeledDecomposition<S> {
    pub fn elementary_breakpoints(&self) -> &[S] {
        &self.breakpoints
    }

    pub fn elementary_count(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    /// Total measure per distinct label tuple, in order of first appearance
    /// from the left.
    pub fn group_measures(&self) -> &[f64] {
        &self.group_measures
    }

    pub fn group_of(&self, elementary: usize) -> u32 {
        self.groups[elementary]
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.group_measures)
    }

    /// The map `R` whose iterates define the labels.
    pub fn map(&self) -> &Iet<S> {
        &self.map
    }

    pub fn elementary_interval(&self, i: usize) -> (S, S) {
        let hi = self.breakpoints.get(i + 1).cloned().unwrap_or_else(S::one);
        (self.breakpoints[i].clone(), hi)
    }

    /// `(ξ(R x), ..., ξ(R^L x))` for a point `x`, by direct iteration.
    pub fn label_at(&self, x: &S) -> Vec<u32> {
        let mut y = x.clone();
        (0..self.factors)
            .map(|_| {
                y = self.map.map(&y);
                self.partition.cell_of(&y) as u32
            })
            .collect()
    }

    /// Label tuple of an elementary interval, iterating its midpoint.
    pub fn label_tuple(&self, elementary: usize) -> Vec<u32> {
        let (lo, hi) = self.elementary_interval(elementary);
        self.label_at(&((lo + hi) * S::from_ratio(1, 2)))
    }

    /// Checks that labels are constant inside elementary intervals by
    /// sampling three interior points in a pseudo-random `fraction` of
    /// them. Returns the first offending interval.
    pub fn verify_label_constancy(&self, fraction: f64, seed: u64) -> std::result::Result<(), usize> {
        let n = self.elementary_count();
        let picks = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
        let mut rng = crate::mcoracle::Philox::stream(seed, 0);
        let positions = [S::from_ratio(1, 7), S::from_ratio(1, 2), S::from_ratio(6, 7)];
        for _ in 0..picks {
            let i = (rng.next_u64() % n as u64) as usize;
            let (lo, hi) = self.elementary_interval(i);
            let reference = self.label_tuple(i);
            for t in &positions {
                let x = lo.clone() + (hi.clone() - lo.clone()) * t.clone();
                if self.label_at(&x) != reference {
                    return Err(i);
                }
            }
        }
        Ok(())
    }
}

/// `⋁_{m=1..L} R^{-m} ξ` with `R = T^j`.
pub fn join_over_progression<S: Coord>(
    map: &Iet<S>,
    partition: &IntervalPartition<S>,
    j: u64,
    factors: usize,
    cap: usize,
) -> Result<LabeledDecomposition<S>> {
    if j == 0 || factors == 0 {
        return Err(Error::Validation("join needs j >= 1 and L >= 1".into()));
    }
    let power = map.power(j as i64);
    let mut sweep = JoinSweep::new(power.value, partition.clone(), cap);
    sweep.degeneracies = power.degeneracies;
    sweep.advance_to(factors)?;
    Ok(sweep.into_decomposition())
}
