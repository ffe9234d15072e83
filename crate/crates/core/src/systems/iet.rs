//! Interval exchange transformations of `[0, 1)`.

use super::coord::Coord;
use super::set::MeasurableSet;
use crate::error::{Error, Result};

/// A value together with the breakpoint collisions met while computing it.
///
/// A collision means two breakpoints fell within the merge tolerance of each
/// other and were merged into one. For irrational data it usually signals a
/// rational resonance; the value is still correct as a map, but interval
/// counts drop.
#[derive(Clone, Debug)]
pub struct Traced<T> {
    pub value: T,
    pub degeneracies: Vec<f64>,
}

impl<T> Traced<T> {
    pub fn clean(value: T) -> Self {
        Traced { value, degeneracies: Vec::new() }
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degeneracies.is_empty()
    }

    pub fn into_value(self) -> T {
        self.value
    }
}

/// A piecewise translation of `[0, 1)` exchanging `d` subintervals.
///
/// Block `i` is `[starts[i], starts[i] + lengths[i])` in domain order and is
/// sent to position `permutation[i]` of the image ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct Iet<S = f64> {
    starts: Vec<S>,
    lengths: Vec<S>,
    image_starts: Vec<S>,
    permutation: Vec<usize>,
    /// `image_order[k]` is the block placed at image position `k`.
    image_order: Vec<usize>,
    /// Image starts sorted by image position.
    image_sorted: Vec<S>,
}

impl<S: Coord> Iet<S> {
    /// Builds an exchange from block lengths and a zero-based permutation
    /// (`permutation[i]` is the image position of block `i`).
    pub fn new(lengths: Vec<S>, permutation: Vec<usize>) -> Result<Self> {
        let d = lengths.len();
        if d == 0 {
            return Err(Error::InvalidSystem("an exchange needs at least one interval".into()));
        }
        if permutation.len() != d {
            return Err(Error::InvalidSystem(format!("{d} lengths but {} permutation entries", permutation.len())));
        }
        if let Some(bad) = lengths.iter().find(|l| **l <= S::zero()) {
            return Err(Error::InvalidSystem(format!("lengths must be strictly positive, got {}", bad.to_f64())));
        }
        let total = lengths.iter().fold(S::zero(), |acc, l| acc + l.clone());
        if !total.near(&S::one()) {
            return Err(Error::InvalidSystem(format!("lengths sum to {}, expected 1", total.to_f64())));
        }
        let mut image_order = vec![usize::MAX; d];
        for (block, &pos) in permutation.iter().enumerate() {
            if pos >= d || image_order[pos] != usize::MAX {
                return Err(Error::InvalidSystem(format!("permutation {permutation:?} is not a bijection of 0..{d}")));
            }
            image_order[pos] = block;
        }

        let mut starts = Vec::with_capacity(d);
        let mut cursor = S::zero();
        for l in &lengths {
            starts.push(cursor.clone());
            cursor = cursor + l.clone();
        }
        let mut image_starts = vec![S::zero(); d];
        let mut image_sorted = Vec::with_capacity(d);
        let mut cursor = S::zero();
        for &block in &image_order {
            image_starts[block] = cursor.clone();
            image_sorted.push(cursor.clone());
            cursor = cursor + lengths[block].clone();
        }
        // The image tiling must close up at 1 as well.
        if !cursor.near(&S::one()) {
            return Err(Error::InvalidSystem("image blocks do not tile [0, 1)".into()));
        }
        Ok(Iet { starts, lengths, image_starts, permutation, image_order, image_sorted })
    }

    /// Same as [`Iet::new`] with a permutation of `1..=d`.
    pub fn from_one_based(lengths: Vec<S>, permutation: &[usize]) -> Result<Self> {
        if permutation.contains(&0) {
            return Err(Error::InvalidSystem("one-based permutation contains 0".into()));
        }
        Self::new(lengths, permutation.iter().map(|p| p - 1).collect())
    }

    pub fn identity() -> Self {
        Self::new(vec![S::one()], vec![0]).expect("identity is valid")
    }

    /// Rotation `x -> x + alpha mod 1` as a two-interval exchange.
    pub fn rotation(alpha: S) -> Result<Self> {
        if alpha < S::zero() || alpha >= S::one() {
            return Err(Error::InvalidSystem(format!("rotation angle {} outside [0, 1)", alpha.to_f64())));
        }
        if alpha.near(&S::zero()) {
            return Ok(Self::identity());
        }
        Self::new(vec![S::one() - alpha.clone(), alpha], vec![1, 0])
    }

    /// Rebuilds an exchange from domain breakpoints and per-piece image
    /// starts. Image starts are only used to order the pieces; the tiling is
    /// recomputed from the lengths.
    fn from_pieces(starts: &[S], image_hint: &[S]) -> Self {
        let d = starts.len();
        let lengths: Vec<S> =
            (0..d).map(|i| starts.get(i + 1).cloned().unwrap_or_else(S::one) - starts[i].clone()).collect();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| image_hint[a].partial_cmp(&image_hint[b]).expect("finite"));
        let mut permutation = vec![0; d];
        for (pos, &block) in order.iter().enumerate() {
            permutation[block] = pos;
        }
        Self::new(lengths, permutation).expect("pieces of a valid composition tile [0, 1)")
    }

    pub fn dimension(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[S] {
        &self.lengths
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Left endpoints of the blocks in domain order; `starts()[0] == 0`.
    pub fn starts(&self) -> &[S] {
        &self.starts
    }

    pub fn image_starts(&self) -> &[S] {
        &self.image_starts
    }

    /// Translation applied to each block.
    pub fn offsets(&self) -> Vec<S> {
        self.starts.iter().zip(&self.image_starts).map(|(s, t)| t.clone() - s.clone()).collect()
    }

    /// Interior discontinuities (block starts other than 0).
    pub fn discontinuities(&self) -> &[S] {
        &self.starts[1..]
    }

    pub(crate) fn block_of(&self, x: &S) -> usize {
        self.starts.partition_point(|s| s <= x).saturating_sub(1)
    }

    pub(crate) fn image_block_of(&self, y: &S) -> usize {
        let pos = self.image_sorted.partition_point(|s| s <= y).saturating_sub(1);
        self.image_order[pos]
    }

    /// Block end in domain coordinates.
    pub(crate) fn block_end(&self, i: usize) -> S {
        self.starts[i].clone() + self.lengths[i].clone()
    }

    /// Evaluates the map without a domain check.
    pub(crate) fn map(&self, x: &S) -> S {
        let i = self.block_of(x);
        (x.clone() - self.starts[i].clone() + self.image_starts[i].clone()).clamp_unit()
    }

    pub(crate) fn preimage_point(&self, y: &S) -> S {
        let i = self.image_block_of(y);
        (y.clone() - self.image_starts[i].clone() + self.starts[i].clone()).clamp_unit()
    }

    pub fn apply(&self, x: &S) -> Result<S> {
        if *x < S::zero() || *x >= S::one() {
            return Err(Error::Domain(x.to_f64()));
        }
        Ok(self.map(x))
    }

    pub fn invert(&self) -> Self {
        let lengths = self.image_order.iter().map(|&b| self.lengths[b].clone()).collect();
        Self::new(lengths, self.image_order.clone()).expect("inverse of a valid exchange")
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &Self) -> Traced<Self> {
        let mut points: Vec<S> = inner.starts.clone();
        points.extend(self.starts[1..].iter().map(|b| inner.preimage_point(b)));
        points.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

        let mut degeneracies = Vec::new();
        let mut cuts: Vec<S> = Vec::with_capacity(points.len());
        for p in points {
            if let Some(last) = cuts.last() {
                if p.near(last) {
                    degeneracies.push(p.to_f64());
                    continue;
                }
            }
            if S::one() - p.clone() <= S::tolerance() {
                degeneracies.push(p.to_f64());
                continue;
            }
            cuts.push(p);
        }

        let half = S::from_ratio(1, 2);
        let mut starts: Vec<S> = Vec::with_capacity(cuts.len());
        let mut images: Vec<S> = Vec::with_capacity(cuts.len());
        let mut last_shift: Option<S> = None;
        for k in 0..cuts.len() {
            let lo = cuts[k].clone();
            let hi = cuts.get(k + 1).cloned().unwrap_or_else(S::one);
            let mid = (lo.clone() + hi) * half.clone();
            let g = inner.block_of(&mid);
            let y = mid.clone() - inner.starts[g].clone() + inner.image_starts[g].clone();
            let f = self.block_of(&y);
            let shift = inner.image_starts[g].clone() - inner.starts[g].clone() + self.image_starts[f].clone()
                - self.starts[f].clone();
            if let Some(prev) = &last_shift {
                if prev.near(&shift) {
                    continue;
                }
            }
            images.push(lo.clone() + shift.clone());
            starts.push(lo);
            last_shift = Some(shift);
        }
        Traced { value: Self::from_pieces(&starts, &images), degeneracies }
    }

    /// `self^m`; negative powers go through [`Iet::invert`].
    pub fn power(&self, m: i64) -> Traced<Self> {
        let base = if m < 0 { self.invert() } else { self.clone() };
        let mut exp = m.unsigned_abs();
        let mut result = Traced::clean(Self::identity());
        let mut square = base;
        let mut degeneracies = Vec::new();
        while exp > 0 {
            if exp & 1 == 1 {
                let step = result.value.compose(&square);
                degeneracies.extend(step.degeneracies);
                result.value = step.value;
            }
            exp >>= 1;
            if exp > 0 {
                let step = square.compose(&square);
                degeneracies.extend(step.degeneracies);
                square = step.value;
            }
        }
        result.degeneracies = degeneracies;
        result
    }

    /// `T^{-1}(A)`.
    pub fn set_preimage(&self, set: &MeasurableSet<S>) -> MeasurableSet<S> {
        let mut out = Vec::new();
        for i in 0..self.dimension() {
            let lo = self.image_starts[i].clone();
            let hi = lo.clone() + self.lengths[i].clone();
            let shift = self.starts[i].clone() - lo.clone();
            out.extend(set.clip(&lo, &hi).map(|(a, b)| (a + shift.clone(), b + shift.clone())));
        }
        MeasurableSet::normalized(out)
    }

    /// `T(A)`.
    pub fn set_image(&self, set: &MeasurableSet<S>) -> MeasurableSet<S> {
        let mut out = Vec::new();
        for i in 0..self.dimension() {
            let lo = self.starts[i].clone();
            let hi = self.block_end(i);
            let shift = self.image_starts[i].clone() - lo.clone();
            out.extend(set.clip(&lo, &hi).map(|(a, b)| (a + shift.clone(), b + shift.clone())));
        }
        MeasurableSet::normalized(out)
    }

    /// Merges adjacent blocks that move by the same translation.
    pub fn canonical(&self) -> Self {
        self.compose(&Self::identity()).value
    }

    /// Pointwise equality as maps, within the merge tolerance.
    pub fn approx_eq(&self, other: &Self) -> bool {
        let (a, b) = (self.canonical(), other.canonical());
        a.dimension() == b.dimension()
            && a.starts.iter().zip(&b.starts).all(|(x, y)| x.near(y))
            && a.image_starts.iter().zip(&b.image_starts).all(|(x, y)| x.near(y))
    }

    pub fn to_f64(&self) -> Iet<f64> {
        Iet::new(self.lengths.iter().map(Coord::to_f64).collect(), self.permutation.clone())
            .expect("conversion of a valid exchange")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    fn reversal3() -> Iet {
        Iet::new(vec![0.2, 0.3, 0.5], vec![2, 1, 0]).unwrap()
    }

    #[test]
    fn rotation_adds_alpha() {
        let t = Iet::rotation(0.25).unwrap();
        assert!(close(t.apply(&0.5).unwrap(), 0.75));
        assert!(close(t.apply(&0.8).unwrap(), 0.05));
    }

    #[test]
    fn two_block_swap_sends_zero_to_second_block_length() {
        let t = Iet::from_one_based(vec![0.3, 0.7], &[2, 1]).unwrap();
        assert!(close(t.apply(&0.0).unwrap(), 0.7));
    }

    #[test]
    fn reversal_places_first_block_last() {
        assert!(close(reversal3().apply(&0.1).unwrap(), 0.9));
    }

    #[test]
    fn apply_rejects_points_outside_unit_interval() {
        let t = reversal3();
        assert_eq!(t.apply(&1.0), Err(Error::Domain(1.0)));
        assert!(t.apply(&-0.1).is_err());
    }

    #[test]
    fn construction_validates_inputs() {
        assert!(Iet::new(vec![0.5, 0.6], vec![1, 0]).is_err());
        assert!(Iet::new(vec![0.5, 0.5], vec![1, 1]).is_err());
        assert!(Iet::new(vec![1.0, 0.0], vec![1, 0]).is_err());
        assert!(Iet::<f64>::new(vec![], vec![]).is_err());
        assert!(Iet::rotation(1.0).is_err());
    }

    #[test]
    fn inverse_of_rotation_is_complementary_rotation() {
        let t = Iet::rotation(0.3).unwrap();
        assert!(t.invert().approx_eq(&Iet::rotation(0.7).unwrap()));
        assert!(Iet::<f64>::identity().invert().approx_eq(&Iet::identity()));
    }

    #[test]
    fn compose_rotations_adds_angles() {
        let a = Iet::rotation(0.3).unwrap();
        let b = Iet::rotation(0.45).unwrap();
        let c = a.compose(&b).value;
        assert_eq!(c.dimension(), 2);
        assert!(c.approx_eq(&Iet::rotation(0.75).unwrap()));
    }

    #[test]
    fn compose_with_inverse_collapses_to_identity() {
        let t = reversal3();
        let id = t.compose(&t.invert());
        assert_eq!(id.value.dimension(), 1);
        assert!(id.is_degenerate());
    }

    #[test]
    fn power_zero_is_identity() {
        assert_eq!(reversal3().power(0).value.dimension(), 1);
    }

    #[test]
    fn rational_rotation_returns_to_identity_exactly() {
        let t = Iet::rotation(BigRational::from_ratio(2, 7)).unwrap();
        let p = t.power(7);
        assert_eq!(p.value.dimension(), 1);
        assert!(p.is_degenerate());
        let q = t.power(3).value;
        assert_eq!(q.apply(&BigRational::from_ratio(0, 1)).unwrap(), BigRational::from_ratio(6, 7));
    }

    #[test]
    fn set_preimage_of_rotation_preserves_length() {
        let t = Iet::rotation(0.25).unwrap();
        let a = MeasurableSet::interval(0.0, 0.4).unwrap();
        let pre = t.set_preimage(&a);
        assert_eq!(pre.intervals().len(), 2);
        assert!(close(pre.measure(), 0.4));
        assert_eq!(t.set_image(&pre), a);
    }
}
