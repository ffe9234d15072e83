//! Concrete measure-preserving systems.

pub mod coord;
pub mod iet;
pub mod rankone;
pub mod set;
pub mod shift;

use num_rational::BigRational;

pub use coord::{Coord, Number, MERGE_TOLERANCE};
pub use iet::{Iet, Traced};
pub use rankone::{build_tower, RankOneRecipe, Stage, Tower};
pub use set::MeasurableSet;
pub use shift::{CylinderSet, SymbolicShift};

use crate::error::Result;

/// Correlation access shared by every system: pushing sets forward and
/// measuring intersections.
pub trait Dynamics: Sync {
    type Set: Clone + Send + Sync;

    fn measure(&self, set: &Self::Set) -> f64;

    /// `T^m(A)`, negative `m` meaning backward iterates.
    fn push(&self, set: &Self::Set, m: i64) -> Self::Set;

    fn intersect(&self, a: &Self::Set, b: &Self::Set) -> Self::Set;

    /// `T^m(A), T^{m+1}(A), ...`
    fn orbit<'a>(&'a self, set: &Self::Set, from: i64) -> Box<dyn Iterator<Item = Self::Set> + 'a> {
        let set = set.clone();
        Box::new((from..).map(move |m| self.push(&set, m)))
    }

    /// `μ(T^m A ∩ B)`.
    fn correlation(&self, a: &Self::Set, b: &Self::Set, m: i64) -> f64 {
        self.measure(&self.intersect(&self.push(a, m), b))
    }

    /// `μ(A ∩ T^m A ∩ T^n A)`.
    fn triple_correlation(&self, a: &Self::Set, m: i64, n: i64) -> f64 {
        let am = self.push(a, m);
        let an = self.push(a, n);
        self.measure(&self.intersect(&self.intersect(a, &am), &an))
    }

    /// Mass on which the answer for time `m` is not determined (nonzero only
    /// for finite-stage towers).
    fn undefined_mass(&self, _m: i64) -> f64 {
        0.0
    }
}

impl<S: Coord> Dynamics for Iet<S> {
    type Set = MeasurableSet<S>;

    fn measure(&self, set: &Self::Set) -> f64 {
        set.measure()
    }

    fn push(&self, set: &Self::Set, m: i64) -> Self::Set {
        match m {
            0 => set.clone(),
            1 => self.set_image(set),
            -1 => self.set_preimage(set),
            _ => self.power(m).value.set_image(set),
        }
    }

    fn intersect(&self, a: &Self::Set, b: &Self::Set) -> Self::Set {
        a.intersection(b)
    }

    fn orbit<'a>(&'a self, set: &Self::Set, from: i64) -> Box<dyn Iterator<Item = Self::Set> + 'a> {
        let first = self.push(set, from);
        Box::new(std::iter::successors(Some(first), move |s| Some(self.set_image(s))))
    }
}

impl Dynamics for SymbolicShift {
    type Set = CylinderSet;

    fn measure(&self, set: &Self::Set) -> f64 {
        SymbolicShift::measure(self, set)
    }

    fn push(&self, set: &Self::Set, m: i64) -> Self::Set {
        SymbolicShift::push(self, set, m)
    }

    fn intersect(&self, a: &Self::Set, b: &Self::Set) -> Self::Set {
        a.intersection(b)
    }
}

/// A rank-one system realized by the last tower of its recipe.
#[derive(Clone, Debug)]
pub struct RankOne {
    pub recipe: RankOneRecipe,
    pub tower: Tower,
}

impl RankOne {
    pub fn new(recipe: RankOneRecipe) -> Result<Self> {
        let tower = build_tower(&recipe, recipe.tower_count())?;
        Ok(RankOne { recipe, tower })
    }

    /// Tower `n` of the same recipe, in the same layout.
    pub fn tower(&self, n: usize) -> Result<Tower> {
        build_tower(&self.recipe, n)
    }
}

impl Dynamics for RankOne {
    type Set = MeasurableSet<f64>;

    fn measure(&self, set: &Self::Set) -> f64 {
        set.measure()
    }

    fn push(&self, set: &Self::Set, m: i64) -> Self::Set {
        self.tower.push(set, m)
    }

    fn intersect(&self, a: &Self::Set, b: &Self::Set) -> Self::Set {
        a.intersection(b)
    }

    fn undefined_mass(&self, m: i64) -> f64 {
        self.tower.undefined_mass(m)
    }
}

/// Any system a descriptor can name.
#[derive(Clone, Debug)]
pub enum System {
    Iet(Iet<f64>),
    ExactIet(Iet<BigRational>),
    Bernoulli(SymbolicShift),
    RankOne(Box<RankOne>),
}

impl System {
    pub fn kind(&self) -> &'static str {
        match self {
            System::Iet(_) => "interval exchange",
            System::ExactIet(_) => "exact interval exchange",
            System::Bernoulli(_) => "Bernoulli shift",
            System::RankOne(_) => "rank-one tower",
        }
    }
}
