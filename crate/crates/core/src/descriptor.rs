//! JSON descriptors for systems and test sets.
//!
//! ```json
//! {"type": "iet", "lengths": [0.2, 0.3, 0.5], "permutation": [3, 2, 1]}
//! {"type": "rotation", "alpha": "2/7"}
//! {"type": "bernoulli", "probs": [0.5, 0.5]}
//! {"type": "rankone", "stages": [{"r": 3, "spacers": [0, 1, 0]}], "repeat": 6}
//! ```
//!
//! Lengths and angles written as integer ratios (`"2/7"`) select exact
//! rational arithmetic when every number of the descriptor is rational.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{default_cylinder_sets, default_interval_sets};
use crate::systems::{
    Coord, CylinderSet, Iet, MeasurableSet, Number, RankOne, RankOneRecipe, Stage, SymbolicShift, System,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SystemDescriptor {
    /// Permutation is one-based: block `i` lands in image position
    /// `permutation[i]`.
    Iet {
        lengths: Vec<Number>,
        permutation: Vec<usize>,
    },
    Rotation {
        alpha: Number,
    },
    Identity,
    Bernoulli {
        probs: Vec<f64>,
    },
    /// The listed stages are applied `repeat` times in order.
    Rankone {
        stages: Vec<Stage>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        repeat: Option<usize>,
    },
}

fn numbers<S: Coord>(values: &[Number]) -> Result<Vec<S>> {
    values
        .iter()
        .map(|v| v.to_coord::<S>().ok_or_else(|| Error::InvalidSystem(format!("{} is not finite", v.to_f64()))))
        .collect()
}

impl SystemDescriptor {
    pub fn build(&self) -> Result<System> {
        Ok(match self {
            SystemDescriptor::Iet { lengths, permutation } => {
                if lengths.iter().all(Number::is_exact) {
                    System::ExactIet(Iet::<BigRational>::from_one_based(numbers(lengths)?, permutation)?)
                } else {
                    System::Iet(Iet::from_one_based(numbers(lengths)?, permutation)?)
                }
            }
            SystemDescriptor::Rotation { alpha } => {
                let alpha = std::slice::from_ref(alpha);
                if alpha[0].is_exact() {
                    System::ExactIet(Iet::<BigRational>::rotation(numbers(alpha)?.remove(0))?)
                } else {
                    System::Iet(Iet::rotation(numbers(alpha)?.remove(0))?)
                }
            }
            SystemDescriptor::Identity => System::Iet(Iet::identity()),
            SystemDescriptor::Bernoulli { probs } => System::Bernoulli(SymbolicShift::new(probs.clone())?),
            SystemDescriptor::Rankone { stages, repeat } => {
                let times = repeat.unwrap_or(1);
                if times == 0 {
                    return Err(Error::InvalidRecipe("repeat must be >= 1".into()));
                }
                let all: Vec<Stage> = (0..times).flat_map(|_| stages.iter().cloned()).collect();
                System::RankOne(Box::new(RankOne::new(RankOneRecipe::new(all)?)?))
            }
        })
    }

    /// Recipe of a rank-one descriptor, without building towers.
    pub fn recipe(&self) -> Result<RankOneRecipe> {
        match self {
            SystemDescriptor::Rankone { stages, repeat } => {
                let times = repeat.unwrap_or(1);
                if times == 0 {
                    return Err(Error::InvalidRecipe("repeat must be >= 1".into()));
                }
                RankOneRecipe::new((0..times).flat_map(|_| stages.iter().cloned()).collect())
            }
            _ => Err(Error::InvalidRecipe("descriptor is not a rank-one recipe".into())),
        }
    }
}

/// A test set: a union of intervals, a cylinder, or a union of consecutive
/// tower levels `[from, to)` of tower `tower` (rank-one systems only).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetDescriptor {
    Intervals { intervals: Vec<(Number, Number)> },
    Cylinder { position: i64, word: Vec<u8> },
    Levels { tower: usize, from: usize, to: usize },
}

/// Test sets resolved against a system.
#[derive(Clone, Debug)]
pub enum SetFamily {
    Intervals(Vec<MeasurableSet<f64>>),
    ExactIntervals(Vec<MeasurableSet<BigRational>>),
    Cylinders(Vec<CylinderSet>),
}

impl SetFamily {
    pub fn len(&self) -> usize {
        match self {
            SetFamily::Intervals(s) => s.len(),
            SetFamily::ExactIntervals(s) => s.len(),
            SetFamily::Cylinders(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn interval_set<S: Coord>(d: &SetDescriptor, system: &System) -> Result<MeasurableSet<S>> {
    match d {
        SetDescriptor::Intervals { intervals } => {
            let pieces = intervals
                .iter()
                .map(|(a, b)| match (a.to_coord::<S>(), b.to_coord::<S>()) {
                    (Some(a), Some(b)) => Ok((a, b)),
                    _ => Err(Error::InvalidSet("interval endpoint is not finite".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            MeasurableSet::from_intervals(pieces)
        }
        SetDescriptor::Levels { tower, from, to } => {
            let System::RankOne(r) = system else {
                return Err(Error::InvalidSet("tower levels need a rank-one system".into()));
            };
            let t = r.tower(*tower)?;
            if from >= to || *to as u64 > t.height {
                return Err(Error::InvalidSet(format!(
                    "levels {from}..{to} outside tower {tower} of height {}",
                    t.height
                )));
            }
            let set = t.level_union(*from..*to);
            let pieces = set
                .intervals()
                .iter()
                .map(|(a, b)| Ok((S::from_f64(*a).expect("finite"), S::from_f64(*b).expect("finite"))))
                .collect::<Result<Vec<_>>>()?;
            MeasurableSet::from_intervals(pieces)
        }
        SetDescriptor::Cylinder { .. } => Err(Error::InvalidSet("cylinders need a Bernoulli system".into())),
    }
}

/// Resolves descriptors for `system`, or the default family when none are
/// given (dyadic intervals plus `[0, 1/3)`, or short cylinders).
pub fn resolve_sets(system: &System, descriptors: Option<&[SetDescriptor]>) -> Result<SetFamily> {
    match (system, descriptors) {
        (System::Bernoulli(shift), None) => Ok(SetFamily::Cylinders(default_cylinder_sets(shift))),
        (System::Bernoulli(shift), Some(ds)) => ds
            .iter()
            .map(|d| match d {
                SetDescriptor::Cylinder { position, word } => {
                    let set = CylinderSet::word(*position, word);
                    shift.validate_set(&set)?;
                    Ok(set)
                }
                _ => Err(Error::InvalidSet("a Bernoulli system needs cylinder sets".into())),
            })
            .collect::<Result<Vec<_>>>()
            .map(SetFamily::Cylinders),
        (System::ExactIet(_), None) => Ok(SetFamily::ExactIntervals(default_interval_sets())),
        (System::ExactIet(_), Some(ds)) => {
            ds.iter().map(|d| interval_set(d, system)).collect::<Result<Vec<_>>>().map(SetFamily::ExactIntervals)
        }
        (_, None) => Ok(SetFamily::Intervals(default_interval_sets())),
        (_, Some(ds)) => {
            ds.iter().map(|d| interval_set(d, system)).collect::<Result<Vec<_>>>().map(SetFamily::Intervals)
        }
    }
}
