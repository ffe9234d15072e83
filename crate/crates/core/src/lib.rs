//! Progression sequence entropy and weak-limit diagnostics for interval
//! exchanges, Bernoulli shifts and rank-one towers.
//!
//! The crate computes joins of interval partitions along arithmetic
//! progressions exactly, compares them against analytic values and Monte
//! Carlo estimates, and fits admissible operator models to correlation data.

pub mod descriptor;
pub mod entropy;
pub mod error;
pub mod limits;
pub mod mcoracle;
pub mod refine;
pub mod report;
pub mod systems;

pub use error::{Error, Result};
pub use refine::{IntervalPartition, LabeledDecomposition, PartitionSpec};
pub use systems::{Dynamics, Iet, MeasurableSet, System};

/// Order-preserving map over independent tasks, parallel when the
/// `parallel` feature is on.
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
