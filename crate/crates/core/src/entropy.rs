//! Partition entropy, normalized join entropy along progressions, and the
//! search for progression lengths that drive it below `1/j` on a family.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::{join_over_progression, IntervalPartition, JoinSweep, PartitionSpec};
use crate::systems::{Coord, Iet, SymbolicShift, System};

/// `-Σ p ln p` over the positive entries, without validation.
pub fn entropy_of(measures: &[f64]) -> f64 {
    let s: f64 = measures.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum();
    0.0 - s
}

/// Shannon entropy in nats of a probability vector.
pub fn shannon_entropy(measures: &[f64]) -> Result<f64> {
    if let Some(bad) = measures.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::Validation(format!("measure {bad} is negative or not finite")));
    }
    let total: f64 = measures.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("measures sum to {total}, expected 1")));
    }
    Ok(entropy_of(measures))
}

/// Plug-in entropy of a histogram with the Miller–Madow correction
/// `(K - 1) / 2N`, and its standard error.
///
/// The standard error is the delta-method term `Var(-ln p̂) / N` plus the
/// second-order term `(K - 1) / 2N²`, which keeps it positive when the
/// observed distribution is uniform.
pub fn mc_entropy_estimate(counts: &[u64], n: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Validation("sample count must be at least 1".into()));
    }
    let total: u64 = counts.iter().sum();
    if total != n {
        return Err(Error::Validation(format!("histogram holds {total} samples, expected {n}")));
    }
    let nf = n as f64;
    let (mut h, mut second) = (0.0f64, 0.0f64);
    let mut observed = 0u64;
    for &c in counts.iter().filter(|&&c| c > 0) {
        let p = c as f64 / nf;
        let l = p.ln();
        h -= p * l;
        second += p * l * l;
        observed += 1;
    }
    let k1 = (observed - 1) as f64;
    let variance = ((second - h * h).max(0.0) / nf) + k1 / (2.0 * nf * nf);
    Ok((h + k1 / (2.0 * nf), variance.sqrt()))
}

/// The map `j ↦ L(j)` defining `P_j = {j, 2j, ..., L(j) j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum ProgressionSchedule {
    /// `L(j) = scale·j + offset`.
    Linear {
        #[serde(default = "unit")]
        scale: u64,
        #[serde(default)]
        offset: u64,
    },
    Constant {
        length: u64,
    },
    Table {
        j: Vec<u64>,
        #[serde(rename = "L")]
        lengths: Vec<u64>,
    },
}

fn unit() -> u64 {
    1
}

impl Default for ProgressionSchedule {
    fn default() -> Self {
        ProgressionSchedule::Linear { scale: 1, offset: 0 }
    }
}

impl ProgressionSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProgressionSchedule::Linear { scale: 0, offset: 0 } => {
                Err(Error::Validation("linear schedule gives L(j) = 0".into()))
            }
            ProgressionSchedule::Constant { length: 0 } => {
                Err(Error::Validation("constant schedule needs length >= 1".into()))
            }
            ProgressionSchedule::Table { j, lengths } => {
                if j.len() != lengths.len() {
                    return Err(Error::Validation(format!(
                        "schedule table lists {} indices and {} lengths",
                        j.len(),
                        lengths.len()
                    )));
                }
                if j.first() == Some(&0) || j.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Validation("schedule indices must be positive and strictly increasing".into()));
                }
                if lengths.contains(&0) {
                    return Err(Error::Validation("schedule lengths must be >= 1".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn length(&self, j: u64) -> Option<u64> {
        match self {
            ProgressionSchedule::Linear { scale, offset } => {
                scale.checked_mul(j)?.checked_add(*offset).filter(|&l| l >= 1)
            }
            ProgressionSchedule::Constant { length } => Some(*length).filter(|&l| l >= 1),
            ProgressionSchedule::Table { j: js, lengths } => js.binary_search(&j).ok().map(|i| lengths[i]),
        }
    }

    /// Nondecreasing on `js` and strictly larger at the end than at the
    /// start: the finite evidence for `L(j) → ∞`.
    pub fn grows_on(&self, js: &[u64]) -> bool {
        let ls: Option<Vec<u64>> = js.iter().map(|&j| self.length(j)).collect();
        match ls {
            Some(ls) if ls.len() >= 2 => ls.windows(2).all(|w| w[0] <= w[1]) && ls.last() > ls.first(),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Analytic,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Analytic => "analytic",
            Method::MonteCarlo => "montecarlo",
        }
    }
}

/// Join entropy over `L` progression times and its per-element value.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub h_join: f64,
    pub h_j: f64,
    pub method: Method,
    pub stderr: Option<f64>,
    /// Breakpoint collisions met by the exact engine.
    pub degenerate: bool,
}

/// Number of distinct coordinates covered by the length-`depth` cylinder
/// windows starting at `j, 2j, ..., L j`.
fn covered_coordinates(depth: u64, j: u64, length: u64) -> u64 {
    if depth == 0 {
        0
    } else if j >= depth {
        length * depth
    } else {
        (length - 1) * j + depth
    }
}

/// Analytic join entropy of the length-`depth` cylinder partition of a
/// Bernoulli shift: coordinates are independent, so only their count matters.
pub fn bernoulli_join_entropy(shift: &SymbolicShift, depth: u32, j: u64, length: u64) -> f64 {
    covered_coordinates(depth as u64, j, length) as f64 * shift.symbol_entropy()
}

fn exact_estimate<S: Coord>(
    map: &Iet<S>,
    partition: &PartitionSpec,
    j: u64,
    length: u64,
    cap: usize,
) -> Result<Estimate> {
    let xi: IntervalPartition<S> = partition.build()?;
    let join = join_over_progression(map, &xi, j, length as usize, cap)?;
    let h_join = join.entropy();
    Ok(Estimate {
        h_join,
        h_j: h_join / length as f64,
        method: Method::Exact,
        stderr: None,
        degenerate: !join.degeneracies.is_empty(),
    })
}

fn bernoulli_depth(partition: &PartitionSpec) -> Result<u32> {
    match partition {
        PartitionSpec::Dyadic { dyadic } => Ok(*dyadic),
        PartitionSpec::Breakpoints { .. } => {
            Err(Error::Unsupported { what: "interval breakpoint partitions", system: "Bernoulli shift" })
        }
    }
}

/// `h_j(T, ξ)` over `P_j = {j, ..., L j}`: exact for interval exchanges,
/// analytic for Bernoulli shifts with the cylinder partition of the given
/// depth.
pub fn h_j(system: &System, partition: &PartitionSpec, j: u64, length: u64, cap: usize) -> Result<Estimate> {
    if j == 0 || length == 0 {
        return Err(Error::Validation("h_j needs j >= 1 and L >= 1".into()));
    }
    match system {
        System::Iet(t) => exact_estimate(t, partition, j, length, cap),
        System::ExactIet(t) => exact_estimate(t, partition, j, length, cap),
        System::Bernoulli(shift) => {
            let h_join = bernoulli_join_entropy(shift, bernoulli_depth(partition)?, j, length);
            Ok(Estimate {
                h_join,
                h_j: h_join / length as f64,
                method: Method::Analytic,
                stderr: None,
                degenerate: false,
            })
        }
        System::RankOne(_) => Err(Error::Unsupported { what: "join entropy", system: "rank-one tower" }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileRow {
    pub j: u64,
    pub length: u64,
    pub outcome: Result<Estimate>,
}

/// One row per requested `j`; failures stay in their own row.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyProfile {
    pub rows: Vec<ProfileRow>,
}

pub fn validate_indices(js: &[u64], schedule: &ProgressionSchedule) -> Result<()> {
    if js.is_empty() {
        return Err(Error::Validation("j_set is empty".into()));
    }
    if js.contains(&0) {
        return Err(Error::Validation("j values must be >= 1".into()));
    }
    schedule.validate()?;
    if let Some(j) = js.iter().find(|&&j| schedule.length(j).is_none()) {
        return Err(Error::Validation(format!("schedule has no length for j = {j}")));
    }
    Ok(())
}

pub fn p_entropy_profile(
    system: &System,
    partition: &PartitionSpec,
    schedule: &ProgressionSchedule,
    js: &[u64],
    cap: usize,
) -> Result<EntropyProfile> {
    validate_indices(js, schedule)?;
    partition.validate()?;
    let rows = crate::par_map(js, |&j| {
        let length = schedule.length(j).expect("validated");
        ProfileRow { j, length, outcome: h_j(system, partition, j, length, cap) }
    });
    Ok(EntropyProfile { rows })
}

/// Join entropies `H(ζ_1), H(ζ_2), ...` of one (system, partition, j)
/// triple, extended on demand.
enum Curve {
    Float(JoinSweep<f64>, Vec<f64>),
    Exact(JoinSweep<BigRational>, Vec<f64>),
    Analytic { shift: SymbolicShift, depth: u32, j: u64 },
}

fn extend<S: Coord>(sweep: &mut JoinSweep<S>, history: &mut Vec<f64>, length: u64) -> Result<f64> {
    while (history.len() as u64) < length {
        sweep.step()?;
        history.push(sweep.entropy());
    }
    Ok(history[length as usize - 1])
}

impl Curve {
    fn new(system: &System, partition: &PartitionSpec, j: u64, cap: usize) -> Result<Self> {
        Ok(match system {
            System::Iet(t) => {
                let r = t.power(j as i64).value;
                Curve::Float(JoinSweep::new(r, partition.build()?, cap), Vec::new())
            }
            System::ExactIet(t) => {
                let r = t.power(j as i64).value;
                Curve::Exact(JoinSweep::new(r, partition.build()?, cap), Vec::new())
            }
            System::Bernoulli(shift) => Curve::Analytic { shift: shift.clone(), depth: bernoulli_depth(partition)?, j },
            System::RankOne(_) => return Err(Error::Unsupported { what: "join entropy", system: "rank-one tower" }),
        })
    }

    /// `h_j` at `L` factors.
    fn h(&mut self, length: u64) -> Result<f64> {
        let h_join = match self {
            Curve::Float(sweep, history) => extend(sweep, history, length)?,
            Curve::Exact(sweep, history) => extend(sweep, history, length)?,
            Curve::Analytic { shift, depth, j } => bernoulli_join_entropy(shift, *depth, *j, length),
        };
        Ok(h_join / length as f64)
    }
}

/// Output of [`schedule_finder`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleSearch {
    /// The merged schedule `L(j)`.
    pub schedule: ProgressionSchedule,
    /// Minimal `L_S(j)` for each member, indexed `[member][j index]`.
    pub member_lengths: Vec<Vec<u64>>,
    /// Indices `j` where the merged length had to be raised above the
    /// family maximum for every member to pass.
    pub raised: Vec<u64>,
}

/// Curves of one member at one `j`: the partitions `ξ_i` with `i < j`.
struct MemberCurves {
    curves: Vec<Curve>,
}

impl MemberCurves {
    /// First partition index with `h_j >= 1/j` at this length, with its value.
    fn failure(&mut self, j: u64, length: u64) -> Result<Option<(usize, f64)>> {
        let bound = 1.0 / j as f64;
        for (i, curve) in self.curves.iter_mut().enumerate() {
            let h = curve.h(length)?;
            if !(h < bound) {
                return Ok(Some((i, h)));
            }
        }
        Ok(None)
    }
}

struct RowSearch {
    lengths: Vec<u64>,
    merged: u64,
    raised: bool,
}

fn search_row(family: &[System], partitions: &[PartitionSpec], j: u64, l_cap: u64, cap: usize) -> Result<RowSearch> {
    let usable = partitions.len().min(j.saturating_sub(1) as usize);
    let mut members = family
        .iter()
        .map(|s| {
            let curves = partitions[..usable].iter().map(|p| Curve::new(s, p, j, cap)).collect::<Result<Vec<_>>>()?;
            Ok(MemberCurves { curves })
        })
        .collect::<Result<Vec<_>>>()?;

    let witness = |member: usize, partition: usize, best: f64| Error::PositiveEntropyWitness {
        member: member + 1,
        j,
        partition: partition + 1,
        cap: l_cap,
        best,
    };

    let mut lengths = Vec::with_capacity(members.len());
    for (index, member) in members.iter_mut().enumerate() {
        let (mut lo, mut hi) = (0u64, 1u64);
        loop {
            match member.failure(j, hi)? {
                None => break,
                Some((p, h)) if hi >= l_cap => return Err(witness(index, p, h)),
                Some(_) => {
                    lo = hi;
                    hi = (hi * 2).min(l_cap);
                }
            }
        }
        let mut minimal = hi;
        for l in lo + 1..hi {
            if member.failure(j, l)?.is_none() {
                minimal = l;
                break;
            }
        }
        lengths.push(minimal);
    }

    let mut merged = lengths.iter().copied().max().unwrap_or(1);
    let start = merged;
    'raise: loop {
        for (index, member) in members.iter_mut().enumerate() {
            if let Some((p, h)) = member.failure(j, merged)? {
                if merged >= l_cap {
                    return Err(witness(index, p, h));
                }
                merged += 1;
                continue 'raise;
            }
        }
        break;
    }
    Ok(RowSearch { lengths, merged, raised: merged != start })
}

/// For each `j` in `js`, the least `L_S(j)` with `h_j(S, ξ_i, j, L) < 1/j`
/// for every member `S` and every partition index `i < j`, merged over the
/// family by taking the maximum. Lengths are searched by doubling up to
/// `l_cap` and then scanned upward inside the last bracket.
pub fn schedule_finder(
    family: &[System],
    partitions: &[PartitionSpec],
    js: &[u64],
    l_cap: u64,
    cap: usize,
) -> Result<ScheduleSearch> {
    if family.is_empty() {
        return Err(Error::Validation("schedule family is empty".into()));
    }
    if js.is_empty() || js.contains(&0) || js.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("j values must be positive and strictly increasing".into()));
    }
    if l_cap == 0 {
        return Err(Error::Validation("L cap must be >= 1".into()));
    }
    for p in partitions {
        p.validate()?;
    }
    let rows = crate::par_map(js, |&j| search_row(family, partitions, j, l_cap, cap));
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let mut member_lengths = vec![Vec::with_capacity(js.len()); family.len()];
    for row in &rows {
        for (m, &l) in row.lengths.iter().enumerate() {
            member_lengths[m].push(l);
        }
    }
    let raised = js.iter().zip(&rows).filter(|(_, r)| r.raised).map(|(&j, _)| j).collect();
    Ok(ScheduleSearch {
        schedule: ProgressionSchedule::Table { j: js.to_vec(), lengths: rows.iter().map(|r| r.merged).collect() },
        member_lengths,
        raised,
    })
}

/// A failed re-check of a schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// 1-based.
    pub member: usize,
    pub j: u64,
    /// 1-based partition index.
    pub partition: usize,
    pub h_j: f64,
}

/// Recomputes every `h_j(S, ξ_i, j, L(j))` with `i < j` from scratch and
/// lists those not below `1/j`.
pub fn verify_schedule(
    family: &[System],
    partitions: &[PartitionSpec],
    schedule: &ProgressionSchedule,
    js: &[u64],
    cap: usize,
) -> Result<Vec<Violation>> {
    validate_indices(js, schedule)?;
    let per_j = crate::par_map(js, |&j| -> Result<Vec<Violation>> {
        let length = schedule.length(j).expect("validated");
        let usable = partitions.len().min(j.saturating_sub(1) as usize);
        let mut out = Vec::new();
        for (member, system) in family.iter().enumerate() {
            for (i, p) in partitions[..usable].iter().enumerate() {
                let h = h_j(system, p, j, length, cap)?.h_j;
                if !(h < 1.0 / j as f64) {
                    out.push(Violation { member: member + 1, j, partition: i + 1, h_j: h });
                }
            }
        }
        Ok(out)
    });
    let mut violations = Vec::new();
    for v in per_j {
        violations.extend(v?);
    }
    Ok(violations)
}
