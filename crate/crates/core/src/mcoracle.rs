//! Monte Carlo cross-checks for the exact engines.
//!
//! All randomness comes from Philox4x64-10, a counter-based generator. The
//! key is `(seed, task)` and sample `k` reads the blocks at counters
//! `(k, 0, 0, 0), (k, 1, 0, 0), ...`, so every sample has its own stream and
//! estimates do not depend on how samples are split across threads. A
//! uniform double is `(x >> 11) · 2^-53`.

use std::collections::BTreeMap;

use crate::entropy::{mc_entropy_estimate, EntropyProfile, Estimate, Method, ProfileRow, ProgressionSchedule};
use crate::error::{Error, Result};
use crate::refine::{IntervalPartition, PartitionSpec};
use crate::systems::{Coord, CylinderSet, Dynamics, Iet, MeasurableSet, RankOne, SymbolicShift, System};

const MUL: [u64; 2] = [0xD2E7_470E_E14C_6C93, 0xCA5A_8263_9512_1157];
const WEYL: [u64; 2] = [0x9E37_79B9_7F4A_7C15, 0xBB67_AE85_84CA_A73B];
const ROUNDS: usize = 10;

/// Samples per parallel chunk.
const CHUNK: u64 = 1 << 15;

fn mulhilo(a: u64, b: u64) -> (u64, u64) {
    let p = (a as u128) * (b as u128);
    ((p >> 64) as u64, p as u64)
}

/// Philox4x64-10 keyed by `(seed, task)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Philox {
    key: [u64; 2],
}

impl Philox {
    pub fn new(seed: u64, task: u64) -> Self {
        Philox { key: [seed, task] }
    }

    pub fn block(&self, counter: [u64; 4]) -> [u64; 4] {
        let mut x = counter;
        let mut k = self.key;
        for round in 0..ROUNDS {
            if round > 0 {
                k[0] = k[0].wrapping_add(WEYL[0]);
                k[1] = k[1].wrapping_add(WEYL[1]);
            }
            let (hi0, lo0) = mulhilo(MUL[0], x[0]);
            let (hi1, lo1) = mulhilo(MUL[1], x[2]);
            x = [hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0];
        }
        x
    }

    /// Stream of sample `k`.
    pub fn sample(&self, k: u64) -> Stream {
        Stream { gen: *self, sample: k, block: 0, buf: [0; 4], pos: 4 }
    }

    /// Stream of sample 0 under key `(seed, task)`.
    pub fn stream(seed: u64, task: u64) -> Stream {
        Philox::new(seed, task).sample(0)
    }
}

#[derive(Clone, Debug)]
pub struct Stream {
    gen: Philox,
    sample: u64,
    block: u64,
    buf: [u64; 4],
    pos: usize,
}

impl Stream {
    pub fn next_u64(&mut self) -> u64 {
        if self.pos == 4 {
            self.buf = self.gen.block([self.sample, self.block, 0, 0]);
            self.block += 1;
            self.pos = 0;
        }
        self.pos += 1;
        self.buf[self.pos - 1]
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Index drawn from a probability vector by inversion.
    pub fn categorical(&mut self, probabilities: &[f64]) -> usize {
        let u = self.next_f64();
        let mut acc = 0.0;
        for (i, p) in probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probabilities.len() - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SampleConfig {
    pub samples: u64,
    pub seed: u64,
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Validation("sample count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Runs `f` on every sample index of `0..n` in fixed chunks and folds the
/// per-chunk results in chunk order.
fn chunked<T: Send>(n: u64, f: impl Fn(std::ops::Range<u64>) -> T + Sync + Send) -> Vec<T> {
    let chunks: Vec<std::ops::Range<u64>> =
        (0..n.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(n)).collect();
    crate::par_map(&chunks, |r| f(r.clone()))
}

/// Counts of sampled label tuples, keyed by tuple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub counts: BTreeMap<Vec<u32>, u64>,
    pub samples: u64,
}

impl Histogram {
    fn merge(parts: Vec<BTreeMap<Vec<u32>, u64>>, samples: u64) -> Self {
        let mut counts = BTreeMap::new();
        for part in parts {
            for (k, v) in part {
                *counts.entry(k).or_insert(0) += v;
            }
        }
        Histogram { counts, samples }
    }

    /// Miller–Madow entropy of the tuple distribution and its standard error.
    pub fn entropy(&self) -> (f64, f64) {
        let values: Vec<u64> = self.counts.values().copied().collect();
        mc_entropy_estimate(&values, self.samples).expect("histogram totals match")
    }

    pub fn frequency(&self, tuple: &[u32]) -> f64 {
        self.counts.get(tuple).copied().unwrap_or(0) as f64 / self.samples as f64
    }
}

fn iet_histogram(
    map: &Iet<f64>,
    partition: &IntervalPartition<f64>,
    length: usize,
    gen: Philox,
    samples: u64,
) -> Histogram {
    let parts = chunked(samples, |range| {
        let mut counts = BTreeMap::new();
        let mut tuple = Vec::with_capacity(length);
        for k in range {
            let mut x = gen.sample(k).next_f64();
            tuple.clear();
            for _ in 0..length {
                x = map.map(&x).clamp_unit();
                tuple.push(partition.cell_of(&x) as u32);
            }
            *counts.entry(tuple.clone()).or_insert(0) += 1;
        }
        counts
    });
    Histogram::merge(parts, samples)
}

fn shift_histogram(shift: &SymbolicShift, depth: u32, j: u64, length: usize, gen: Philox, samples: u64) -> Histogram {
    let k = shift.alphabet_size() as u32;
    // Only coordinates read by some window are drawn, in increasing order.
    let mut covered: Vec<u64> = (0..length as u64).flat_map(|m| (0..depth as u64).map(move |d| m * j + d)).collect();
    covered.sort_unstable();
    covered.dedup();
    let windows: Vec<Vec<usize>> = (0..length as u64)
        .map(|m| (0..depth as u64).map(|d| covered.binary_search(&(m * j + d)).expect("covered")).collect())
        .collect();
    let parts = chunked(samples, |range| {
        let mut counts = BTreeMap::new();
        let mut word = vec![0u32; covered.len()];
        let mut tuple = Vec::with_capacity(length);
        for s in range {
            let mut stream = gen.sample(s);
            for c in word.iter_mut() {
                *c = stream.categorical(shift.probabilities()) as u32;
            }
            tuple.clear();
            tuple.extend(windows.iter().map(|w| w.iter().fold(0u32, |acc, &i| acc * k + word[i])));
            *counts.entry(tuple.clone()).or_insert(0) += 1;
        }
        counts
    });
    Histogram::merge(parts, samples)
}

/// Sampled histogram of `(ξ(R x), ..., ξ(R^L x))` with `R = T^j`. Bernoulli
/// shifts sample words directly and use the length-`k` cylinder partition.
pub fn mc_join_histogram(
    system: &System,
    partition: &PartitionSpec,
    j: u64,
    length: u64,
    config: &SampleConfig,
    task: u64,
) -> Result<Histogram> {
    config.validate()?;
    if j == 0 || length == 0 {
        return Err(Error::Validation("histogram needs j >= 1 and L >= 1".into()));
    }
    let gen = Philox::new(config.seed, task);
    match system {
        System::Iet(t) => {
            let r = t.power(j as i64).value;
            Ok(iet_histogram(&r, &partition.build()?, length as usize, gen, config.samples))
        }
        System::ExactIet(t) => {
            let r = t.power(j as i64).value.to_f64();
            Ok(iet_histogram(&r, &partition.build()?, length as usize, gen, config.samples))
        }
        System::Bernoulli(shift) => match partition {
            PartitionSpec::Dyadic { dyadic } => {
                if (*dyadic as f64) * (shift.alphabet_size() as f64).log2() > 32.0 {
                    return Err(Error::InvalidPartition("cylinder depth too large to label".into()));
                }
                Ok(shift_histogram(shift, *dyadic, j, length as usize, gen, config.samples))
            }
            PartitionSpec::Breakpoints { .. } => {
                Err(Error::Unsupported { what: "interval breakpoint partitions", system: "Bernoulli shift" })
            }
        },
        System::RankOne(_) => Err(Error::Unsupported { what: "join sampling", system: "rank-one tower" }),
    }
}

/// Monte Carlo `h_j` with standard error, from the histogram's
/// Miller–Madow entropy.
pub fn mc_h_j(
    system: &System,
    partition: &PartitionSpec,
    j: u64,
    length: u64,
    config: &SampleConfig,
    task: u64,
) -> Result<Estimate> {
    let hist = mc_join_histogram(system, partition, j, length, config, task)?;
    let (h_join, se) = hist.entropy();
    Ok(Estimate {
        h_join,
        h_j: h_join / length as f64,
        method: Method::MonteCarlo,
        stderr: Some(se / length as f64),
        degenerate: false,
    })
}

/// Monte Carlo profile; row `j` uses task index `j`.
pub fn mc_entropy_profile(
    system: &System,
    partition: &PartitionSpec,
    schedule: &ProgressionSchedule,
    js: &[u64],
    config: &SampleConfig,
) -> Result<EntropyProfile> {
    crate::entropy::validate_indices(js, schedule)?;
    partition.validate()?;
    config.validate()?;
    let rows = js
        .iter()
        .map(|&j| {
            let length = schedule.length(j).expect("validated");
            ProfileRow { j, length, outcome: mc_h_j(system, partition, j, length, config, j) }
        })
        .collect();
    Ok(EntropyProfile { rows })
}

/// Systems whose points can be sampled to test `x ∈ T^m A ∩ B`.
pub trait PointSampler: Dynamics {
    fn membership<'a>(
        &'a self,
        a: &'a Self::Set,
        b: &'a Self::Set,
        m: i64,
    ) -> Box<dyn Fn(&mut Stream) -> bool + Sync + 'a>;
}

impl<S: Coord> PointSampler for Iet<S> {
    fn membership<'a>(
        &'a self,
        a: &'a MeasurableSet<S>,
        b: &'a MeasurableSet<S>,
        m: i64,
    ) -> Box<dyn Fn(&mut Stream) -> bool + Sync + 'a> {
        let back = self.power(-m).value;
        Box::new(move |stream| {
            let Some(x) = S::from_f64(stream.next_f64()) else { return false };
            b.contains(&x) && a.contains(&back.map(&x))
        })
    }
}

impl PointSampler for SymbolicShift {
    fn membership<'a>(
        &'a self,
        a: &'a CylinderSet,
        b: &'a CylinderSet,
        m: i64,
    ) -> Box<dyn Fn(&mut Stream) -> bool + Sync + 'a> {
        // x ∈ T^m A iff x_{n - m} matches A at n for every constraint of A.
        let (Some(ca), Some(cb)) = (a.constraints(), b.constraints()) else {
            return Box::new(|_| false);
        };
        let mut coords: Vec<i64> = cb.keys().copied().chain(ca.keys().map(|c| c - m)).collect();
        coords.sort_unstable();
        coords.dedup();
        Box::new(move |stream| {
            let word: BTreeMap<i64, u8> =
                coords.iter().map(|&c| (c, stream.categorical(self.probabilities()) as u8)).collect();
            cb.iter().all(|(c, s)| word[c] == *s) && ca.iter().all(|(c, s)| word[&(c - m)] == *s)
        })
    }
}

impl PointSampler for RankOne {
    fn membership<'a>(
        &'a self,
        a: &'a MeasurableSet<f64>,
        b: &'a MeasurableSet<f64>,
        m: i64,
    ) -> Box<dyn Fn(&mut Stream) -> bool + Sync + 'a> {
        Box::new(move |stream| {
            let x = stream.next_f64();
            b.contains(&x) && self.tower.apply_power(x, -m).is_some_and(|y| a.contains(&y))
        })
    }
}

/// Binomial estimate of `μ(T^m A ∩ B)` with standard error
/// `sqrt(p(1 - p) / N)`.
pub fn mc_correlation<D: PointSampler>(
    system: &D,
    a: &D::Set,
    b: &D::Set,
    m: i64,
    config: &SampleConfig,
    task: u64,
) -> Result<(f64, f64)> {
    config.validate()?;
    let test = system.membership(a, b, m);
    let gen = Philox::new(config.seed, task);
    let hits: u64 =
        chunked(config.samples, |range| range.filter(|&k| test(&mut gen.sample(k))).count() as u64).into_iter().sum();
    let n = config.samples as f64;
    let p = hits as f64 / n;
    Ok((p, (p * (1.0 - p) / n).sqrt()))
}

/// `|exact - estimate| <= k·stderr`, with an absolute floor of `1e-9` when
/// the standard error is zero.
pub fn agreement_test(exact: f64, estimate: f64, stderr: f64, k: f64) -> bool {
    let floor = if stderr == 0.0 { 1e-9 } else { 0.0 };
    (exact - estimate).abs() <= k * stderr + floor
}
