//! Weak-limit diagnostics built on exact correlations: admissible-model
//! fits, κ and Θ scans, rigidity times and triple-correlation fingerprints.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::systems::{Coord, CylinderSet, Dynamics, MeasurableSet, SymbolicShift};

/// Slack allowed on already-optimized quantities during lexicographic
/// tie-breaking.
const TIE_SLACK: f64 = 1e-11;

/// `a·Θ + Σ_i a_i T^i` with nonnegative coefficients summing to 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibleModel {
    /// Weight of the projection onto constants.
    pub theta: f64,
    pub support: Vec<i64>,
    pub coefficients: Vec<f64>,
}

impl AdmissibleModel {
    pub fn new(theta: f64, support: Vec<i64>, coefficients: Vec<f64>) -> Result<Self> {
        let model = AdmissibleModel { theta, support, coefficients };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.len() != self.coefficients.len() {
            return Err(Error::Validation("one coefficient per support time is required".into()));
        }
        let mut sorted = self.support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.support.len() {
            return Err(Error::Validation("support times must be distinct".into()));
        }
        if self.theta < 0.0 || self.coefficients.iter().any(|&a| !(a >= 0.0)) {
            return Err(Error::Validation("admissible coefficients must be nonnegative".into()));
        }
        let total = self.theta + self.coefficients.iter().sum::<f64>();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("admissible coefficients sum to {total}")));
        }
        Ok(())
    }

    /// Model value for a pair: `a·μ(A)μ(B) + Σ a_i·μ(T^i A ∩ B)`.
    pub fn predict(&self, obs: &Observation) -> f64 {
        self.theta * obs.product + self.coefficients.iter().zip(&obs.features).map(|(a, f)| a * f).sum::<f64>()
    }
}

/// One test pair seen through the model basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// The correlation to explain.
    pub target: f64,
    /// `μ(A)μ(B)`.
    pub product: f64,
    /// `μ(T^i A ∩ B)` for each support time.
    pub features: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub model: AdmissibleModel,
    /// Largest absolute deviation over the test pairs.
    pub residual: f64,
    pub m: i64,
    /// Two basis columns agree on every pair, so the coefficients are not
    /// identifiable.
    pub degenerate: bool,
}

enum Stage {
    Residual,
    Coefficient(usize),
}

/// Solves the epigraph program with variables `(a, a_1, ..., a_k, t)`.
fn solve_stage(obs: &[Observation], width: usize, stage: &Stage, fixed: &[f64]) -> Result<Vec<f64>> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let objective = |v: usize| match stage {
        Stage::Residual => (v == width) as u8 as f64,
        Stage::Coefficient(k) => (v == *k) as u8 as f64,
    };
    let vars: Vec<_> = (0..=width)
        .map(|v| {
            let upper = fixed.get(v).copied().unwrap_or(f64::INFINITY);
            lp.add_var(objective(v), (0.0, upper))
        })
        .collect();
    lp.add_constraint(vars[..width].iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    for o in obs {
        let vars = &vars;
        let row = |sign: f64| {
            std::iter::once((vars[0], sign * o.product))
                .chain(o.features.iter().enumerate().map(move |(i, f)| (vars[i + 1], sign * f)))
                .chain(std::iter::once((vars[width], -1.0)))
                .collect::<Vec<_>>()
        };
        // prediction - target <= t and target - prediction <= t
        lp.add_constraint(row(1.0), ComparisonOp::Le, o.target);
        lp.add_constraint(row(-1.0), ComparisonOp::Le, -o.target);
    }
    let outcome = lp.solve().map_err(|e| Error::Solver(e.to_string()))?;
    let solution = outcome.solution().ok_or_else(|| Error::Solver("solver interrupted".into()))?;
    Ok(vars.iter().map(|&v| solution.var_value(v)).collect())
}

fn columns_coincide(obs: &[Observation], width: usize) -> bool {
    let column = |c: usize, o: &Observation| if c == 0 { o.product } else { o.features[c - 1] };
    (0..width).any(|c1| (c1 + 1..width).any(|c2| obs.iter().all(|o| (column(c1, o) - column(c2, o)).abs() <= 1e-12)))
}

/// Minimax fit of an admissible model to observations. Ties are broken
/// toward the lexicographically smallest `(a, a_1, ..., a_k)`.
pub fn fit_observations(obs: &[Observation], support: &[i64], m: i64) -> Result<FitResult> {
    if obs.is_empty() {
        return Err(Error::Validation("at least one test pair is required".into()));
    }
    if obs.iter().any(|o| o.features.len() != support.len()) {
        return Err(Error::Validation("observation width does not match the support".into()));
    }
    let width = support.len() + 1;
    let mut upper = vec![f64::INFINITY; width + 1];
    let first = solve_stage(obs, width, &Stage::Residual, &[])?;
    upper[width] = first[width] + TIE_SLACK;
    let mut values = first;
    for k in 0..width {
        values = solve_stage(obs, width, &Stage::Coefficient(k), &upper)?;
        upper[k] = values[k] + TIE_SLACK;
    }
    let mut coefs: Vec<f64> = values[..width].iter().map(|v| v.max(0.0)).collect();
    let total: f64 = coefs.iter().sum();
    coefs.iter_mut().for_each(|v| *v /= total);
    let model = AdmissibleModel::new(coefs[0], support.to_vec(), coefs[1..].to_vec())?;
    let residual = obs.iter().map(|o| (model.predict(o) - o.target).abs()).fold(0.0, f64::max);
    Ok(FitResult { model, residual, m, degenerate: columns_coincide(obs, width) })
}

/// Observations of `T^m` on the given pairs against basis times `support`.
pub fn observe<D: Dynamics>(system: &D, m: i64, support: &[i64], pairs: &[(D::Set, D::Set)]) -> Vec<Observation> {
    pairs
        .iter()
        .map(|(a, b)| Observation {
            target: system.correlation(a, b, m),
            product: system.measure(a) * system.measure(b),
            features: support.iter().map(|&i| system.correlation(a, b, i)).collect(),
        })
        .collect()
}

/// Best admissible model on `support` for the time-`m` correlations.
pub fn fit_admissible<D: Dynamics>(
    system: &D,
    m: i64,
    support: &[i64],
    pairs: &[(D::Set, D::Set)],
) -> Result<FitResult> {
    fit_observations(&observe(system, m, support, pairs), support, m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KappaRow {
    pub m: i64,
    pub kappa: f64,
    pub residual: f64,
}

/// Fits `κΘ + (1 - κ)I` at each time and keeps the rows whose residual is
/// at most `threshold`.
pub fn kappa_scan<D: Dynamics>(
    system: &D,
    ms: &[i64],
    pairs: &[(D::Set, D::Set)],
    threshold: f64,
) -> Result<Vec<KappaRow>> {
    if ms.is_empty() {
        return Err(Error::Validation("m range is empty".into()));
    }
    let fits = crate::par_map(ms, |&m| fit_admissible(system, m, &[0], pairs));
    let mut rows = Vec::new();
    for fit in fits {
        let fit = fit?;
        if fit.residual <= threshold {
            rows.push(KappaRow { m: fit.m, kappa: fit.model.theta, residual: fit.residual });
        }
    }
    Ok(rows)
}

/// `max |μ(T^m A ∩ B) - μ(A)μ(B)|` over the pairs.
pub fn theta_distance<D: Dynamics>(system: &D, m: i64, pairs: &[(D::Set, D::Set)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Validation("at least one test pair is required".into()));
    }
    Ok(pairs
        .iter()
        .map(|(a, b)| (system.correlation(a, b, m) - system.measure(a) * system.measure(b)).abs())
        .fold(0.0, f64::max))
}

pub fn theta_scan<D: Dynamics>(system: &D, ms: &[i64], pairs: &[(D::Set, D::Set)]) -> Result<Vec<(i64, f64)>> {
    if ms.is_empty() {
        return Err(Error::Validation("m range is empty".into()));
    }
    crate::par_map(ms, |&m| theta_distance(system, m, pairs).map(|d| (m, d))).into_iter().collect()
}

/// Smallest distance over scanned times beyond `n`, the finite stand-in
/// for `inf_{m > n} w(T^m, Θ)`.
pub fn theta_separation(rows: &[(i64, f64)], n: i64) -> Option<f64> {
    rows.iter().filter(|(m, _)| *m > n).map(|(_, d)| *d).reduce(f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigidityReport {
    pub j: u64,
    #[serde(rename = "N")]
    pub n: Option<u64>,
    pub witness_m: Option<u64>,
    pub c: f64,
    /// `μ(T^m B_i ∩ B_i)` at the witness.
    #[serde(skip)]
    pub correlations: Vec<f64>,
    #[serde(skip)]
    pub diagnostic: Option<String>,
}

impl RigidityReport {
    pub fn exhausted(&self) -> bool {
        self.n.is_none()
    }
}

/// Minimal `m` with `j < m <= m_cap` and `μ(T^m B_i ∩ B_i) > c·μ(B_i)` for
/// the first `j` test sets.
pub fn rigidity_scan<D: Dynamics>(system: &D, sets: &[D::Set], c: f64, j: u64, m_cap: u64) -> Result<RigidityReport> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Validation(format!("rigidity constant {c} must lie in (0, 1)")));
    }
    if j == 0 {
        return Err(Error::Validation("j must be >= 1".into()));
    }
    if (sets.len() as u64) < j {
        return Err(Error::Validation(format!("{} test sets given, j = {j} needed", sets.len())));
    }
    let used = &sets[..j as usize];
    let measures: Vec<f64> = used.iter().map(|b| system.measure(b)).collect();
    let mut orbits: Vec<_> = used.iter().map(|b| system.orbit(b, j as i64 + 1)).collect();
    let mut best: Option<(u64, f64)> = None;
    for m in j + 1..=m_cap {
        let pushed: Vec<D::Set> = orbits.iter_mut().map(|o| o.next().expect("orbits are infinite")).collect();
        let correlations: Vec<f64> =
            pushed.iter().zip(used).map(|(p, b)| system.measure(&system.intersect(p, b))).collect();
        let worst = correlations.iter().zip(&measures).map(|(corr, mu)| corr / mu).fold(f64::INFINITY, f64::min);
        if correlations.iter().zip(&measures).all(|(corr, mu)| *corr > c * mu) {
            return Ok(RigidityReport { j, n: Some(m), witness_m: Some(m), c, correlations, diagnostic: None });
        }
        if best.map_or(true, |(_, r)| worst > r) {
            best = Some((m, worst));
        }
    }
    let diagnostic = match best {
        Some((m, r)) => format!("no m in ({j}, {m_cap}] passes; best worst-case ratio {r} at m = {m} against c = {c}"),
        None => format!("empty scan range ({j}, {m_cap}]"),
    };
    Ok(RigidityReport { j, n: None, witness_m: None, c, correlations: Vec::new(), diagnostic: Some(diagnostic) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FingerprintRow {
    pub m: i64,
    pub n: i64,
    pub forward: f64,
    pub backward: f64,
    pub forward_gap: f64,
    pub backward_gap: f64,
}

/// Forward and backward triple correlations of one set against the two
/// limit values `(μ + 2μ³)/3` and `μ²`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fingerprint {
    pub measure: f64,
    pub forward_target: f64,
    pub backward_target: f64,
    /// The targets coincide (`μ = 1/2`), so this set cannot tell them apart.
    pub coincident: bool,
    pub rows: Vec<FingerprintRow>,
}

pub fn fingerprint_targets(mu: f64) -> (f64, f64) {
    ((mu + 2.0 * mu.powi(3)) / 3.0, mu * mu)
}

pub fn asymmetry_fingerprint<D: Dynamics>(system: &D, a: &D::Set, times: &[(i64, i64)]) -> Result<Fingerprint> {
    let mu = system.measure(a);
    if mu <= 1e-12 || mu >= 1.0 - 1e-12 {
        return Err(Error::InvalidSet(format!("fingerprint needs 0 < μ(A) < 1, got {mu}")));
    }
    let (forward_target, backward_target) = fingerprint_targets(mu);
    let rows = times
        .iter()
        .map(|&(m, n)| {
            let forward = system.triple_correlation(a, m, n);
            let backward = system.triple_correlation(a, -m, -n);
            FingerprintRow {
                m,
                n,
                forward,
                backward,
                forward_gap: forward - forward_target,
                backward_gap: backward - backward_target,
            }
        })
        .collect();
    Ok(Fingerprint { measure: mu, forward_target, backward_target, coincident: (mu - 0.5).abs() <= 1e-12, rows })
}

/// Fingerprints for several sets; at least one must have `μ ≠ 1/2`.
pub fn asymmetry_fingerprints<D: Dynamics>(
    system: &D,
    sets: &[D::Set],
    times: &[(i64, i64)],
) -> Result<Vec<Fingerprint>> {
    let prints = sets.iter().map(|a| asymmetry_fingerprint(system, a, times)).collect::<Result<Vec<_>>>()?;
    if prints.iter().all(|f| f.coincident) {
        return Err(Error::Validation("every test set has measure 1/2; the two targets cannot be separated".into()));
    }
    Ok(prints)
}

/// Dyadic intervals of depths 1 to 5 in depth order, then `[0, 1/3)`.
pub fn default_interval_sets<S: Coord>() -> Vec<MeasurableSet<S>> {
    let mut sets = Vec::new();
    for depth in 1..=5u32 {
        let n = 1i64 << depth;
        for i in 0..n {
            sets.push(MeasurableSet::interval(S::from_ratio(i, n), S::from_ratio(i + 1, n)).expect("valid"));
        }
    }
    sets.push(MeasurableSet::interval(S::zero(), S::from_ratio(1, 3)).expect("valid"));
    sets
}

/// Cylinders at coordinate 0 of every word length up to the largest with
/// at most 32 words, shortest first.
pub fn default_cylinder_sets(shift: &SymbolicShift) -> Vec<CylinderSet> {
    let k = shift.alphabet_size();
    let mut sets = Vec::new();
    let mut words: Vec<Vec<u8>> = vec![Vec::new()];
    while words.len() * k <= 32 {
        words = words.iter().flat_map(|w| (0..k as u8).map(move |s| [w.as_slice(), &[s]].concat())).collect();
        sets.extend(words.iter().map(|w| CylinderSet::word(0, w)));
    }
    if sets.is_empty() {
        sets.extend((0..k as u8).map(|s| CylinderSet::word(0, &[s])));
    }
    sets
}

/// All ordered pairs `(A, B)` drawn from `sets`.
pub fn all_pairs<T: Clone>(sets: &[T]) -> Vec<(T, T)> {
    sets.iter().flat_map(|a| sets.iter().map(move |b| (a.clone(), b.clone()))).collect()
}
