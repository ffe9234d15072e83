//! Batch experiments over `pentropy-core`, shared by the `plab` binary and
//! the tests. Every command turns a validated configuration into a list of
//! named output files; the binary only writes them.

pub mod config;

use std::fmt::Display;
use std::fmt::Write as _;

use pentropy_core::descriptor::{resolve_sets, SetDescriptor, SetFamily, SystemDescriptor};
use pentropy_core::entropy::{p_entropy_profile, schedule_finder, verify_schedule, ProgressionSchedule};
use pentropy_core::limits::{all_pairs, asymmetry_fingerprints, fit_admissible, kappa_scan, rigidity_scan, theta_scan};
use pentropy_core::mcoracle::{agreement_test, mc_correlation, mc_h_j, PointSampler, SampleConfig};
use pentropy_core::refine::{PartitionSpec, DEFAULT_ELEMENTARY_CAP};
use pentropy_core::report::{
    fmt_sig12, json_number, kappa_csv, profile_csv, rigidity_json, schedule_json, theta_csv, to_text,
};
use pentropy_core::systems::{RankOne, System};
use pentropy_core::{entropy, Error};
use serde_json::json;

pub use config::{ExperimentConfig, IndexSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Pentropy,
    Schedule,
    Scan,
    Tower,
    Oracle,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// A structured failure with its exit code.
#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub exit: i32,
    pub code: String,
    pub messages: Vec<String>,
}

impl Failure {
    pub fn validation(messages: Vec<String>) -> Self {
        Failure { exit: EXIT_VALIDATION, code: "validation".into(), messages }
    }

    fn internal(message: impl Into<String>) -> Self {
        Failure { exit: EXIT_INTERNAL, code: "internal".into(), messages: vec![message.into()] }
    }

    pub fn to_json(&self) -> String {
        to_text(&json!({ "error": self.code, "exit": self.exit, "messages": self.messages }))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let exit = match &e {
            e if e.is_cap() => EXIT_CAP,
            Error::Solver(_) => EXIT_INTERNAL,
            _ => EXIT_VALIDATION,
        };
        Failure { exit, code: e.code().into(), messages: vec![e.to_string()] }
    }
}

/// Files produced by a command, in a fixed order, and the failure (if any)
/// that the run ended with. Files are kept even on failure.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub failure: Option<Failure>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(EXIT_OK, |f| f.exit)
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

/// Collects every validation problem before anything runs.
#[derive(Default)]
struct Checks {
    errors: Vec<String>,
}

impl Checks {
    fn take<T, E: Display>(&mut self, what: &str, r: Result<T, E>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("{what}: {e}"));
                None
            }
        }
    }

    fn require<T: Clone>(&mut self, what: &str, v: &Option<T>) -> Option<T> {
        if v.is_none() {
            self.errors.push(format!("{what} is required"));
        }
        v.clone()
    }

    fn fail(&mut self, message: String) {
        self.errors.push(message);
    }

    fn finish(self) -> Result<(), Failure> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(Failure::validation(self.errors))
        }
    }
}

fn system(checks: &mut Checks, d: &Option<SystemDescriptor>) -> Option<System> {
    let d = checks.require("system", d)?;
    checks.take("system", d.build())
}

fn positive_indices(
    checks: &mut Checks,
    key: &str,
    set: &Option<IndexSet>,
    default: Option<IndexSet>,
) -> Option<Vec<u64>> {
    let set = match (set, default) {
        (Some(s), _) => s.clone(),
        (None, Some(d)) => d,
        (None, None) => {
            checks.fail(format!("{key} is required"));
            return None;
        }
    };
    let values = checks.take(key, set.values())?;
    if values.is_empty() {
        checks.fail(format!("{key}: the index set is empty"));
        return None;
    }
    if values.iter().any(|&v| v < 1) {
        checks.fail(format!("{key}: indices must be >= 1"));
        return None;
    }
    Some(values.into_iter().map(|v| v as u64).collect())
}

fn partition(checks: &mut Checks, p: &Option<PartitionSpec>) -> Option<PartitionSpec> {
    let p = p.clone().unwrap_or(PartitionSpec::dyadic(1));
    checks.take("partition", p.validate()).map(|_| p)
}

fn schedule(checks: &mut Checks, s: &Option<ProgressionSchedule>) -> Option<ProgressionSchedule> {
    let s = s.clone().unwrap_or_default();
    checks.take("schedule", s.validate()).map(|_| s)
}

fn sets(checks: &mut Checks, system: &Option<System>, d: &Option<Vec<SetDescriptor>>) -> Option<SetFamily> {
    let system = system.as_ref()?;
    let family = checks.take("sets", resolve_sets(system, d.as_deref()))?;
    if family.is_empty() {
        checks.fail("sets: at least one test set is required".into());
        return None;
    }
    Some(family)
}

/// Runs one command on a configuration.
pub fn run(command: Command, config: &ExperimentConfig) -> RunOutput {
    let result = match command {
        Command::Pentropy => run_pentropy(config),
        Command::Schedule => run_schedule(config),
        Command::Scan => run_scan(config),
        Command::Tower => run_tower(config),
        Command::Oracle => run_oracle(config),
    };
    match result {
        Ok(out) => out,
        Err(failure) => RunOutput { files: Vec::new(), failure: Some(failure) },
    }
}

/// Most severe row failure: cap exhaustion, then internal, then validation.
fn worst(errors: impl Iterator<Item = Failure>) -> Option<Failure> {
    let rank = |f: &Failure| match f.exit {
        EXIT_CAP => 3,
        EXIT_INTERNAL => 2,
        _ => 1,
    };
    let mut all: Vec<Failure> = errors.collect();
    let best = all.iter().map(rank).max()?;
    let messages = all.iter().filter(|f| rank(f) == best).flat_map(|f| f.messages.clone()).collect();
    let mut head = all.swap_remove(all.iter().position(|f| rank(f) == best).expect("present"));
    head.messages = messages;
    Some(head)
}

fn run_pentropy(config: &ExperimentConfig) -> Result<RunOutput, Failure> {
    let mut checks = Checks::default();
    let system = system(&mut checks, &config.system);
    let partition = partition(&mut checks, &config.partition);
    let schedule = schedule(&mut checks, &config.schedule);
    let js = positive_indices(&mut checks, "j", &config.j, None);
    if let (Some(s), Some(js)) = (&schedule, &js) {
        checks.take("schedule", entropy::validate_indices(js, s));
    }
    checks.finish()?;
    let (system, partition, schedule, js) = (system.unwrap(), partition.unwrap(), schedule.unwrap(), js.unwrap());
    let cap = config.cap.unwrap_or(DEFAULT_ELEMENTARY_CAP);

    let profile = p_entropy_profile(&system, &partition, &schedule, &js, cap)?;
    let failure = worst(profile.rows.iter().filter_map(|r| r.outcome.clone().err()).map(Failure::from));
    Ok(RunOutput { files: vec![("profile.csv".into(), profile_csv(&profile))], failure })
}

fn run_schedule(config: &ExperimentConfig) -> Result<RunOutput, Failure> {
    let mut checks = Checks::default();
    let descriptors = match (&config.family, &config.system) {
        (Some(f), _) => f.clone(),
        (None, Some(s)) => vec![s.clone()],
        (None, None) => {
            checks.fail("family (or system) is required".into());
            Vec::new()
        }
    };
    if config.family.as_ref().is_some_and(|f| f.is_empty()) {
        checks.fail("family: at least one member is required".into());
    }
    let family: Vec<System> = descriptors
        .iter()
        .enumerate()
        .filter_map(|(i, d)| checks.take(&format!("family[{}]", i + 1), d.build()))
        .collect();
    let partitions = config.partitions.clone().unwrap_or_else(|| (1..=3).map(PartitionSpec::dyadic).collect());
    for (i, p) in partitions.iter().enumerate() {
        checks.take(&format!("partitions[{}]", i + 1), p.validate());
    }
    let js = positive_indices(&mut checks, "j", &config.j, None);
    if let Some(js) = &js {
        if js.windows(2).any(|w| w[1] <= w[0]) {
            checks.fail("j: indices must be strictly increasing".into());
        }
    }
    let l_cap = config.l_cap.unwrap_or(1 << 14);
    if l_cap == 0 {
        checks.fail("l_cap must be >= 1".into());
    }
    checks.finish()?;
    let js = js.unwrap();
    let cap = config.cap.unwrap_or(DEFAULT_ELEMENTARY_CAP);

    let found = schedule_finder(&family, &partitions, &js, l_cap, cap)?;
    let violations = verify_schedule(&family, &partitions, &found.schedule, &js, cap)?;
    let checked: usize = js.iter().map(|&j| family.len() * partitions.len().min(j.saturating_sub(1) as usize)).sum();
    let check = json!({
        "checked": checked,
        "raised": found.raised,
        "violations": violations
            .iter()
            .map(|v| json!({ "member": v.member, "j": v.j, "partition": v.partition, "h_j": json_number(v.h_j) }))
            .collect::<Vec<_>>(),
    });
    let mut members = String::from("j,L");
    for i in 1..=family.len() {
        let _ = write!(members, ",member_{i}");
    }
    members.push('\n');
    for (k, &j) in js.iter().enumerate() {
        let _ = write!(members, "{j},{}", found.schedule.length(j).expect("tabulated"));
        for m in &found.member_lengths {
            let _ = write!(members, ",{}", m[k]);
        }
        members.push('\n');
    }
    let failure = (!violations.is_empty()).then(|| Failure {
        exit: EXIT_INTERNAL,
        code: "recheck_failed".into(),
        messages: vec![format!("{} schedule re-checks failed", violations.len())],
    });
    Ok(RunOutput {
        files: vec![
            ("schedule.json".into(), to_text(&schedule_json(&found.schedule))),
            ("schedule_members.csv".into(), members),
            ("schedule_check.json".into(), to_text(&check)),
        ],
        failure,
    })
}

/// Applies `$body` with `$sys: &D` and `$sets: &[D::Set]` for the concrete
/// system type.
macro_rules! with_sets {
    ($system:expr, $family:expr, |$sys:ident, $sets:ident| $body:expr) => {
        match ($system, $family) {
            (System::Iet(t), SetFamily::Intervals(v)) => {
                let ($sys, $sets) = (t, v.as_slice());
                $body
            }
            (System::ExactIet(t), SetFamily::ExactIntervals(v)) => {
                let ($sys, $sets) = (t, v.as_slice());
                $body
            }
            (System::Bernoulli(t), SetFamily::Cylinders(v)) => {
                let ($sys, $sets) = (t, v.as_slice());
                $body
            }
            (System::RankOne(t), SetFamily::Intervals(v)) => {
                let ($sys, $sets) = (t.as_ref(), v.as_slice());
                $body
            }
            _ => Err(Failure::internal("test sets do not match the system")),
        }
    };
}

struct ScanParams {
    ms: Vec<i64>,
    js: Vec<u64>,
    c: f64,
    m_cap: u64,
    threshold: f64,
    all_pairs: bool,
    support: Option<Vec<i64>>,
    times: Option<Vec<(i64, i64)>>,
}

fn scan_with<D: PointSampler>(sys: &D, sets: &[D::Set], p: &ScanParams) -> Result<RunOutput, Failure> {
    let pairs: Vec<(D::Set, D::Set)> =
        if p.all_pairs { all_pairs(sets) } else { sets.iter().map(|s| (s.clone(), s.clone())).collect() };
    let mut files = Vec::new();

    let mut corr = String::from("m,set,correlation\n");
    for &m in &p.ms {
        for (i, s) in sets.iter().enumerate() {
            let _ = writeln!(corr, "{m},{},{}", i + 1, fmt_sig12(sys.correlation(s, s, m)));
        }
    }
    files.push(("correlation.csv".into(), corr));
    files.push(("kappa.csv".into(), kappa_csv(&kappa_scan(sys, &p.ms, &pairs, p.threshold)?)));
    files.push(("theta.csv".into(), theta_csv(&theta_scan(sys, &p.ms, &pairs)?)));

    if let Some(support) = &p.support {
        let mut fit = String::from("m,theta");
        for i in support {
            let _ = write!(fit, ",coef_{i}");
        }
        fit.push_str(",residual,degenerate\n");
        for &m in &p.ms {
            let r = fit_admissible(sys, m, support, &pairs)?;
            let _ = write!(fit, "{m},{}", fmt_sig12(r.model.theta));
            for a in &r.model.coefficients {
                let _ = write!(fit, ",{}", fmt_sig12(*a));
            }
            let _ = writeln!(fit, ",{},{}", fmt_sig12(r.residual), r.degenerate);
        }
        files.push(("fit.csv".into(), fit));
    }

    let mut reports = Vec::new();
    let mut exhausted = Vec::new();
    for &j in &p.js {
        let report = rigidity_scan(sys, sets, p.c, j, p.m_cap)?;
        if let Some(d) = &report.diagnostic {
            exhausted.push(d.clone());
        }
        reports.push(rigidity_json(&report));
    }
    files.push(("rigidity.json".into(), to_text(&serde_json::Value::Array(reports))));

    if let Some(times) = &p.times {
        let prints = asymmetry_fingerprints(sys, sets, times)?;
        let value = json!(prints
            .iter()
            .enumerate()
            .map(|(i, f)| json!({
                "set": i + 1,
                "measure": json_number(f.measure),
                "forward_target": json_number(f.forward_target),
                "backward_target": json_number(f.backward_target),
                "coincident": f.coincident,
                "rows": f.rows.iter().map(|r| json!({
                    "m": r.m, "n": r.n,
                    "forward": json_number(r.forward),
                    "backward": json_number(r.backward),
                    "forward_gap": json_number(r.forward_gap),
                    "backward_gap": json_number(r.backward_gap),
                })).collect::<Vec<_>>(),
            }))
            .collect::<Vec<_>>());
        files.push(("fingerprint.json".into(), to_text(&value)));
    }

    let failure =
        (!exhausted.is_empty()).then(|| Failure { exit: EXIT_CAP, code: "cap_exhausted".into(), messages: exhausted });
    Ok(RunOutput { files, failure })
}

fn run_scan(config: &ExperimentConfig) -> Result<RunOutput, Failure> {
    let mut checks = Checks::default();
    let system = system(&mut checks, &config.system);
    let family = sets(&mut checks, &system, &config.sets);
    let ms = config.m.clone().unwrap_or(IndexSet::Range { from: 1, to: 100, step: 1 });
    let ms = checks.take("m", ms.values());
    if ms.as_ref().is_some_and(|m| m.is_empty()) {
        checks.fail("m: the index set is empty".into());
    }
    let default_j = family.as_ref().map(|f| IndexSet::Range { from: 1, to: f.len().min(30) as i64, step: 1 });
    let js = positive_indices(&mut checks, "j", &config.j, default_j);
    if let (Some(js), Some(f)) = (&js, &family) {
        if js.iter().any(|&j| j as usize > f.len()) {
            checks.fail(format!("j: rigidity needs at least j test sets, {} given", f.len()));
        }
    }
    let c = config.c.unwrap_or(0.5);
    if !(c > 0.0 && c < 1.0) {
        checks.fail(format!("c: {c} must lie in (0, 1)"));
    }
    let threshold = config.kappa_threshold.unwrap_or(1e-9);
    if !(threshold >= 0.0) {
        checks.fail("kappa_threshold must be >= 0".into());
    }
    let all = match config.pairs.as_deref() {
        None | Some("diagonal") => false,
        Some("all") => true,
        Some(other) => {
            checks.fail(format!("pairs: expected \"diagonal\" or \"all\", got {other:?}"));
            false
        }
    };
    if config.support.as_ref().is_some_and(|s| s.is_empty()) {
        checks.fail("support: at least one time is required".into());
    }
    checks.finish()?;
    let params = ScanParams {
        ms: ms.unwrap(),
        js: js.unwrap(),
        c,
        m_cap: config.m_cap.unwrap_or(1000),
        threshold,
        all_pairs: all,
        support: config.support.clone(),
        times: config.times.clone(),
    };
    let (system, family) = (system.unwrap(), family.unwrap());
    with_sets!(&system, &family, |sys, sets| scan_with(sys, sets, &params))
}

fn run_tower(config: &ExperimentConfig) -> Result<RunOutput, Failure> {
    let mut checks = Checks::default();
    let descriptor = checks.require("system", &config.system);
    let recipe = descriptor.and_then(|d| checks.take("system", d.recipe()));
    let towers = recipe.as_ref().map(|r| r.tower_count()).unwrap_or(1);
    let default_n = IndexSet::Range { from: 2.min(towers as i64), to: towers as i64, step: 1 };
    let ns = positive_indices(&mut checks, "j", &config.j, Some(default_n));
    if ns.as_ref().is_some_and(|ns| ns.iter().any(|&n| n as usize > towers)) {
        checks.fail(format!("j: tower indices must be <= {towers}"));
    }
    let system = match &recipe {
        Some(r) => checks.take("system", RankOne::new(r.clone())).map(|r| System::RankOne(Box::new(r))),
        None => None,
    };
    let coarse = towers.min(3);
    let default_sets = system.as_ref().map(|_| {
        let h = recipe.as_ref().unwrap().heights().unwrap_or_default()[coarse - 1] as usize;
        let mut d = vec![SetDescriptor::Levels { tower: coarse, from: 0, to: h }];
        if h >= 2 {
            d.push(SetDescriptor::Levels { tower: coarse, from: 0, to: 2 });
            d.push(SetDescriptor::Levels { tower: coarse, from: h / 2, to: h });
        }
        d
    });
    let descriptors = config.sets.clone().or(default_sets);
    let family = sets(&mut checks, &system, &descriptors);
    checks.finish()?;
    let (recipe, ns, system, family) = (recipe.unwrap(), ns.unwrap(), system.unwrap(), family.unwrap());
    let (System::RankOne(rank), SetFamily::Intervals(sets)) = (&system, &family) else {
        return Err(Failure::internal("tower command needs a rank-one system"));
    };

    let mut heights = String::from("n,height,level_width,residual_mass\n");
    for n in 1..=recipe.tower_count() {
        let t = rank.tower(n)?;
        let _ = writeln!(heights, "{n},{},{},{}", t.height, fmt_sig12(t.level_width), fmt_sig12(t.residual_mass));
    }
    let h = recipe.heights()?;
    let mut rig = String::from("n,h_n,set,measure,correlation,ratio,undefined_mass\n");
    for &n in &ns {
        let m = h[n as usize - 1] as i64;
        for (i, a) in sets.iter().enumerate() {
            use pentropy_core::Dynamics;
            let mu = rank.measure(a);
            let corr = rank.correlation(a, a, m);
            let _ = writeln!(
                rig,
                "{n},{m},{},{},{},{},{}",
                i + 1,
                fmt_sig12(mu),
                fmt_sig12(corr),
                fmt_sig12(corr / mu),
                fmt_sig12(rank.undefined_mass(m))
            );
        }
    }
    Ok(RunOutput { files: vec![("heights.csv".into(), heights), ("tower_rigidity.csv".into(), rig)], failure: None })
}

fn oracle_with<D: PointSampler>(
    sys: &D,
    sets: &[D::Set],
    ms: &[i64],
    config: &SampleConfig,
) -> Result<String, Failure> {
    let mut out = String::from("m,set,exact,estimate,stderr,agree\n");
    for (k, &m) in ms.iter().enumerate() {
        for (i, s) in sets.iter().enumerate() {
            let exact = sys.correlation(s, s, m);
            let task = (k * sets.len() + i) as u64;
            let (est, se) = mc_correlation(sys, s, s, m, config, task)?;
            let _ = writeln!(
                out,
                "{m},{},{},{},{},{}",
                i + 1,
                fmt_sig12(exact),
                fmt_sig12(est),
                fmt_sig12(se),
                agreement_test(exact, est, se, 3.0)
            );
        }
    }
    Ok(out)
}

fn run_oracle(config: &ExperimentConfig) -> Result<RunOutput, Failure> {
    let mut checks = Checks::default();
    let system = system(&mut checks, &config.system);
    let partition = partition(&mut checks, &config.partition);
    let schedule = schedule(&mut checks, &config.schedule);
    let js = positive_indices(&mut checks, "j", &config.j, None);
    if let (Some(s), Some(js)) = (&schedule, &js) {
        checks.take("schedule", entropy::validate_indices(js, s));
    }
    let ms = config.m.clone().unwrap_or(IndexSet::Range { from: 1, to: 3, step: 1 });
    let ms = checks.take("m", ms.values());
    let family = sets(&mut checks, &system, &config.sets);
    let sample = SampleConfig { samples: config.samples.unwrap_or(100_000), seed: config.seed.unwrap_or(0) };
    checks.take("samples", sample.validate());
    checks.finish()?;
    let (system, partition, schedule, js, ms, family) =
        (system.unwrap(), partition.unwrap(), schedule.unwrap(), js.unwrap(), ms.unwrap(), family.unwrap());
    let cap = config.cap.unwrap_or(DEFAULT_ELEMENTARY_CAP);

    let mut ent = String::from("j,L,exact,estimate,stderr,agree\n");
    let mut row_errors = Vec::new();
    for &j in &js {
        let length = schedule.length(j).expect("validated");
        let exact = entropy::h_j(&system, &partition, j, length, cap);
        let est = mc_h_j(&system, &partition, j, length, &sample, j);
        match (exact, est) {
            (Ok(e), Ok(s)) => {
                let se = s.stderr.unwrap_or(0.0);
                let _ = writeln!(
                    ent,
                    "{j},{length},{},{},{},{}",
                    fmt_sig12(e.h_j),
                    fmt_sig12(s.h_j),
                    fmt_sig12(se),
                    agreement_test(e.h_j, s.h_j, se, 3.0)
                );
            }
            (Err(e), _) | (_, Err(e)) => {
                let _ = writeln!(ent, "{j},{length},,,,error:{}", e.code());
                row_errors.push(Failure::from(e));
            }
        }
    }
    let corr = with_sets!(&system, &family, |sys, sets| oracle_with(sys, sets, &ms, &sample))?;
    Ok(RunOutput {
        files: vec![("oracle_entropy.csv".into(), ent), ("oracle_correlation.csv".into(), corr)],
        failure: worst(row_errors.into_iter()),
    })
}
