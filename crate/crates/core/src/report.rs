//! Deterministic text output: numbers with 12 significant digits, CSV
//! tables and small JSON reports.

use std::fmt::Write;

use serde_json::{json, Value};

use crate::entropy::{EntropyProfile, ProgressionSchedule};
use crate::limits::{KappaRow, RigidityReport};

/// `printf("%.12g")` with a `.` decimal separator.
pub fn fmt_sig12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (11 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A JSON number carrying the same value as its 12-digit text.
pub fn json_number(x: f64) -> Value {
    let rounded: f64 = fmt_sig12(x).parse().unwrap_or(x);
    serde_json::Number::from_f64(rounded).map(Value::Number).unwrap_or(Value::Null)
}

pub const PROFILE_HEADER: &str = "j,L,H_join,h_j,method,stderr";

/// Profile CSV. Failed rows keep their `j` and `L` and report
/// `error:<code>` in the method column.
pub fn profile_csv(profile: &EntropyProfile) -> String {
    let mut out = String::from(PROFILE_HEADER);
    out.push('\n');
    for row in &profile.rows {
        match &row.outcome {
            Ok(e) => {
                let stderr = e.stderr.map(fmt_sig12).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    row.j,
                    row.length,
                    fmt_sig12(e.h_join),
                    fmt_sig12(e.h_j),
                    e.method.as_str(),
                    stderr
                );
            }
            Err(err) => {
                let _ = writeln!(out, "{},{},,,error:{},", row.j, row.length, err.code());
            }
        }
    }
    out
}

pub fn kappa_csv(rows: &[KappaRow]) -> String {
    let mut out = String::from("m,kappa,residual\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.m, fmt_sig12(r.kappa), fmt_sig12(r.residual));
    }
    out
}

pub fn theta_csv(rows: &[(i64, f64)]) -> String {
    let mut out = String::from("m,theta_distance\n");
    for (m, d) in rows {
        let _ = writeln!(out, "{m},{}", fmt_sig12(*d));
    }
    out
}

/// `{"j": [...], "L": [...]}` for a tabulated schedule, or the rule itself.
pub fn schedule_json(schedule: &ProgressionSchedule) -> Value {
    match schedule {
        ProgressionSchedule::Table { j, lengths } => json!({ "j": j, "L": lengths }),
        other => serde_json::to_value(other).expect("schedules serialize"),
    }
}

pub fn rigidity_json(report: &RigidityReport) -> Value {
    json!({
        "j": report.j,
        "N": report.n,
        "witness_m": report.witness_m,
        "c": json_number(report.c),
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s
}
