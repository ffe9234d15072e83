//! Experiment configuration: a JSON file whose keys are mirrored by flags.

use pentropy_core::descriptor::{SetDescriptor, SystemDescriptor};
use pentropy_core::entropy::ProgressionSchedule;
use pentropy_core::refine::PartitionSpec;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// A list of integers, or an inclusive range `{"from": a, "to": b, "step": s}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IndexSet {
    List(Vec<i64>),
    Range {
        from: i64,
        to: i64,
        #[serde(default = "unit_step")]
        step: i64,
    },
}

fn unit_step() -> i64 {
    1
}

impl IndexSet {
    /// Parses `a:b`, `a:b:step` (inclusive) or a comma list.
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        if text.contains(':') {
            let parts: Vec<&str> = text.split(':').collect();
            let num = |s: &str| s.trim().parse::<i64>().map_err(|e| format!("bad index range {text:?}: {e}"));
            return match parts.as_slice() {
                [a, b] => Ok(IndexSet::Range { from: num(a)?, to: num(b)?, step: 1 }),
                [a, b, s] => Ok(IndexSet::Range { from: num(a)?, to: num(b)?, step: num(s)? }),
                _ => Err(format!("bad index range {text:?}")),
            };
        }
        if text.is_empty() {
            return Ok(IndexSet::List(Vec::new()));
        }
        text.split(',')
            .map(|s| s.trim().parse::<i64>().map_err(|e| format!("bad index list {text:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(IndexSet::List)
    }

    pub fn values(&self) -> Result<Vec<i64>, String> {
        match self {
            IndexSet::List(v) => Ok(v.clone()),
            IndexSet::Range { step, .. } if *step <= 0 => Err("range step must be positive".into()),
            IndexSet::Range { from, to, step } => {
                if to < from {
                    return Ok(Vec::new());
                }
                if (to - from) / step > 10_000_000 {
                    return Err("index range has more than 10^7 entries".into());
                }
                Ok((*from..=*to).step_by(*step as usize).collect())
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Vec<SystemDescriptor>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partitions: Option<Vec<PartitionSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ProgressionSchedule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<IndexSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<IndexSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sets: Option<Vec<SetDescriptor>>,
    /// `"diagonal"` pairs each set with itself, `"all"` takes every ordered pair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<(i64, i64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_cap: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_cap: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// Overlays `file` on `flags`. Keys set in both with different values take
/// the file's value; each such key is returned so the caller can warn.
pub fn merge(flags: &ExperimentConfig, file: &ExperimentConfig) -> (ExperimentConfig, Vec<String>) {
    let as_map = |c: &ExperimentConfig| match serde_json::to_value(c).expect("config serializes") {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    let mut merged = as_map(flags);
    let mut conflicts = Vec::new();
    for (key, value) in as_map(file) {
        if let Some(previous) = merged.get(&key) {
            if *previous != value {
                conflicts.push(key.clone());
            }
        }
        merged.insert(key, value);
    }
    let config = serde_json::from_value(Value::Object(merged)).expect("merged config deserializes");
    (config, conflicts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_sets() {
        assert_eq!(IndexSet::parse("1:4").unwrap().values().unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(IndexSet::parse("2:9:3").unwrap().values().unwrap(), vec![2, 5, 8]);
        assert_eq!(IndexSet::parse("5, 7").unwrap().values().unwrap(), vec![5, 7]);
        assert!(IndexSet::parse("x").is_err());
        let r: IndexSet = serde_json::from_str(r#"{"from":1,"to":3}"#).unwrap();
        assert_eq!(r.values().unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn file_wins_and_conflicts_are_named() {
        let flags = ExperimentConfig { seed: Some(1), c: Some(0.5), ..Default::default() };
        let file = ExperimentConfig { seed: Some(2), samples: Some(10), ..Default::default() };
        let (merged, conflicts) = merge(&flags, &file);
        assert_eq!(merged.seed, Some(2));
        assert_eq!(merged.c, Some(0.5));
        assert_eq!(merged.samples, Some(10));
        assert_eq!(conflicts, vec!["seed".to_string()]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sead": 3}"#).is_err());
    }
}
