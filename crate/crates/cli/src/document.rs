//! Result documents written by every subcommand.

use std::collections::BTreeMap;

use bosonic_core::estimators::EstimateResult;
use bosonic_core::C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub estimate: [f64; 2],
    pub epsilon: f64,
    pub delta: f64,
    pub samples_used: u64,
    pub groups: u64,
    pub per_group: u64,
    pub empirical_variance: f64,
    pub variance_bound: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

impl Entry {
    pub fn from_result(r: &EstimateResult, label: Option<String>) -> Self {
        let mut diagnostics = r.extra.clone();
        let c = r.counters;
        diagnostics.insert("proposals".into(), c.proposals as f64);
        diagnostics.insert("accepted".into(), c.accepted as f64);
        diagnostics.insert("inner_rejections".into(), c.inner_rejections as f64);
        diagnostics.insert("zero_guard".into(), c.zero_guard as f64);
        diagnostics.insert("acceptance_rate".into(), c.acceptance_rate());
        Self {
            label,
            estimate: [r.estimate.re, r.estimate.im],
            epsilon: r.epsilon,
            delta: r.delta,
            samples_used: r.samples_used,
            groups: r.groups,
            per_group: r.per_group,
            empirical_variance: r.empirical_variance,
            variance_bound: r.variance_bound,
            diagnostics,
        }
    }

    /// An exact oracle value: zero error, no samples.
    pub fn exact(value: C64, tail: f64, label: Option<String>) -> Self {
        Self {
            label,
            estimate: [value.re, value.im],
            epsilon: 0.0,
            delta: 0.0,
            samples_used: 0,
            groups: 0,
            per_group: 0,
            empirical_variance: 0.0,
            variance_bound: 0.0,
            diagnostics: BTreeMap::from([("tail".to_string(), tail)]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternProbability {
    pub pattern: Vec<usize>,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub command: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_s: f64,
    pub results: Vec<Entry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Vec<PatternProbability>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leakage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<f64>,
}

impl Document {
    pub fn new(command: impl Into<String>, seed: u64, workers: usize) -> Self {
        Self {
            command: command.into(),
            seed,
            workers,
            wall_time_s: 0.0,
            results: Vec::new(),
            spectrum: None,
            fourier: None,
            distribution: None,
            samples: None,
            normalization: None,
            leakage: None,
            tv_bound: None,
            tail: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result documents are always serializable")
    }

    /// `Omega,G` rows for the spectrum, if any.
    pub fn spectrum_csv(&self) -> Option<String> {
        let spectrum = self.spectrum.as_ref()?;
        let mut s = String::from("omega,g\n");
        for (k, g) in spectrum.iter().enumerate() {
            s.push_str(&format!("{k},{g}\n"));
        }
        Some(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut d = Document::new("oracle hafnian", 7, 1);
        d.results.push(Entry::exact(C64::new(0.12, 0.0), 0.0, None));
        d.spectrum = Some(vec![0.5, 0.5]);
        let back: Document = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(back, d);
        assert_eq!(d.spectrum_csv().unwrap(), "omega,g\n0,0.5\n1,0.5\n");
    }
}
