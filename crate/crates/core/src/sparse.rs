//! Boson sampling restricted to a promised sparse support.
//!
//! Support probabilities are estimated as projector expectations, clamped at
//! zero, renormalized over the support and sampled from.

use std::collections::{BTreeMap, HashSet};

use rand::distr::{weighted::WeightedIndex, Distribution};

use crate::error::{Error, Result};
use crate::estimators::{estimate_expectation, EstimateResult, EstimatorConfig};
use crate::linalg::ComplexMatrix;
use crate::observables::ProductObservable;
use crate::oracle::{enumerate_patterns, Pattern};
use crate::rng::substream;
use crate::states::ProductState;

/// Random stream reserved for the final categorical draws.
const CATEGORICAL_STREAM: u64 = u64::MAX - 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSet {
    modes: usize,
    outcomes: Vec<Pattern>,
}

impl SupportSet {
    pub fn new(outcomes: Vec<Pattern>) -> Result<Self> {
        let Some(first) = outcomes.first() else {
            return Err(Error::InvalidConfig("support set is empty".into()));
        };
        let modes = first.len();
        let mut seen = HashSet::new();
        for p in &outcomes {
            if p.len() != modes {
                return Err(Error::Dimension(format!("pattern {p:?} has {} modes, expected {modes}", p.len())));
            }
            if !seen.insert(p) {
                return Err(Error::InvalidConfig(format!("pattern {p:?} listed twice")));
            }
        }
        Ok(Self { modes, outcomes })
    }

    /// Every pattern over `modes` modes with at most `max_photons` photons.
    pub fn enumerate(modes: usize, max_photons: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::Dimension("support over zero modes".into()));
        }
        Self::new(enumerate_patterns(modes, max_photons))
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn outcomes(&self) -> &[Pattern] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct SupportEstimate {
    /// Clamped estimates, in support order.
    pub probabilities: Vec<(Pattern, f64)>,
    pub results: Vec<EstimateResult>,
}

impl SupportEstimate {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().map(|(_, p)| p).sum()
    }

    pub fn samples_used(&self) -> u64 {
        self.results.iter().map(|r| r.samples_used).sum()
    }
}

/// Estimates `p(m)` for every support pattern, jointly within `epsilon`
/// with probability at least `1 - delta`.
pub fn estimate_support_probabilities(
    circuit: &ComplexMatrix,
    input: &ProductState,
    support: &SupportSet,
    cfg: &EstimatorConfig,
) -> Result<SupportEstimate> {
    if support.modes() != input.len() {
        return Err(Error::Dimension(format!(
            "support patterns have {} modes, input has {}",
            support.modes(),
            input.len()
        )));
    }
    let observables = support
        .outcomes()
        .iter()
        .map(|p| ProductObservable::pattern_projector(p))
        .collect::<Result<Vec<_>>>()?;
    let results = estimate_expectation(circuit, input, &observables, cfg)?;
    let probabilities =
        support.outcomes().iter().zip(&results).map(|(p, r)| (p.clone(), r.estimate.re.max(0.0))).collect();
    Ok(SupportEstimate { probabilities, results })
}

#[derive(Clone, Debug)]
pub struct SparseSamples {
    pub samples: Vec<Pattern>,
    pub estimate: SupportEstimate,
    /// Sum of the clamped estimates before renormalization.
    pub normalization: f64,
    /// `1 - normalization`.
    pub leakage: f64,
    /// `|S| epsilon / normalization`; add the true off-support mass for the
    /// full total-variation bound.
    pub tv_bound: f64,
}

impl SparseSamples {
    /// Renormalized distribution the samples were drawn from.
    pub fn distribution(&self) -> BTreeMap<Pattern, f64> {
        self.estimate.probabilities.iter().map(|(p, v)| (p.clone(), v / self.normalization)).collect()
    }
}

/// Draws `n_samples` i.i.d. outcomes from the renormalized support estimate.
pub fn sample_sparse(
    circuit: &ComplexMatrix,
    input: &ProductState,
    support: &SupportSet,
    n_samples: usize,
    cfg: &EstimatorConfig,
) -> Result<SparseSamples> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
    }
    let estimate = estimate_support_probabilities(circuit, input, support, cfg)?;
    let normalization = estimate.total();
    let threshold = support.len() as f64 * cfg.epsilon;
    if normalization < threshold || normalization <= 0.0 {
        return Err(Error::DegenerateSupport { mass: normalization, threshold });
    }
    let weights: Vec<f64> = estimate.probabilities.iter().map(|(_, p)| *p).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Sampling(format!("categorical weights: {e}")))?;
    let mut rng = substream(cfg.seed, CATEGORICAL_STREAM, 0);
    let samples = (0..n_samples).map(|_| support.outcomes()[dist.sample(&mut rng)].clone()).collect();
    Ok(SparseSamples {
        samples,
        estimate,
        normalization,
        leakage: 1.0 - normalization,
        tv_bound: threshold / normalization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs() -> ComplexMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_real_rows(&[vec![h, h], vec![h, -h]]).unwrap()
    }

    #[test]
    fn support_validation() {
        assert!(SupportSet::new(vec![]).is_err());
        assert!(SupportSet::new(vec![vec![1, 0], vec![1, 0]]).is_err());
        assert!(SupportSet::new(vec![vec![1, 0], vec![1]]).is_err());
        assert_eq!(SupportSet::enumerate(2, 2).unwrap().len(), 6);
    }

    #[test]
    fn hom_probabilities() {
        let support = SupportSet::new(vec![vec![2, 0], vec![1, 1], vec![0, 2]]).unwrap();
        let input = ProductState::fock(&[1, 1]).unwrap();
        let est = estimate_support_probabilities(&bs(), &input, &support, &EstimatorConfig::new(0.05, 0.05, 3)).unwrap();
        let want = [0.5, 0.0, 0.5];
        for ((_, p), w) in est.probabilities.iter().zip(want) {
            assert!((p - w).abs() < 0.05);
            assert!(*p >= 0.0);
        }
    }

    #[test]
    fn single_pattern_and_deterministic_circuit() {
        let cfg = EstimatorConfig::new(0.05, 0.05, 4);
        let vac = ProductState::vacuum(3).unwrap();
        let only = SupportSet::new(vec![vec![0, 0, 0]]).unwrap();
        let s = sample_sparse(&ComplexMatrix::identity(3), &vac, &only, 50, &cfg).unwrap();
        assert!(s.samples.iter().all(|p| p == &vec![0, 0, 0]));

        let input = ProductState::fock(&[2, 1]).unwrap();
        let support = SupportSet::new(vec![vec![2, 1], vec![1, 2], vec![3, 0]]).unwrap();
        let s = sample_sparse(&ComplexMatrix::identity(2), &input, &support, 200, &cfg).unwrap();
        // Off-pattern estimates are within epsilon of 0; they may be drawn rarely.
        let hits = s.samples.iter().filter(|p| *p == &vec![2, 1]).count();
        assert!(hits >= 180, "{hits}");
    }

    #[test]
    fn degenerate_support_is_reported() {
        let cfg = EstimatorConfig::new(0.05, 0.05, 4);
        let input = ProductState::fock(&[1, 0]).unwrap();
        let support = SupportSet::new(vec![vec![0, 2], vec![2, 0]]).unwrap();
        let err = sample_sparse(&ComplexMatrix::identity(2), &input, &support, 10, &cfg).unwrap_err();
        assert!(matches!(err, Error::DegenerateSupport { .. }));
    }
}
