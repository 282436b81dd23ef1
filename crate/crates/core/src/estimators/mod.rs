//! Randomized estimators with median-of-means aggregation.
//!
//! Every estimator reduces to a [`SampleSource`]: an unbiased complex random
//! variable drawn from a per-sample random stream. [`run_source`] plans the
//! sample count, draws groups (in parallel when enabled) and aggregates.

use std::collections::BTreeMap;

use crate::diagnostics::Counters;
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::rng::{SampleRng, StreamKey};

mod amplitude;
mod expectation;
mod hafnian;
mod permanent;

pub use amplitude::{
    estimate_amplitude, estimate_phase_shifter, phase_shifter_circuit, spectrum_from_fourier, vibronic_spectrum,
    AmplitudeSampler, VibronicSpectrum,
};
pub use expectation::{estimate_expectation, ExpectationSampler};
pub use hafnian::{estimate_hafnian, HafnianEncoding};
pub use permanent::{gurvits_permanent, GurvitsSampler};

/// Tolerance used when checking that a circuit matrix is unitary.
pub const UNITARY_TOL: f64 = 1e-9;

/// Samples drawn by the pilot phase of [`VarianceMode::Pilot`].
pub const DEFAULT_PILOT_SAMPLES: usize = 1000;

const PILOT_STREAM_BIT: u64 = 1 << 63;

/// Largest sample count a single estimate may plan.
pub const MAX_SAMPLES: u64 = 1 << 40;

/// How the per-sample variance entering the sample plan is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VarianceMode {
    /// The estimator's rigorous bound.
    Bound,
    /// A caller-supplied bound.
    Override(f64),
    /// Estimate the variance from a pilot run of this many samples.
    Pilot(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Union-bound width.
    pub k_observables: usize,
    pub seed: u64,
    pub workers: usize,
    pub variance: VarianceMode,
}

impl EstimatorConfig {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Self {
        Self { epsilon, delta, k_observables: 1, seed, workers: 1, variance: VarianceMode::Bound }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k_observables = k;
        self
    }

    pub fn with_variance(mut self, variance: VarianceMode) -> Self {
        self.variance = variance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.k_observables == 0 {
            return Err(Error::InvalidConfig("k_observables must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        match self.variance {
            VarianceMode::Override(v) if !(v >= 0.0 && v.is_finite()) => {
                Err(Error::InvalidConfig(format!("variance override must be finite and >= 0, got {v}")))
            }
            VarianceMode::Pilot(n) if n < 2 => Err(Error::InvalidConfig("pilot needs at least 2 samples".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    pub estimate: C64,
    pub epsilon: f64,
    pub delta: f64,
    pub samples_used: u64,
    pub groups: u64,
    pub per_group: u64,
    /// Sample variance `E|X - EX|^2` of the per-sample variable.
    pub empirical_variance: f64,
    /// Variance value used to plan the sample count.
    pub variance_bound: f64,
    pub counters: Counters,
    pub seed: u64,
    /// Estimator-specific scalar diagnostics.
    pub extra: BTreeMap<String, f64>,
}

impl EstimateResult {
    /// A deterministic answer that needed no sampling.
    pub fn exact(value: C64, cfg: &EstimatorConfig) -> Self {
        Self {
            estimate: value,
            epsilon: cfg.epsilon,
            delta: cfg.delta,
            samples_used: 0,
            groups: 0,
            per_group: 0,
            empirical_variance: 0.0,
            variance_bound: 0.0,
            counters: Counters::default(),
            seed: cfg.seed,
            extra: BTreeMap::new(),
        }
    }
}

/// Median-of-means sample plan: `groups` is the smallest odd integer at least
/// `8 ln(2K/delta)` and `per_group = ceil(8.5 var / eps^2)`, so that the total
/// is at least `68 ln(2K/delta) var / eps^2`.
pub fn plan_samples(epsilon: f64, delta: f64, k: usize, var_bound: f64) -> (u64, u64) {
    if var_bound <= 0.0 {
        return (1, 1);
    }
    let mut groups = (8.0 * (2.0 * k.max(1) as f64 / delta).ln()).ceil().max(1.0) as u64;
    if groups % 2 == 0 {
        groups += 1;
    }
    let per_group = (8.5 * var_bound / (epsilon * epsilon)).ceil().max(1.0) as u64;
    (groups, per_group)
}

/// Component-wise median of the means of `groups` equal, contiguous groups.
/// An even group count is raised to the next odd number, and any remainder
/// samples are discarded.
pub fn median_of_means(samples: &[C64], groups: usize) -> Result<C64> {
    if samples.is_empty() {
        return Err(Error::Dimension("median of means over no samples".into()));
    }
    if groups == 0 {
        return Err(Error::InvalidConfig("median of means needs at least one group".into()));
    }
    let mut groups = if groups % 2 == 0 { groups + 1 } else { groups };
    groups = groups.min(if samples.len() % 2 == 0 { samples.len() - 1 } else { samples.len() });
    let size = samples.len() / groups;
    let means: Vec<C64> =
        samples.chunks_exact(size).take(groups).map(|g| g.iter().sum::<C64>() / size as f64).collect();
    Ok(componentwise_median(&means))
}

fn componentwise_median(means: &[C64]) -> C64 {
    let mut re: Vec<f64> = means.iter().map(|z| z.re).collect();
    let mut im: Vec<f64> = means.iter().map(|z| z.im).collect();
    re.sort_by(f64::total_cmp);
    im.sort_by(f64::total_cmp);
    C64::new(re[re.len() / 2], im[im.len() / 2])
}

/// An unbiased per-sample random variable.
pub trait SampleSource: Sync {
    fn draw(&self, rng: &mut SampleRng, counters: &mut Counters) -> Result<C64>;

    /// Rigorous bound on `E|X - EX|^2`.
    fn variance_bound(&self) -> f64;
}

/// Which components of the estimate are budgeted and reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Complex,
    /// The target is known to be real; the imaginary part is reported as 0.
    Real,
}

#[derive(Clone, Copy, Debug, Default)]
struct GroupStats {
    sum: C64,
    sum_sq: f64,
    counters: Counters,
}

fn draw_group<S: SampleSource + ?Sized>(src: &S, key: &StreamKey, start: u64, len: u64) -> Result<GroupStats> {
    let mut st = GroupStats::default();
    for i in start..start + len {
        let x = src.draw(&mut key.rng(i), &mut st.counters)?;
        st.sum += x;
        st.sum_sq += x.norm_sqr();
    }
    Ok(st)
}

fn draw_groups<S: SampleSource + ?Sized>(
    src: &S,
    key: &StreamKey,
    groups: u64,
    per_group: u64,
    workers: usize,
) -> Result<Vec<GroupStats>> {
    #[cfg(feature = "parallel")]
    if workers > 1 && groups > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
        return pool.install(|| {
            (0..groups).into_par_iter().map(|g| draw_group(src, key, g * per_group, per_group)).collect()
        });
    }
    let _ = workers;
    (0..groups).map(|g| draw_group(src, key, g * per_group, per_group)).collect()
}

/// Plain draws `0..n` of `stream`, for diagnostics and statistical tests.
pub fn draw_samples<S: SampleSource + ?Sized>(src: &S, seed: u64, stream: u64, n: usize) -> Result<Vec<C64>> {
    let key = StreamKey::new(seed, stream);
    let mut counters = Counters::default();
    (0..n as u64).map(|i| src.draw(&mut key.rng(i), &mut counters)).collect()
}

/// Plans, draws and aggregates one estimate on random stream `stream`.
///
/// `epsilon` and `delta` are the budget for this single estimate; `k` widens
/// the union bound.
pub fn run_source<S: SampleSource + ?Sized>(
    src: &S,
    cfg: &EstimatorConfig,
    epsilon: f64,
    delta: f64,
    k: usize,
    stream: u64,
    target: Target,
) -> Result<EstimateResult> {
    let mut pilot_counters = Counters::default();
    let variance = match cfg.variance {
        VarianceMode::Bound => src.variance_bound(),
        VarianceMode::Override(v) => v,
        VarianceMode::Pilot(n) => {
            let key = StreamKey::new(cfg.seed, stream | PILOT_STREAM_BIT);
            let st = draw_groups(src, &key, 1, n as u64, 1)?.remove(0);
            pilot_counters = st.counters;
            sample_variance(st.sum, st.sum_sq, n as u64)
        }
    };
    let (groups, per_group) = match target {
        Target::Complex => plan_samples(epsilon / std::f64::consts::SQRT_2, delta, 2 * k, variance),
        Target::Real => plan_samples(epsilon, delta, k, variance),
    };
    if groups.saturating_mul(per_group) > MAX_SAMPLES {
        return Err(Error::Budget(format!(
            "plan needs {groups} x {per_group} samples, above the limit of {MAX_SAMPLES}"
        )));
    }
    let key = StreamKey::new(cfg.seed, stream);
    let stats = draw_groups(src, &key, groups, per_group, cfg.workers)?;

    let means: Vec<C64> = stats.iter().map(|s| s.sum / per_group as f64).collect();
    let mut estimate = componentwise_median(&means);
    if target == Target::Real {
        estimate.im = 0.0;
    }
    let mut counters = pilot_counters;
    let (mut sum, mut sum_sq) = (C64::new(0.0, 0.0), 0.0);
    for s in &stats {
        counters += s.counters;
        sum += s.sum;
        sum_sq += s.sum_sq;
    }
    let n = groups * per_group;
    let mut extra = BTreeMap::new();
    if let VarianceMode::Pilot(p) = cfg.variance {
        extra.insert("pilot_samples".to_string(), p as f64);
    }
    Ok(EstimateResult {
        estimate,
        epsilon,
        delta,
        samples_used: n,
        groups,
        per_group,
        empirical_variance: sample_variance(sum, sum_sq, n),
        variance_bound: variance,
        counters,
        seed: cfg.seed,
        extra,
    })
}

fn sample_variance(sum: C64, sum_sq: f64, n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let n = n as f64;
    ((sum_sq - sum.norm_sqr() / n) / (n - 1.0)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn plan_matches_formulas() {
        let (g, p) = plan_samples(0.1, 0.05, 1, 1.0);
        assert_eq!(g % 2, 1);
        assert!(g as f64 >= (8.0 * 40f64.ln()).ceil());
        assert_eq!(g, 31);
        assert!((g * p) as f64 >= 68.0 * 40f64.ln() / 0.01);
        assert_eq!(plan_samples(0.1, 0.05, 1, 0.0), (1, 1));
        let (g10, _) = plan_samples(0.1, 0.05, 10, 1.0);
        assert!(g10 > g);
        assert!(g10 as f64 - g as f64 <= 8.0 * 10f64.ln() + 2.0);
    }

    #[test]
    fn median_of_means_examples() {
        let v = vec![c(2.5, -1.0); 9];
        assert_eq!(median_of_means(&v, 3).unwrap(), c(2.5, -1.0));
        let v: Vec<C64> = (1..=6).map(|x| c(x as f64, 0.0)).collect();
        assert!((median_of_means(&v, 1).unwrap() - c(3.5, 0.0)).norm() < 1e-15);
        assert!((median_of_means(&v, 3).unwrap() - c(3.5, 0.0)).norm() < 1e-15);
        assert!(median_of_means(&[], 1).is_err());
    }

    #[test]
    fn even_groups_forced_odd() {
        let v: Vec<C64> = (0..12).map(|x| c(x as f64, 0.0)).collect();
        // 2 groups become 3 groups of 4: means 1.5, 5.5, 9.5.
        assert!((median_of_means(&v, 2).unwrap().re - 5.5).abs() < 1e-15);
    }

    struct Constant(C64);
    impl SampleSource for Constant {
        fn draw(&self, _: &mut SampleRng, _: &mut Counters) -> Result<C64> {
            Ok(self.0)
        }
        fn variance_bound(&self) -> f64 {
            0.0
        }
    }

    struct Coin;
    impl SampleSource for Coin {
        fn draw(&self, rng: &mut SampleRng, _: &mut Counters) -> Result<C64> {
            use rand::Rng;
            Ok(c(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0))
        }
        fn variance_bound(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn run_source_constant_and_workers() {
        let cfg = EstimatorConfig::new(0.1, 0.1, 3);
        let r = run_source(&Constant(c(0.25, 1.0)), &cfg, 0.1, 0.1, 1, 0, Target::Complex).unwrap();
        assert_eq!(r.estimate, c(0.25, 1.0));
        assert_eq!(r.samples_used, 1);

        let a = run_source(&Coin, &cfg, 0.1, 0.1, 1, 0, Target::Real).unwrap();
        let b = run_source(&Coin, &cfg.clone().with_workers(3), 0.1, 0.1, 1, 0, Target::Real).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples_used, a.groups * a.per_group);
        assert!(a.estimate.re.abs() < 0.1);
        assert!((a.empirical_variance - 1.0).abs() < 0.05);
    }

    #[test]
    fn pilot_mode_uses_measured_variance() {
        let cfg = EstimatorConfig::new(0.1, 0.1, 3).with_variance(VarianceMode::Pilot(500));
        let r = run_source(&Constant(c(1.0, 0.0)), &cfg, 0.1, 0.1, 1, 0, Target::Complex).unwrap();
        assert_eq!(r.variance_bound, 0.0);
        assert_eq!(r.samples_used, 1);
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::new(0.0, 0.1, 0).validate().is_err());
        assert!(EstimatorConfig::new(0.1, 1.0, 0).validate().is_err());
        assert!(EstimatorConfig::new(0.1, 0.1, 0).with_workers(0).validate().is_err());
        assert!(EstimatorConfig::new(0.1, 0.1, 0).validate().is_ok());
    }
}
