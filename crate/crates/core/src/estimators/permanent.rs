use rand::Rng;

use crate::diagnostics::Counters;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::rng::SampleRng;

use super::{run_source, EstimateResult, EstimatorConfig, SampleSource, Target};

/// Largest matrix accepted by [`gurvits_permanent`].
pub const MAX_GURVITS: usize = 64;

/// Glynn-form variable `prod_j x_j prod_i (B x)_i` with `x` uniform in
/// `{-1, 1}^n` and `B = A / ||A||`, so that `|X| <= 1`.
#[derive(Clone, Debug)]
pub struct GurvitsSampler {
    normalized: ComplexMatrix,
    norm: f64,
}

impl GurvitsSampler {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        let n = a.require_square("permanent input")?;
        if n > MAX_GURVITS {
            return Err(Error::Size { what: "Gurvits permanent", size: n, max: MAX_GURVITS });
        }
        let norm = a.spectral_norm();
        let normalized = if norm > 0.0 { a.scale(C64::new(1.0 / norm, 0.0)) } else { a.clone() };
        Ok(Self { normalized, norm })
    }

    /// Operator norm of the input; the estimate carries error `eps * norm^n`.
    pub fn norm(&self) -> f64 {
        self.norm
    }
}

impl SampleSource for GurvitsSampler {
    fn draw(&self, rng: &mut SampleRng, _counters: &mut Counters) -> Result<C64> {
        let n = self.normalized.rows();
        let x: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let mut prod = C64::new(x.iter().product(), 0.0);
        for i in 0..n {
            let row: C64 = self.normalized.row(i).iter().zip(&x).map(|(a, s)| a * s).sum();
            prod *= row;
        }
        Ok(prod)
    }

    fn variance_bound(&self) -> f64 {
        1.0
    }
}

/// Estimates `per(A)` within `epsilon * ||A||^n` with probability `1 - delta`,
/// where `||A||` is the operator norm.
pub fn gurvits_permanent(a: &ComplexMatrix, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    cfg.validate()?;
    let sampler = GurvitsSampler::new(a)?;
    let n = a.rows();
    if n == 0 {
        return Ok(EstimateResult::exact(C64::new(1.0, 0.0), cfg));
    }
    if sampler.norm == 0.0 {
        return Ok(EstimateResult::exact(C64::new(0.0, 0.0), cfg));
    }
    let mut r = run_source(&sampler, cfg, cfg.epsilon, cfg.delta, cfg.k_observables, 0, Target::Complex)?;
    let scale = sampler.norm.powi(n as i32);
    r.estimate *= scale;
    r.empirical_variance *= scale * scale;
    r.variance_bound *= scale * scale;
    r.epsilon = cfg.epsilon * scale;
    r.extra.insert("operator_norm".into(), sampler.norm);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::draw_samples;
    use crate::linalg::{haar_random_unitary, permanent_exact};

    #[test]
    fn identity_and_all_ones() {
        let cfg = EstimatorConfig::new(0.05, 0.05, 1);
        let r = gurvits_permanent(&ComplexMatrix::identity(3), &cfg).unwrap();
        assert!((r.estimate - 1.0).norm() < 0.05);
        let ones = ComplexMatrix::from_real_rows(&[vec![1.0; 3], vec![1.0; 3], vec![1.0; 3]]).unwrap();
        let r = gurvits_permanent(&ones, &cfg).unwrap();
        assert!((r.estimate - 6.0).norm() < 0.05 * 27.0);
        assert!((r.epsilon - 0.05 * 27.0).abs() < 1e-9);
    }

    #[test]
    fn normalized_samples_are_bounded_and_unbiased() {
        let u = haar_random_unitary(4, 2).unwrap();
        let s = GurvitsSampler::new(&u).unwrap();
        let xs = draw_samples(&s, 1, 0, 50_000).unwrap();
        assert!(xs.iter().all(|x| x.norm() <= 1.0 + 1e-12));
        let n = xs.len() as f64;
        let mean: C64 = xs.iter().sum::<C64>() / n;
        let var = xs.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        let want = permanent_exact(&u).unwrap() / s.norm().powi(4);
        assert!((mean - want).norm() < 5.0 * (var / n).sqrt());
    }

    #[test]
    fn size_cap() {
        let big = ComplexMatrix::identity(MAX_GURVITS + 1);
        assert!(matches!(gurvits_permanent(&big, &EstimatorConfig::new(0.1, 0.1, 0)), Err(Error::Size { .. })));
    }
}
