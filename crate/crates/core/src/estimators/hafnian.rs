use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{require_unitary, takagi, ComplexMatrix, C64};
use crate::states::{ModeState, ProductState, R_MAX};

use super::{amplitude::AmplitudeSampler, run_source, EstimateResult, EstimatorConfig, Target, UNITARY_TOL};

const TAKAGI_TOL: f64 = 1e-10;

/// Squeezed-vacuum encoding of a symmetric matrix `R = U D U^T`.
///
/// With `tanh r_i = lambda_i / c` and inputs `S(r_i e^{i pi})|0>` the
/// amplitude onto `|1...1>` satisfies
/// `haf(R) = c^{M/2} Z^{1/2} <1...1| U |r>`, `Z = prod_i cosh r_i`.
#[derive(Clone, Debug)]
pub struct HafnianEncoding {
    pub circuit: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub squeezing: Vec<f64>,
    pub scale: f64,
}

impl HafnianEncoding {
    /// Encodes `r` with the scale that minimizes the amplitude budget.
    pub fn new(r: &ComplexMatrix) -> Result<Self> {
        let t = takagi(r, TAKAGI_TOL)?;
        let scale = optimal_scale(&t.singular_values);
        Self::with_scale(t.unitary, t.singular_values, scale)
    }

    /// Encoding with an explicit scale `c`; requires `lambda_i / c < tanh r_max`.
    pub fn with_scale(circuit: ComplexMatrix, singular_values: Vec<f64>, scale: f64) -> Result<Self> {
        require_unitary(&circuit, UNITARY_TOL, "Takagi unitary")?;
        if singular_values.len() != circuit.rows() {
            return Err(Error::Dimension("one singular value per mode expected".into()));
        }
        let mut squeezing = Vec::with_capacity(singular_values.len());
        for &l in &singular_values {
            let x = l / scale;
            if !(0.0..1.0).contains(&x) || x.atanh() >= R_MAX {
                return Err(Error::Encoding(format!("singular value {l} at scale {scale} needs r >= {R_MAX}")));
            }
            squeezing.push(x.atanh());
        }
        Ok(Self { circuit, singular_values, squeezing, scale })
    }

    /// Encoding from a circuit and squeezing parameters, at scale 1.
    pub fn from_squeezing(circuit: ComplexMatrix, squeezing: &[f64]) -> Result<Self> {
        Self::with_scale(circuit, squeezing.iter().map(|r| r.tanh()).collect(), 1.0)
    }

    pub fn modes(&self) -> usize {
        self.circuit.rows()
    }

    /// `prod_i cosh r_i`.
    pub fn z(&self) -> f64 {
        self.squeezing.iter().map(|r| r.cosh()).product()
    }

    /// `U diag(lambda) U^T`.
    pub fn matrix(&self) -> ComplexMatrix {
        let m = self.modes();
        ComplexMatrix::from_fn(m, m, |i, j| {
            (0..m).map(|k| self.circuit[(i, k)] * self.singular_values[k] * self.circuit[(j, k)]).sum()
        })
    }

    pub fn input_state(&self) -> Result<ProductState> {
        ProductState::new(self.squeezing.iter().map(|&r| ModeState::SqueezedVacuum { r, phi: PI }).collect())
    }

    pub fn output_state(&self) -> Result<ProductState> {
        ProductState::fock(&vec![1; self.modes()])
    }

    /// `c^{M/2} Z^{1/2}`, mapping the amplitude to the hafnian.
    pub fn prefactor(&self) -> f64 {
        self.scale.powf(self.modes() as f64 / 2.0) * self.z().sqrt()
    }
}

/// Scale `c > lambda_max` minimizing `c^M prod_i (1 - lambda_i^2/c^2)^{-1/2}`,
/// the squared error amplification. The stationarity condition is
/// `sum_i x_i / (1 - x_i) = M` with `x_i = lambda_i^2 / c^2`.
fn optimal_scale(lambda: &[f64]) -> f64 {
    let m = lambda.len() as f64;
    let lmax = lambda.iter().cloned().fold(0.0, f64::max);
    let f = |c: f64| lambda.iter().map(|l| (l * l) / (c * c - l * l)).sum::<f64>() - m;
    let floor = lmax / (R_MAX - 1e-6).tanh();
    let mut lo = lmax;
    let mut hi = 2.0 * lmax;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.max(floor)
}

/// Estimates `haf(R)` within `epsilon * ||R||^{M/2}` with probability `1 - delta`.
pub fn estimate_hafnian(r: &ComplexMatrix, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    cfg.validate()?;
    let m = r.require_square("hafnian input")?;
    let dev = r.symmetry_deviation();
    if dev > TAKAGI_TOL {
        return Err(Error::NotSymmetric { deviation: dev });
    }
    if m == 0 {
        return Ok(EstimateResult::exact(C64::new(1.0, 0.0), cfg));
    }
    if m % 2 == 1 || r.max_abs() == 0.0 {
        return Ok(EstimateResult::exact(C64::new(0.0, 0.0), cfg));
    }
    let enc = HafnianEncoding::new(r)?;
    let lmax = enc.singular_values.iter().cloned().fold(0.0, f64::max);
    let half = m as f64 / 2.0;
    let prefactor = enc.prefactor();
    // Amplitude error eps_amp becomes prefactor * eps_amp = eps * lmax^{M/2}.
    let amp_eps = cfg.epsilon * lmax.powf(half) / prefactor;
    let sampler = AmplitudeSampler::new(&enc.circuit, &enc.input_state()?, &enc.output_state()?)?;
    let mut res = run_source(&sampler, cfg, amp_eps, cfg.delta, cfg.k_observables, 0, Target::Complex)?;
    res.estimate *= prefactor;
    res.empirical_variance *= prefactor * prefactor;
    res.variance_bound *= prefactor * prefactor;
    res.epsilon = cfg.epsilon * lmax.powf(half);
    res.extra.insert("scale".into(), enc.scale);
    res.extra.insert("z".into(), enc.z());
    res.extra.insert("lambda_max".into(), lmax);
    res.extra.insert("amplitude_epsilon".into(), amp_eps);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_random_unitary, hafnian_exact};
    use crate::oracle::exact_amplitude;

    #[test]
    fn trivial_cases() {
        let cfg = EstimatorConfig::new(0.05, 0.05, 0);
        assert_eq!(estimate_hafnian(&ComplexMatrix::zeros(4, 4), &cfg).unwrap().estimate, C64::new(0.0, 0.0));
        assert_eq!(estimate_hafnian(&ComplexMatrix::identity(3), &cfg).unwrap().estimate, C64::new(0.0, 0.0));
        let bad = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(estimate_hafnian(&bad, &cfg), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn two_by_two() {
        let r = ComplexMatrix::from_real_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let cfg = EstimatorConfig::new(0.05, 0.05, 8);
        let est = estimate_hafnian(&r, &cfg).unwrap();
        assert!((est.estimate - 0.5).norm() < 0.05 * 0.5, "{}", est.estimate);
    }

    #[test]
    fn optimal_scale_equal_values() {
        let c = optimal_scale(&[0.3; 4]);
        assert!((c - 0.3 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn encoding_identity_with_exact_amplitude() {
        for seed in 0..3 {
            let u = haar_random_unitary(4, 100 + seed).unwrap();
            let enc = HafnianEncoding::from_squeezing(u, &[0.3, 0.2, 0.5, 0.1]).unwrap();
            let amp = exact_amplitude(&enc.circuit, &enc.input_state().unwrap(), &enc.output_state().unwrap(), 40)
                .unwrap()
                .value;
            let haf = hafnian_exact(&enc.matrix()).unwrap();
            assert!((amp * enc.z().sqrt() - haf).norm() < 1e-8, "seed {seed}");
        }
    }
}
