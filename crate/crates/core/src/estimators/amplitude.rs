use std::f64::consts::PI;

use crate::diagnostics::Counters;
use crate::error::{Error, Result};
use crate::linalg::{inverse_dft, require_unitary, ComplexMatrix, C64};
use crate::observables::REJECTION_CAP;
use crate::rng::SampleRng;
use crate::states::{HusimiSampler, OverlapKernel, ProductState};

use super::{run_source, EstimateResult, EstimatorConfig, SampleSource, Target, UNITARY_TOL};

/// Per-sample variable for `<phi| U |psi>`.
///
/// Draws `alpha ~ Q_psi` mode-wise, sets `gamma = U alpha` and returns
/// `prod_i <phi_i|gamma_i> / <alpha_i|psi_i>^*`. The Gaussian factors
/// `e^{-|.|^2/2}` cancel because `|gamma| = |alpha|`, so only reduced
/// overlaps are evaluated.
#[derive(Clone, Debug)]
pub struct AmplitudeSampler {
    circuit: ComplexMatrix,
    input: Vec<HusimiSampler>,
    output: Vec<OverlapKernel>,
}

impl AmplitudeSampler {
    pub fn new(circuit: &ComplexMatrix, input: &ProductState, output: &ProductState) -> Result<Self> {
        let m = circuit.require_square("circuit")?;
        if input.len() != m || output.len() != m {
            return Err(Error::Dimension(format!(
                "circuit has {m} modes, input {} and output {}",
                input.len(),
                output.len()
            )));
        }
        let input = input.modes().iter().map(HusimiSampler::new).collect::<Result<Vec<_>>>()?;
        Ok(Self { circuit: circuit.clone(), input, output: output.modes().iter().map(OverlapKernel::new).collect() })
    }
}

/// Complex product kept as mantissa times `2^exp` so long products neither
/// overflow nor underflow.
struct ScaledProduct {
    value: C64,
    exp: i32,
}

impl ScaledProduct {
    fn new() -> Self {
        Self { value: C64::new(1.0, 0.0), exp: 0 }
    }

    fn renormalize(&mut self) {
        let n = self.value.norm_sqr();
        if n > 0.0 && n.is_finite() {
            let e = (n.log2() * 0.5).round() as i32;
            self.value *= 2f64.powi(-e);
            self.exp += e;
        }
    }

    #[inline]
    fn mul(&mut self, z: C64) {
        self.value *= z;
        let n = self.value.norm_sqr();
        if !(1e-100..=1e100).contains(&n) {
            self.renormalize();
        }
    }

    fn ratio(mut self, mut den: ScaledProduct) -> C64 {
        self.renormalize();
        den.renormalize();
        self.value / den.value * 2f64.powi(self.exp - den.exp)
    }
}

impl SampleSource for AmplitudeSampler {
    fn draw(&self, rng: &mut SampleRng, counters: &mut Counters) -> Result<C64> {
        let m = self.input.len();
        let mut alpha = vec![C64::new(0.0, 0.0); m];
        let mut gamma = vec![C64::new(0.0, 0.0); m];
        for _ in 0..REJECTION_CAP {
            let mut den = ScaledProduct::new();
            for (a, s) in alpha.iter_mut().zip(&self.input) {
                *a = s.sample(rng, counters)?;
                den.mul(s.kernel().eval(*a).conj());
            }
            if den.value.norm_sqr() == 0.0 {
                counters.zero_guard += 1;
                continue;
            }
            self.circuit.mul_vec_into(&alpha, &mut gamma);
            let mut num = ScaledProduct::new();
            for (g, k) in gamma.iter().zip(&self.output) {
                num.mul(k.eval(*g).conj());
            }
            return Ok(num.ratio(den));
        }
        Err(Error::Sampling("amplitude sampler kept hitting zero-overlap draws".into()))
    }

    fn variance_bound(&self) -> f64 {
        1.0
    }
}

/// Estimates `<phi| U |psi>` within `epsilon` with probability `1 - delta`.
pub fn estimate_amplitude(
    circuit: &ComplexMatrix,
    input: &ProductState,
    output: &ProductState,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult> {
    amplitude_on_stream(circuit, input, output, cfg, cfg.epsilon, cfg.delta, 0)
}

fn amplitude_on_stream(
    circuit: &ComplexMatrix,
    input: &ProductState,
    output: &ProductState,
    cfg: &EstimatorConfig,
    epsilon: f64,
    delta: f64,
    stream: u64,
) -> Result<EstimateResult> {
    cfg.validate()?;
    require_unitary(circuit, UNITARY_TOL, "circuit")?;
    let sampler = AmplitudeSampler::new(circuit, input, output)?;
    run_source(&sampler, cfg, epsilon, delta, cfg.k_observables, stream, Target::Complex)
}

/// `W = U^dag diag(e^{i theta omega_j}) U`.
pub fn phase_shifter_circuit(circuit: &ComplexMatrix, omega: &[u64], theta: f64) -> Result<ComplexMatrix> {
    let m = circuit.require_square("circuit")?;
    if omega.len() != m {
        return Err(Error::Dimension(format!("omega has {} entries, circuit has {m} modes", omega.len())));
    }
    let phases: Vec<C64> = omega.iter().map(|&w| C64::from_polar(1.0, theta * w as f64)).collect();
    let scaled = ComplexMatrix::from_fn(m, m, |i, j| phases[i] * circuit[(i, j)]);
    let w = circuit.adjoint().matmul(&scaled)?;
    require_unitary(&w, UNITARY_TOL, "phase-shifter circuit")?;
    Ok(w)
}

/// Estimates `<psi| U^dag e^{i theta omega.n} U |psi>`.
pub fn estimate_phase_shifter(
    circuit: &ComplexMatrix,
    input: &ProductState,
    omega: &[u64],
    theta: f64,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult> {
    require_unitary(circuit, UNITARY_TOL, "circuit")?;
    let w = phase_shifter_circuit(circuit, omega, theta)?;
    estimate_amplitude(&w, input, input, cfg)
}

/// Grouped output distribution from its Fourier components
/// `G~(k) = sum_Omega G(Omega) e^{2 pi i k Omega / L}`.
///
/// Imaginary residues are dropped and bins are clamped to `[0, 1]`.
pub fn spectrum_from_fourier(fourier: &[C64]) -> Result<Vec<f64>> {
    Ok(inverse_dft(fourier)?.into_iter().map(|z| z.re.clamp(0.0, 1.0)).collect())
}

#[derive(Clone, Debug)]
pub struct VibronicSpectrum {
    /// `G(Omega)` for `Omega = 0..=omega_max`.
    pub spectrum: Vec<f64>,
    pub fourier: Vec<C64>,
    /// Estimates of `G~(k)` for `k = 1..=L/2`.
    pub components: Vec<EstimateResult>,
}

impl VibronicSpectrum {
    pub fn samples_used(&self) -> u64 {
        self.components.iter().map(|c| c.samples_used).sum()
    }
}

/// Grouped probabilities `G(Omega) = sum_{m : omega.m = Omega} p(m)`.
///
/// `G~(0) = 1` exactly. Components `k <= L/2` are estimated with a union
/// budget; the rest follow from `G~(L-k) = G~(k)^*`, which holds because
/// `G` is real.
pub fn vibronic_spectrum(
    circuit: &ComplexMatrix,
    input: &ProductState,
    omega: &[u64],
    omega_max: usize,
    cfg: &EstimatorConfig,
) -> Result<VibronicSpectrum> {
    cfg.validate()?;
    require_unitary(circuit, UNITARY_TOL, "circuit")?;
    let l = omega_max + 1;
    let theta = 2.0 * PI / l as f64;
    let half = l / 2;
    let delta = cfg.delta / half.max(1) as f64;

    let mut fourier = vec![C64::new(0.0, 0.0); l];
    fourier[0] = C64::new(1.0, 0.0);
    let mut components = Vec::with_capacity(half);
    for k in 1..=half {
        let w = phase_shifter_circuit(circuit, omega, theta * k as f64)?;
        let r = amplitude_on_stream(&w, input, input, cfg, cfg.epsilon, delta, k as u64)?;
        fourier[k] = r.estimate;
        fourier[l - k] = r.estimate.conj();
        components.push(r);
    }
    let spectrum = spectrum_from_fourier(&fourier)?;
    Ok(VibronicSpectrum { spectrum, fourier, components })
}
