use crate::diagnostics::Counters;
use crate::error::{Error, Result};
use crate::linalg::{require_unitary, ComplexMatrix, C64};
use crate::observables::{CharSampler, ProductObservable};
use crate::rng::SampleRng;
use crate::states::{state_char_fn, ProductState};

use super::{run_source, EstimateResult, EstimatorConfig, SampleSource, Target, UNITARY_TOL};

/// Per-sample variable for `<psi| U^dag O U |psi>`.
///
/// Draws `alpha_i ~ |chi_{O_i}|^2` on the support, sets `beta = U^dag alpha'`
/// with `alpha'` zero off the support, and returns
/// `prod_i ||O_i||^2 / chi_{O_i}(alpha_i)^* * prod_j chi_{psi_j}(beta_j)^*`.
#[derive(Clone, Debug)]
pub struct ExpectationSampler {
    samplers: Vec<CharSampler>,
    /// Row `i` of `U^dag` restricted to the support, stored per supported mode:
    /// `cols[a][j] = conj(U[support[a]][j])`.
    cols: Vec<Vec<C64>>,
    input: ProductState,
    norm: f64,
    hermitian: bool,
}

impl ExpectationSampler {
    pub fn new(circuit: &ComplexMatrix, input: &ProductState, observable: &ProductObservable) -> Result<Self> {
        let m = circuit.require_square("circuit")?;
        if input.len() != m {
            return Err(Error::Dimension(format!("input has {} modes, circuit has {m}", input.len())));
        }
        if observable.modes() != m {
            return Err(Error::Dimension(format!("observable has {} modes, circuit has {m}", observable.modes())));
        }
        let mut samplers = Vec::new();
        let mut cols = Vec::new();
        for (&mode, op) in observable.support() {
            samplers.push(CharSampler::new(op)?);
            cols.push(circuit.row(mode).iter().map(|z| z.conj()).collect());
        }
        let norm = samplers.iter().map(CharSampler::norm_sq).product();
        Ok(Self { samplers, cols, input: input.clone(), norm, hermitian: observable.is_hermitian(1e-12) })
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }
}

impl SampleSource for ExpectationSampler {
    fn draw(&self, rng: &mut SampleRng, counters: &mut Counters) -> Result<C64> {
        let m = self.input.len();
        let mut beta = vec![C64::new(0.0, 0.0); m];
        let mut x = C64::new(self.norm, 0.0);
        for (sampler, col) in self.samplers.iter().zip(&self.cols) {
            let (alpha, chi) = sampler.sample(rng, counters)?;
            x /= chi.conj();
            for (b, u) in beta.iter_mut().zip(col) {
                *b += u * alpha;
            }
        }
        for (s, b) in self.input.modes().iter().zip(&beta) {
            x *= state_char_fn(s, *b).conj();
        }
        Ok(x)
    }

    fn variance_bound(&self) -> f64 {
        self.norm
    }
}

/// Estimates `<psi| U^dag O_k U |psi>` for every observable, jointly within
/// `epsilon` with probability at least `1 - delta`.
///
/// Hermitian observables are estimated as real numbers.
pub fn estimate_expectation(
    circuit: &ComplexMatrix,
    input: &ProductState,
    observables: &[ProductObservable],
    cfg: &EstimatorConfig,
) -> Result<Vec<EstimateResult>> {
    cfg.validate()?;
    require_unitary(circuit, UNITARY_TOL, "circuit")?;
    if observables.is_empty() {
        return Err(Error::InvalidOperator("no observables given".into()));
    }
    let k = cfg.k_observables.max(observables.len());
    let samplers = observables
        .iter()
        .map(|o| ExpectationSampler::new(circuit, input, o))
        .collect::<Result<Vec<_>>>()?;
    samplers
        .iter()
        .enumerate()
        .map(|(idx, s)| {
            let target = if s.is_hermitian() { Target::Real } else { Target::Complex };
            run_source(s, cfg, cfg.epsilon, cfg.delta, k, idx as u64, target)
        })
        .collect()
}
