//! Browser bindings: Husimi sampling, a two-mode vibronic spectrum and a
//! hafnian estimate. Complex values cross the boundary as interleaved
//! `[re, im, re, im, ...]` arrays.

use bosonic_core::estimators::{estimate_hafnian, vibronic_spectrum as estimate_spectrum, EstimatorConfig};
use bosonic_core::linalg::hafnian_exact;
use bosonic_core::oracle::{exact_output_distribution, grouped_distribution};
use bosonic_core::rng::substream;
use bosonic_core::states::{sample_husimi, ModeState, ProductState};
use bosonic_core::{ComplexMatrix, Error, Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Largest matrix the demo will also solve exactly.
pub const EXACT_HAFNIAN_MAX: usize = 12;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn mode_state(kind: &str, a: f64, b: f64) -> Result<ModeState> {
    let s = match kind {
        "fock" if a >= 0.0 && a.fract() == 0.0 => ModeState::Fock(a as usize),
        "fock" => return Err(Error::InvalidState(format!("Fock number {a} is not a non-negative integer"))),
        "coherent" => ModeState::Coherent(C64::new(a, b)),
        "squeezed" => ModeState::SqueezedVacuum { r: a, phi: b },
        other => return Err(Error::InvalidState(format!("unknown state kind `{other}`"))),
    };
    s.validate()?;
    Ok(s)
}

pub fn husimi_points(kind: &str, a: f64, b: f64, n: usize, seed: u32) -> Result<Vec<f64>> {
    let state = mode_state(kind, a, b)?;
    let mut rng = substream(seed as u64, 0, 0);
    let mut out = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let z = sample_husimi(&state, &mut rng)?;
        out.push(z.re);
        out.push(z.im);
    }
    Ok(out)
}

/// Draws `n` phase-space points from the Husimi distribution of one mode.
/// `kind` is `fock` (`a` = photon number), `coherent` (`a + ib`) or
/// `squeezed` (`r = a`, `phi = b`).
#[wasm_bindgen]
pub fn husimi_samples(kind: &str, a: f64, b: f64, n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    husimi_points(kind, a, b, n, seed).map_err(js)
}

fn beam_splitter(angle: f64) -> ComplexMatrix {
    let (s, c) = angle.sin_cos();
    ComplexMatrix::from_real_rows(&[vec![c, s], vec![s, -c]]).expect("2x2 rows")
}

pub struct SpectrumInstance {
    pub circuit: ComplexMatrix,
    pub input: ProductState,
    pub omega: [u64; 2],
    pub omega_max: usize,
}

impl SpectrumInstance {
    pub fn new(angle: f64, n: [u32; 2], omega: [u32; 2], omega_max: usize) -> Result<Self> {
        Ok(Self {
            circuit: beam_splitter(angle),
            input: ProductState::fock(&[n[0] as usize, n[1] as usize])?,
            omega: omega.map(u64::from),
            omega_max,
        })
    }

    pub fn estimate(&self, epsilon: f64, seed: u32) -> Result<Vec<f64>> {
        let cfg = EstimatorConfig::new(epsilon, 0.05, seed as u64);
        Ok(estimate_spectrum(&self.circuit, &self.input, &self.omega, self.omega_max, &cfg)?.spectrum)
    }

    pub fn exact(&self) -> Result<Vec<f64>> {
        let photons = self.input.modes().iter().map(|s| match s {
            ModeState::Fock(n) => *n,
            _ => 0,
        });
        let dist = exact_output_distribution(&self.circuit, &self.input, photons.sum())?;
        Ok(grouped_distribution(&dist.value, &self.omega, self.omega_max))
    }
}

/// Grouped output probabilities `G(Omega)`, `Omega = 0..=omega_max`, of a
/// beam splitter with mixing angle `angle` fed Fock states `n1, n2`.
/// Returns the estimate followed by the exact spectrum.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn vibronic_spectrum(
    angle: f64,
    n1: u32,
    n2: u32,
    omega1: u32,
    omega2: u32,
    omega_max: usize,
    epsilon: f64,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    let inst = SpectrumInstance::new(angle, [n1, n2], [omega1, omega2], omega_max).map_err(js)?;
    let mut out = inst.estimate(epsilon, seed).map_err(js)?;
    out.extend(inst.exact().map_err(js)?);
    Ok(out)
}

/// Random complex symmetric `n x n` matrix with spectral norm `norm`.
pub fn symmetric_matrix(n: usize, norm: f64, seed: u32) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let mut entries = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in i..n {
            let z = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            entries[i * n + j] = z;
            entries[j * n + i] = z;
        }
    }
    let m = ComplexMatrix::new(n, n, entries).expect("square data");
    let s = m.spectral_norm();
    if s > 0.0 { m.scale(C64::new(norm / s, 0.0)) } else { m }
}

pub fn hafnian_report(r: &ComplexMatrix, epsilon: f64, delta: f64, seed: u32) -> Result<Vec<f64>> {
    let cfg = EstimatorConfig::new(epsilon, delta, seed as u64);
    let est = estimate_hafnian(r, &cfg)?;
    let exact = if r.rows() <= EXACT_HAFNIAN_MAX { hafnian_exact(r)? } else { C64::new(f64::NAN, f64::NAN) };
    Ok(vec![est.estimate.re, est.estimate.im, exact.re, exact.im, est.samples_used as f64, est.epsilon])
}

/// Hafnian estimate of a random symmetric matrix.
/// Returns `[est_re, est_im, exact_re, exact_im, samples, error_bound]`
/// followed by the matrix entries, interleaved.
#[wasm_bindgen]
pub fn hafnian_estimate(n: usize, norm: f64, epsilon: f64, delta: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    let r = symmetric_matrix(n, norm, seed);
    let mut out = hafnian_report(&r, epsilon, delta, seed).map_err(js)?;
    out.extend(r.data().iter().flat_map(|z| [z.re, z.im]));
    Ok(out)
}
