//! Product observables with finite Fock support, their characteristic
//! functions `chi_O(alpha) = Tr[D(alpha) O]`, and an exact sampler for the
//! density `|chi_O(alpha)|^2 / (pi ||O||_2^2)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::diagnostics::Counters;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::special::{laguerre, laguerre_coefficients, ln_factorial};

/// Cap on rejection rounds before a sampler gives up.
pub const REJECTION_CAP: u64 = 1_000_000;

/// Draws with `|chi_O(alpha)|` below this are resampled.
pub const CHI_FLOOR: f64 = 1e-300;

/// `<m| D(alpha) |n>` in the convention `D(alpha) = exp(alpha a^dag - alpha^* a)`.
pub fn displaced_fock_element(m: usize, n: usize, alpha: C64) -> C64 {
    let s = alpha.norm_sqr();
    if s == 0.0 {
        return if m == n { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
    }
    let (lo, hi) = if m >= n { (n, m) } else { (m, n) };
    let k = hi - lo;
    let lag = laguerre(lo, k as f64, s);
    let log_mag = 0.5 * (ln_factorial(lo) - ln_factorial(hi)) + 0.5 * k as f64 * s.ln() - 0.5 * s;
    let base = if m >= n { alpha.arg() } else { PI - alpha.arg() };
    C64::from_polar(log_mag.exp() * lag, k as f64 * base)
}

/// Tag carried alongside the Fock-basis matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorKind {
    /// `|m><m|`
    Projector(usize),
    /// `sum_{n <= cutoff} exp(i theta n) |n><n|`
    Phase(f64),
    General,
}

/// A single-mode operator supported on `{|0>, ..., |cutoff>}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleModeOperator {
    cutoff: usize,
    matrix: Vec<C64>,
    kind: OperatorKind,
}

impl SingleModeOperator {
    pub fn projector(m: usize) -> Self {
        let dim = m + 1;
        let mut matrix = vec![C64::new(0.0, 0.0); dim * dim];
        matrix[m * dim + m] = C64::new(1.0, 0.0);
        Self { cutoff: m, matrix, kind: OperatorKind::Projector(m) }
    }

    /// Phase operator truncated to photon numbers `<= cutoff`.
    pub fn phase(theta: f64, cutoff: usize) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidOperator("non-finite phase".into()));
        }
        let dim = cutoff + 1;
        let mut matrix = vec![C64::new(0.0, 0.0); dim * dim];
        for n in 0..dim {
            matrix[n * dim + n] = C64::from_polar(1.0, theta * n as f64);
        }
        Ok(Self { cutoff, matrix, kind: OperatorKind::Phase(theta) })
    }

    /// General operator from its matrix `O_{nm} = <n|O|m>`.
    pub fn from_matrix(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() || m.rows() == 0 {
            return Err(Error::InvalidOperator(format!(
                "operator matrix must be square and non-empty, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        Ok(Self { cutoff: m.rows() - 1, matrix: m.data().to_vec(), kind: OperatorKind::General })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    /// `<n|O|m>`, zero outside the support.
    pub fn element(&self, n: usize, m: usize) -> C64 {
        if n > self.cutoff || m > self.cutoff {
            C64::new(0.0, 0.0)
        } else {
            self.matrix[n * (self.cutoff + 1) + m]
        }
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        let dim = self.cutoff + 1;
        ComplexMatrix::new(dim, dim, self.matrix.clone()).expect("square")
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let dim = self.cutoff + 1;
        (0..dim).all(|n| (0..dim).all(|m| (self.element(n, m) - self.element(m, n).conj()).norm() <= tol))
    }

    fn nonzero_entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        let dim = self.cutoff + 1;
        self.matrix
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .map(move |(idx, &z)| (idx / dim, idx % dim, z))
    }
}

/// `Tr[D(alpha) O] = sum_{n,m} O_{nm} <m|D(alpha)|n>`.
pub fn operator_char_fn(op: &SingleModeOperator, alpha: C64) -> C64 {
    match op.kind {
        OperatorKind::Projector(m) => {
            let s = alpha.norm_sqr();
            C64::new((-0.5 * s).exp() * laguerre(m, 0.0, s), 0.0)
        }
        _ => op.nonzero_entries().map(|(n, m, o)| o * displaced_fock_element(m, n, alpha)).sum(),
    }
}

/// `Tr[O^dag O]`.
pub fn operator_two_norm_sq(op: &SingleModeOperator) -> f64 {
    op.matrix.iter().map(|z| z.norm_sqr()).sum()
}

fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalized CDF from log weights.
fn cdf_from_logs(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = log_w
        .iter()
        .map(|lw| {
            acc += (lw - max).exp();
            acc
        })
        .collect();
    cdf.iter_mut().for_each(|c| *c /= acc);
    cdf
}

fn pick(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

#[derive(Clone, Debug)]
enum Envelope {
    /// `p(s)^2 <= (n+1) sum_j c_j^2 s^(2j)`: a Gamma mixture over all of `s >= 0`.
    Mixture { cdf: Vec<f64>, gammas: Vec<Gamma<f64>> },
    /// Height-one box on `[0, s_max]` (the density is a squared unitary matrix
    /// element), then `p(s)^2 <= (sum_j |c_j| s^j)^2` on the tail, written as a
    /// Gamma mixture in `s - s_max`.
    Boxed { s_max: f64, box_prob: f64, tail_cdf: Vec<f64>, tail_gammas: Vec<Gamma<f64>> },
}

/// Exact sampler for the radial density
/// `g(s) = n!/(n+k)! s^k e^{-s} L_n^(k)(s)^2 = |<n+k| D(sqrt s) |n>|^2` on `s >= 0`,
/// using whichever envelope has the smaller total mass.
#[derive(Clone, Debug)]
struct RadialSampler {
    n: usize,
    k: usize,
    /// `ln |c_j|` for the Laguerre coefficients.
    log_abs: Vec<f64>,
    signs: Vec<f64>,
    envelope: Envelope,
}

impl RadialSampler {
    fn new(n: usize, k: usize) -> Self {
        let coeffs = laguerre_coefficients(n, k);
        let signs = coeffs.iter().map(|c| c.signum()).collect();
        let log_abs: Vec<f64> = (0..=n)
            .map(|j| ln_factorial(n + k) - ln_factorial(n - j) - ln_factorial(k + j) - ln_factorial(j))
            .collect();
        let log_norm = ln_factorial(n) - ln_factorial(n + k);

        let mix_log_w: Vec<f64> = log_abs.iter().enumerate().map(|(j, lc)| 2.0 * lc + ln_factorial(k + 2 * j)).collect();
        let mix_mass = ((n + 1) as f64).ln() + log_norm + log_sum_exp(mix_log_w.iter().copied());

        // (sum_j |c_j| s^j)^2 = sum_i e_i s^i.
        let log_e: Vec<f64> = (0..=2 * n)
            .map(|i| {
                log_sum_exp((i.saturating_sub(n)..=i.min(n)).map(|j| log_abs[j] + log_abs[i - j])) + log_norm
            })
            .collect();
        // Tail weights in t = s - S: w_l = sum_i e_i C(k+i, l) S^(k+i-l), each times l!.
        let tail_log_w = |s_max: f64| -> Vec<f64> {
            (0..=k + 2 * n)
                .map(|l| {
                    let terms = log_e.iter().enumerate().filter(|(i, _)| k + i >= l).map(|(i, le)| {
                        let a = k + i;
                        le + ln_factorial(a) - ln_factorial(l) - ln_factorial(a - l) + (a - l) as f64 * s_max.ln()
                    });
                    log_sum_exp(terms) + ln_factorial(l) - s_max
                })
                .collect()
        };
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        let mut s_max = (n + k).max(1) as f64;
        for _ in 0..200 {
            let w = tail_log_w(s_max);
            let tail = log_sum_exp(w.iter().copied()).exp();
            let mass = s_max + tail;
            if best.as_ref().is_none_or(|b| mass < b.0 + b.1) {
                best = Some((s_max, tail, w));
            }
            if tail < 1e-3 {
                break;
            }
            s_max *= 1.1;
        }
        let (s_max, tail, w) = best.expect("at least one candidate");
        let envelope = if coeffs.len() == 1 || mix_mass.exp() <= s_max + tail {
            Envelope::Mixture {
                cdf: cdf_from_logs(&mix_log_w),
                gammas: (0..=n).map(|j| Gamma::new((k + 2 * j + 1) as f64, 1.0).expect("positive shape")).collect(),
            }
        } else {
            Envelope::Boxed {
                s_max,
                box_prob: s_max / (s_max + tail),
                tail_cdf: cdf_from_logs(&w),
                tail_gammas: (0..w.len()).map(|l| Gamma::new((l + 1) as f64, 1.0).expect("positive shape")).collect(),
            }
        };
        Self { n, k, log_abs, signs, envelope }
    }

    /// `g(s)`, the normalized target density.
    fn density(&self, s: f64) -> f64 {
        if self.k > 0 && s == 0.0 {
            return 0.0;
        }
        let l = laguerre(self.n, self.k as f64, s);
        let power = if self.k == 0 { 0.0 } else { self.k as f64 * s.ln() };
        (ln_factorial(self.n) - ln_factorial(self.n + self.k) + power - s).exp() * l * l
    }

    /// `p(s)^2 / (sum_j |c_j| s^j)^2`, computed without overflow.
    fn tail_ratio(&self, s: f64) -> f64 {
        let ln_s = s.ln();
        let log_abs_sum = log_sum_exp(self.log_abs.iter().enumerate().map(|(j, lc)| lc + j as f64 * ln_s));
        let max = self.log_abs.iter().enumerate().map(|(j, lc)| lc + j as f64 * ln_s).fold(f64::NEG_INFINITY, f64::max);
        let p: f64 = self
            .log_abs
            .iter()
            .zip(&self.signs)
            .enumerate()
            .map(|(j, (lc, sg))| sg * (lc + j as f64 * ln_s - max).exp())
            .sum();
        (p * (max - log_abs_sum).exp()).powi(2)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, counters: &mut Counters) -> Result<f64> {
        for _ in 0..REJECTION_CAP {
            let (s, accept) = match &self.envelope {
                Envelope::Mixture { cdf, gammas } => {
                    let s = gammas[pick(cdf, rng.random())].sample(rng);
                    if gammas.len() == 1 {
                        return Ok(s);
                    }
                    let mut p = 0.0;
                    let mut envelope = 0.0;
                    for (j, (lc, sg)) in self.log_abs.iter().zip(&self.signs).enumerate() {
                        let t = lc.exp() * s.powi(j as i32);
                        p += sg * t;
                        envelope += t * t;
                    }
                    (s, p * p / (gammas.len() as f64 * envelope))
                }
                Envelope::Boxed { s_max, box_prob, tail_cdf, tail_gammas } => {
                    if rng.random::<f64>() < *box_prob {
                        let s = s_max * rng.random::<f64>();
                        (s, self.density(s))
                    } else {
                        let s = s_max + tail_gammas[pick(tail_cdf, rng.random())].sample(rng);
                        (s, self.tail_ratio(s))
                    }
                }
            };
            if rng.random::<f64>() < accept {
                return Ok(s);
            }
            counters.inner_rejections += 1;
        }
        Err(Error::Sampling("radial envelope sampler exceeded the iteration cap".into()))
    }
}

#[derive(Clone, Debug)]
struct Term {
    n: usize,
    m: usize,
    weight: f64,
    radial: RadialSampler,
}

/// Exact sampler for `q(alpha) = |chi_O(alpha)|^2 / (pi ||O||_2^2)`.
///
/// Level one picks a matrix entry `(n, m)` with probability
/// `|O_nm|^2 / ||O||_2^2` and draws `alpha` from the normalized term density
/// `|<m|D(alpha)|n>|^2 / pi` (radial part via [`RadialSampler`], uniform
/// phase). Level two accepts against `q` with bound constant equal to the
/// number of nonzero entries, by Cauchy-Schwarz.
#[derive(Clone, Debug)]
pub struct CharSampler {
    op: SingleModeOperator,
    norm_sq: f64,
    terms: Vec<Term>,
    cdf: Vec<f64>,
}

impl CharSampler {
    pub fn new(op: &SingleModeOperator) -> Result<Self> {
        let norm_sq = operator_two_norm_sq(op);
        if !(norm_sq > 0.0) || !norm_sq.is_finite() {
            return Err(Error::InvalidOperator("operator has zero (or non-finite) two-norm".into()));
        }
        let terms: Vec<Term> = op
            .nonzero_entries()
            .map(|(n, m, o)| Term {
                n,
                m,
                weight: o.norm_sqr() / norm_sq,
                radial: RadialSampler::new(n.min(m), n.abs_diff(m)),
            })
            .collect();
        let mut acc = 0.0;
        let cdf = terms
            .iter()
            .map(|t| {
                acc += t.weight;
                acc
            })
            .collect();
        Ok(Self { op: op.clone(), norm_sq, terms, cdf })
    }

    pub fn operator(&self) -> &SingleModeOperator {
        &self.op
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// Draws `alpha ~ q` and returns it with `chi_O(alpha)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, counters: &mut Counters) -> Result<(C64, C64)> {
        let single = self.terms.len() == 1;
        let bound = self.terms.len() as f64;
        for _ in 0..REJECTION_CAP {
            let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
            let idx = self.cdf.iter().position(|&c| u < c).unwrap_or(self.terms.len() - 1);
            let term = &self.terms[idx];
            let s = term.radial.sample(rng, counters)?;
            let theta = 2.0 * PI * rng.random::<f64>();
            let alpha = C64::from_polar(s.sqrt(), theta);
            counters.proposals += 1;
            let chi = operator_char_fn(&self.op, alpha);
            if !single {
                let envelope: f64 = self
                    .terms
                    .iter()
                    .map(|t| t.weight * self.norm_sq * displaced_fock_element(t.m, t.n, alpha).norm_sqr())
                    .sum();
                let accept = chi.norm_sqr() / (bound * envelope);
                if !(rng.random::<f64>() < accept) {
                    continue;
                }
            }
            if chi.norm() < CHI_FLOOR {
                counters.zero_guard += 1;
                continue;
            }
            counters.accepted += 1;
            return Ok((alpha, chi));
        }
        Err(Error::Sampling("characteristic-function sampler exceeded the iteration cap".into()))
    }
}

/// One draw from `q(alpha) ∝ |chi_O(alpha)|^2`.
pub fn sample_operator_char<R: Rng + ?Sized>(
    op: &SingleModeOperator,
    rng: &mut R,
    counters: &mut Counters,
) -> Result<C64> {
    Ok(CharSampler::new(op)?.sample(rng, counters)?.0)
}

/// `O_A ⊗ 1_B` with `O_A` a product over the supported modes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductObservable {
    modes: usize,
    support: BTreeMap<usize, SingleModeOperator>,
}

impl ProductObservable {
    pub fn new(modes: usize, support: BTreeMap<usize, SingleModeOperator>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidOperator("observable support is empty".into()));
        }
        if let Some((&k, _)) = support.iter().find(|(&k, _)| k >= modes) {
            return Err(Error::Dimension(format!("observable acts on mode {k} of a {modes}-mode system")));
        }
        Ok(Self { modes, support })
    }

    pub fn from_pairs(modes: usize, pairs: impl IntoIterator<Item = (usize, SingleModeOperator)>) -> Result<Self> {
        let mut support = BTreeMap::new();
        for (k, op) in pairs {
            if support.insert(k, op).is_some() {
                return Err(Error::InvalidOperator(format!("mode {k} listed twice")));
            }
        }
        Self::new(modes, support)
    }

    /// Projector onto the full photon-number pattern.
    pub fn pattern_projector(pattern: &[usize]) -> Result<Self> {
        Self::from_pairs(pattern.len(), pattern.iter().enumerate().map(|(k, &m)| (k, SingleModeOperator::projector(m))))
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn support(&self) -> &BTreeMap<usize, SingleModeOperator> {
        &self.support
    }

    /// `prod_i ||O_i||_2^2`.
    pub fn two_norm_sq(&self) -> f64 {
        self.support.values().map(operator_two_norm_sq).product()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.support.values().all(|o| o.is_hermitian(tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::testutil::{displacement, trace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn displaced_element_closed_forms() {
        assert_eq!(displaced_fock_element(3, 3, c(0.0, 0.0)), c(1.0, 0.0));
        let alpha = c(0.4, -0.7);
        let g = (-0.5 * alpha.norm_sqr()).exp();
        assert!((displaced_fock_element(0, 0, alpha) - g).norm() < 1e-15);
        assert!((displaced_fock_element(1, 0, alpha) - alpha * g).norm() < 1e-15);
        assert!((displaced_fock_element(0, 1, alpha) + alpha.conj() * g).norm() < 1e-15);
    }

    #[test]
    fn displaced_elements_match_dense_exponential() {
        let dim = 40;
        for alpha in [c(0.3, 0.2), c(-1.1, 0.5), c(0.0, 1.4)] {
            let d = displacement(alpha, dim);
            for m in 0..6 {
                for n in 0..6 {
                    let want = d[(m, n)];
                    let got = displaced_fock_element(m, n, alpha);
                    assert!((want - got).norm() < 1e-10, "m={m} n={n} alpha={alpha}");
                }
            }
        }
    }

    #[test]
    fn projector_char_fn() {
        assert!((operator_char_fn(&SingleModeOperator::projector(0), c(0.0, 0.0)) - 1.0).norm() < 1e-15);
        let chi = operator_char_fn(&SingleModeOperator::projector(1), c(1.0, 0.0));
        assert!(chi.norm() < 1e-15);
    }

    #[test]
    fn general_char_fn_matches_dense_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = ComplexMatrix::from_fn(3, 3, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let op = SingleModeOperator::from_matrix(&m).unwrap();
        let dim = 40;
        let embedded = ComplexMatrix::from_fn(dim, dim, |i, j| op.element(i, j));
        for _ in 0..50 {
            let alpha = c(2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0);
            let want = trace(&(&displacement(alpha, dim) * &embedded));
            let got = operator_char_fn(&op, alpha);
            assert!((want - got).norm() < 1e-10);
        }
    }

    #[test]
    fn two_norms() {
        assert_eq!(operator_two_norm_sq(&SingleModeOperator::projector(4)), 1.0);
        let d = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(2.0, 0.0)]);
        assert_eq!(operator_two_norm_sq(&SingleModeOperator::from_matrix(&d).unwrap()), 5.0);
        let zero = SingleModeOperator::from_matrix(&ComplexMatrix::zeros(2, 2)).unwrap();
        assert_eq!(operator_two_norm_sq(&zero), 0.0);
        assert!(matches!(CharSampler::new(&zero), Err(Error::InvalidOperator(_))));
    }

    #[test]
    fn hermitian_char_fn_symmetry() {
        let m = ComplexMatrix::from_rows(&[vec![c(0.5, 0.0), c(0.2, 0.3)], vec![c(0.2, -0.3), c(-0.1, 0.0)]]).unwrap();
        let op = SingleModeOperator::from_matrix(&m).unwrap();
        assert!(op.is_hermitian(1e-15));
        for alpha in [c(0.3, 0.4), c(-1.0, 0.2)] {
            assert!((operator_char_fn(&op, -alpha) - operator_char_fn(&op, alpha).conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn vacuum_projector_radius_is_exponential() {
        let op = SingleModeOperator::projector(0);
        let sampler = CharSampler::new(&op).unwrap();
        let mut counters = Counters::default();
        let n = 100_000;
        let mut mean = 0.0;
        let mut mean_sq = 0.0;
        for i in 0..n {
            let (alpha, _) = sampler.sample(&mut substream(3, 0, i), &mut counters).unwrap();
            let s = alpha.norm_sqr();
            mean += s;
            mean_sq += s * s;
        }
        mean /= n as f64;
        mean_sq /= n as f64;
        // Exp(1): mean 1, second moment 2.
        assert!((mean - 1.0).abs() < 4.0 * (1.0 / n as f64).sqrt());
        assert!((mean_sq - 2.0).abs() < 4.0 * (20.0f64 / n as f64).sqrt());
    }

    #[test]
    fn projector_density_is_normalized() {
        // Importance ratio against s ~ Exp(1/2): E[e^{-s} L_m(s)^2 / g(s)] = 1
        // by Laguerre orthonormality.
        let n = 100_000u64;
        let proposal = Gamma::new(1.0, 2.0).unwrap();
        for m in 0..4 {
            let op = SingleModeOperator::projector(m);
            let vals: Vec<f64> = (0..n)
                .map(|i| {
                    let s: f64 = proposal.sample(&mut substream(8, m as u64, i));
                    let alpha = C64::new(s.sqrt(), 0.0);
                    let g = 0.5 * (-0.5 * s).exp();
                    operator_char_fn(&op, alpha).norm_sqr() / g
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - 1.0).abs() < 4.0 * se, "m={m} mean={mean} se={se}");
        }
    }

    #[test]
    fn projector_sampler_first_moment() {
        // E_q[|alpha|^2] = int s e^{-s} L_m(s)^2 ds = 2m + 1.
        let n = 100_000u64;
        for m in 0..4 {
            let sampler = CharSampler::new(&SingleModeOperator::projector(m)).unwrap();
            let mut counters = Counters::default();
            let vals: Vec<f64> = (0..n)
                .map(|i| sampler.sample(&mut substream(9, m as u64, i), &mut counters).unwrap().0.norm_sqr())
                .collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let want = (2 * m + 1) as f64;
            assert!((mean - want).abs() < 4.0 * se, "m={m} mean={mean} se={se}");
        }
    }

    #[test]
    fn observable_validation() {
        let mut s = BTreeMap::new();
        s.insert(3, SingleModeOperator::projector(1));
        assert!(ProductObservable::new(3, s).is_err());
        assert!(ProductObservable::new(3, BTreeMap::new()).is_err());
        let obs = ProductObservable::pattern_projector(&[1, 0, 2]).unwrap();
        assert_eq!(obs.support().len(), 3);
        assert_eq!(obs.two_norm_sq(), 1.0);
    }

    #[test]
    fn radial_sampler_matches_numeric_cdf() {
        for (n, k) in [(0, 3), (1, 0), (6, 0), (3, 5), (10, 2), (25, 1)] {
            let sampler = RadialSampler::new(n, k);
            let mut rng = crate::rng::substream(8, (n * 100 + k) as u64, 0);
            let mut counters = Counters::default();
            let draws = 20_000;
            let mut xs: Vec<f64> =
                (0..draws).map(|_| sampler.sample(&mut rng, &mut counters).unwrap()).collect();
            xs.sort_by(f64::total_cmp);
            assert!(counters.inner_rejections < 200 * draws as u64, "({n},{k}) acceptance too low");
            // Trapezoid CDF on a fine grid.
            let top = 8.0 * (n + k) as f64 + 80.0;
            let steps = 1_000_000;
            let h = top / steps as f64;
            let mut cdf = 0.0;
            let mut prev = sampler.density(0.0);
            let mut d = 0.0f64;
            let mut idx = 0;
            for i in 1..=steps {
                let s = i as f64 * h;
                let cur = sampler.density(s);
                cdf += 0.5 * h * (prev + cur);
                prev = cur;
                while idx < xs.len() && xs[idx] <= s {
                    idx += 1;
                }
                d = d.max((idx as f64 / draws as f64 - cdf).abs());
            }
            assert!((cdf - 1.0).abs() < 1e-6, "({n},{k}) density mass {cdf}");
            assert!(d < 1.95 / (draws as f64).sqrt(), "({n},{k}) KS {d}");
        }
    }
}
