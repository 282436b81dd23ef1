//! Exact desk-scale ground truth for linear-optical circuits.
//!
//! Convention: `U a_i^dag U^dag = sum_j U_ji a_j^dag`, hence
//! `<m|U|n> = per(U[m, n]) / sqrt(prod m_i! prod n_j!)` with output modes
//! repeated along rows and input modes along columns.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::linalg::{permanent_exact_capped, require_unitary, ComplexMatrix, C64};
use crate::observables::ProductObservable;
use crate::special::ln_factorial;
use crate::states::{fock_expansion, ProductState};

/// Environment variable overriding the photon cap.
pub const MAX_PHOTONS_ENV: &str = "BOSONIC_MAX_ORACLE_PHOTONS";
pub const DEFAULT_MAX_PHOTONS: usize = 14;
pub const DEFAULT_MAX_TERMS: usize = 4_000_000;

const UNITARY_TOL: f64 = 1e-9;

pub type Pattern = Vec<usize>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleLimits {
    /// Largest total photon number of any input Fock pattern kept.
    pub max_photons: usize,
    /// Largest number of simultaneously stored Fock terms.
    pub max_terms: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_photons: DEFAULT_MAX_PHOTONS, max_terms: DEFAULT_MAX_TERMS }
    }
}

impl OracleLimits {
    /// Defaults, with the photon cap taken from `BOSONIC_MAX_ORACLE_PHOTONS` when set.
    pub fn from_env() -> Result<Self> {
        let mut limits = Self::default();
        if let Ok(v) = std::env::var(MAX_PHOTONS_ENV) {
            limits.max_photons = v
                .trim()
                .parse()
                .ok()
                .filter(|&n| n <= 255)
                .ok_or_else(|| Error::InvalidConfig(format!("{MAX_PHOTONS_ENV}={v:?} is not an integer in 0..=255")))?;
        }
        Ok(limits)
    }
}

/// An exact value together with the probability mass dropped by truncation.
#[derive(Clone, Debug, PartialEq)]
pub struct Exact<T> {
    pub value: T,
    pub tail: f64,
}

/// `<m| U |n>` for Fock patterns, via the permanent.
pub fn fock_amplitude_exact(u: &ComplexMatrix, n_in: &[usize], m_out: &[usize]) -> Result<C64> {
    fock_amplitude_exact_with(u, n_in, m_out, &OracleLimits::default())
}

pub fn fock_amplitude_exact_with(
    u: &ComplexMatrix,
    n_in: &[usize],
    m_out: &[usize],
    limits: &OracleLimits,
) -> Result<C64> {
    let m = u.require_square("circuit")?;
    if n_in.len() != m || m_out.len() != m {
        return Err(Error::Dimension(format!(
            "patterns of length {} and {} for a {m}-mode circuit",
            n_in.len(),
            m_out.len()
        )));
    }
    let total: usize = n_in.iter().sum();
    if total != m_out.iter().sum::<usize>() {
        return Ok(C64::new(0.0, 0.0));
    }
    if total > limits.max_photons {
        return Err(Error::Size { what: "oracle photon number", size: total, max: limits.max_photons });
    }
    let rows = repeat_modes(m_out);
    let cols = repeat_modes(n_in);
    let per = permanent_exact_capped(&u.select(&rows, &cols), limits.max_photons.max(1))?;
    let log_norm: f64 = n_in.iter().chain(m_out).map(|&k| ln_factorial(k)).sum();
    Ok(per * (-0.5 * log_norm).exp())
}

fn repeat_modes(pattern: &[usize]) -> Vec<usize> {
    pattern.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k)).collect()
}

/// Product Fock expansion of `state`: patterns with at most `max_photons`
/// photons and nonzero coefficient, plus the discarded mass.
fn product_expansion(state: &ProductState, cutoff: usize, max_photons: usize) -> Result<(Vec<(Pattern, C64)>, f64)> {
    let mut per_mode = Vec::with_capacity(state.len());
    for s in state.modes() {
        per_mode.push(fock_expansion(s, cutoff)?.0);
    }
    let mut out = Vec::new();
    let mut pattern = vec![0; state.len()];
    expand_rec(&per_mode, 0, max_photons, C64::new(1.0, 0.0), &mut pattern, &mut out);
    let kept: f64 = out.iter().map(|(_, c)| c.norm_sqr()).sum();
    Ok((out, (1.0 - kept).max(0.0)))
}

fn expand_rec(
    per_mode: &[Vec<C64>],
    mode: usize,
    budget: usize,
    coeff: C64,
    pattern: &mut Pattern,
    out: &mut Vec<(Pattern, C64)>,
) {
    if mode == per_mode.len() {
        out.push((pattern.clone(), coeff));
        return;
    }
    for (n, c) in per_mode[mode].iter().enumerate().take(budget + 1) {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        pattern[mode] = n;
        expand_rec(per_mode, mode + 1, budget - n, coeff * c, pattern, out);
    }
    pattern[mode] = 0;
}

/// `U sum_n c_n |n>` as output-pattern amplitudes, by substituting
/// `a_i^dag -> sum_j U_ji a_j^dag` in the creation-operator polynomial.
fn evolve(u: &ComplexMatrix, terms: &[(Pattern, C64)], limits: &OracleLimits) -> Result<HashMap<Vec<u8>, C64>> {
    let m = u.rows();
    // Key: remaining input exponents (first m) then output exponents (last m).
    let mut poly: HashMap<Vec<u8>, C64> = HashMap::new();
    for (pattern, c) in terms {
        let mut key = vec![0u8; 2 * m];
        let mut log_norm = 0.0;
        for (k, &n) in pattern.iter().enumerate() {
            key[k] = u8::try_from(n).map_err(|_| Error::Size { what: "photons per mode", size: n, max: 255 })?;
            log_norm += ln_factorial(n);
        }
        *poly.entry(key).or_default() += c * (-0.5 * log_norm).exp();
    }
    for i in 0..m {
        loop {
            let mut next: HashMap<Vec<u8>, C64> = HashMap::with_capacity(poly.len());
            let mut changed = false;
            for (key, c) in poly {
                if key[i] == 0 {
                    *next.entry(key).or_default() += c;
                    continue;
                }
                changed = true;
                for j in 0..m {
                    let uji = u[(j, i)];
                    if uji.norm_sqr() == 0.0 {
                        continue;
                    }
                    let mut k2 = key.clone();
                    k2[i] -= 1;
                    k2[m + j] += 1;
                    *next.entry(k2).or_default() += c * uji;
                }
                if next.len() > limits.max_terms {
                    return Err(Error::Budget(format!("oracle expansion exceeds {} terms", limits.max_terms)));
                }
            }
            poly = next;
            if !changed {
                break;
            }
        }
    }
    Ok(poly
        .into_iter()
        .map(|(key, c)| {
            let out = key[m..].to_vec();
            let log_norm: f64 = out.iter().map(|&k| ln_factorial(k as usize)).sum();
            (out, c * (0.5 * log_norm).exp())
        })
        .collect())
}

fn check(u: &ComplexMatrix, state: &ProductState) -> Result<()> {
    let m = u.require_square("circuit")?;
    require_unitary(u, UNITARY_TOL, "circuit")?;
    if state.len() != m {
        return Err(Error::Dimension(format!("state has {} modes, circuit has {m}", state.len())));
    }
    Ok(())
}

fn to_pattern(key: &[u8]) -> Pattern {
    key.iter().map(|&k| k as usize).collect()
}

/// `<phi| U |psi>` with both states expanded to per-mode `cutoff`.
/// The reported tail is the sum of the input and output truncation masses.
pub fn exact_amplitude(u: &ComplexMatrix, input: &ProductState, output: &ProductState, cutoff: usize) -> Result<Exact<C64>> {
    exact_amplitude_with(u, input, output, cutoff, &OracleLimits::from_env()?)
}

pub fn exact_amplitude_with(
    u: &ComplexMatrix,
    input: &ProductState,
    output: &ProductState,
    cutoff: usize,
    limits: &OracleLimits,
) -> Result<Exact<C64>> {
    check(u, input)?;
    check(u, output)?;
    let (out_terms, out_tail) = product_expansion(output, cutoff, limits.max_photons)?;
    let totals: std::collections::HashSet<usize> = out_terms.iter().map(|(p, _)| p.iter().sum()).collect();
    let (in_terms, in_tail) = product_expansion(input, cutoff, limits.max_photons)?;
    let relevant: Vec<(Pattern, C64)> =
        in_terms.into_iter().filter(|(p, _)| totals.contains(&p.iter().sum::<usize>())).collect();
    let evolved = evolve(u, &relevant, limits)?;
    let mut value = C64::new(0.0, 0.0);
    for (p, c) in &out_terms {
        let key: Vec<u8> = p.iter().map(|&k| k as u8).collect();
        if let Some(a) = evolved.get(&key) {
            value += c.conj() * a;
        }
    }
    Ok(Exact { value, tail: in_tail + out_tail })
}

/// Probabilities of all output patterns reachable from the truncated input.
pub fn exact_output_distribution(
    u: &ComplexMatrix,
    input: &ProductState,
    cutoff: usize,
) -> Result<Exact<BTreeMap<Pattern, f64>>> {
    exact_output_distribution_with(u, input, cutoff, &OracleLimits::from_env()?)
}

pub fn exact_output_distribution_with(
    u: &ComplexMatrix,
    input: &ProductState,
    cutoff: usize,
    limits: &OracleLimits,
) -> Result<Exact<BTreeMap<Pattern, f64>>> {
    check(u, input)?;
    let (terms, tail) = product_expansion(input, cutoff, limits.max_photons)?;
    let evolved = evolve(u, &terms, limits)?;
    let value = evolved.into_iter().map(|(k, a)| (to_pattern(&k), a.norm_sqr())).collect();
    Ok(Exact { value, tail })
}

/// `<psi| U^dag O U |psi>` over the truncated input.
pub fn exact_expectation(
    u: &ComplexMatrix,
    input: &ProductState,
    observable: &ProductObservable,
    cutoff: usize,
) -> Result<Exact<C64>> {
    exact_expectation_with(u, input, observable, cutoff, &OracleLimits::from_env()?)
}

pub fn exact_expectation_with(
    u: &ComplexMatrix,
    input: &ProductState,
    observable: &ProductObservable,
    cutoff: usize,
    limits: &OracleLimits,
) -> Result<Exact<C64>> {
    check(u, input)?;
    if observable.modes() != input.len() {
        return Err(Error::Dimension("observable and state mode counts differ".into()));
    }
    let (terms, tail) = product_expansion(input, cutoff, limits.max_photons)?;
    let evolved = evolve(u, &terms, limits)?;
    let support: Vec<usize> = observable.support().keys().copied().collect();
    // Group amplitudes by the pattern outside the support, where O is the identity.
    let mut groups: HashMap<Vec<u8>, Vec<(Vec<u8>, C64)>> = HashMap::new();
    for (key, a) in evolved {
        let mut rest = key.clone();
        let inside: Vec<u8> = support.iter().map(|&s| key[s]).collect();
        for &s in &support {
            rest[s] = u8::MAX;
        }
        groups.entry(rest).or_default().push((inside, a));
    }
    let ops: Vec<_> = observable.support().values().collect();
    let mut value = C64::new(0.0, 0.0);
    for members in groups.values() {
        for (bra, a) in members {
            for (ket, b) in members {
                let mut el = C64::new(1.0, 0.0);
                for ((op, &n), &m) in ops.iter().zip(bra).zip(ket) {
                    el *= op.element(n as usize, m as usize);
                    if el.norm_sqr() == 0.0 {
                        break;
                    }
                }
                value += a.conj() * el * b;
            }
        }
    }
    Ok(Exact { value, tail })
}

/// `G(Omega) = sum_{m : omega.m = Omega} p(m)` for `Omega = 0..=omega_max`;
/// mass at larger `Omega` is ignored.
pub fn grouped_distribution(dist: &BTreeMap<Pattern, f64>, omega: &[u64], omega_max: usize) -> Vec<f64> {
    let mut g = vec![0.0; omega_max + 1];
    for (p, prob) in dist {
        let w: u64 = p.iter().zip(omega).map(|(&k, &w)| k as u64 * w).sum();
        if (w as usize) <= omega_max {
            g[w as usize] += prob;
        }
    }
    g
}

/// All patterns over `modes` modes with at most `max_photons` photons in total.
pub fn enumerate_patterns(modes: usize, max_photons: usize) -> Vec<Pattern> {
    fn rec(modes: usize, left: usize, cur: &mut Pattern, out: &mut Vec<Pattern>) {
        if cur.len() == modes {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(modes, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(modes, max_photons, &mut Vec::with_capacity(modes), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_random_unitary;
    use crate::observables::SingleModeOperator;
    use crate::states::ModeState;

    fn bs() -> ComplexMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_real_rows(&[vec![h, h], vec![h, -h]]).unwrap()
    }

    #[test]
    fn fock_amplitudes() {
        let u = haar_random_unitary(3, 1).unwrap();
        assert!((fock_amplitude_exact(&ComplexMatrix::identity(3), &[1, 0, 2], &[1, 0, 2]).unwrap() - 1.0).norm() < 1e-14);
        assert!(fock_amplitude_exact(&bs(), &[1, 1], &[1, 1]).unwrap().norm() < 1e-15);
        assert_eq!(fock_amplitude_exact(&u, &[1, 0, 0], &[1, 1, 0]).unwrap(), C64::new(0.0, 0.0));
        let big = vec![15, 0, 0];
        assert!(matches!(fock_amplitude_exact(&u, &big, &big), Err(Error::Size { .. })));
    }

    #[test]
    fn evolution_matches_permanents() {
        let u = haar_random_unitary(3, 5).unwrap();
        let input = ProductState::fock(&[2, 0, 1]).unwrap();
        let dist = exact_output_distribution(&u, &input, 4).unwrap();
        assert_eq!(dist.tail, 0.0);
        let total: f64 = dist.value.values().sum();
        assert!((total - 1.0).abs() < 1e-10);
        for (p, prob) in &dist.value {
            let a = fock_amplitude_exact(&u, &[2, 0, 1], p).unwrap();
            assert!((a.norm_sqr() - prob).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn hom_distribution() {
        let dist = exact_output_distribution(&bs(), &ProductState::fock(&[1, 1]).unwrap(), 4).unwrap().value;
        assert!((dist[&vec![2, 0]] - 0.5).abs() < 1e-12);
        assert!((dist[&vec![0, 2]] - 0.5).abs() < 1e-12);
        assert!(dist.get(&vec![1, 1]).copied().unwrap_or(0.0) < 1e-12);
    }

    #[test]
    fn amplitude_cases() {
        let u = haar_random_unitary(2, 9).unwrap();
        let vac = ProductState::vacuum(2).unwrap();
        assert!((exact_amplitude(&u, &vac, &vac, 4).unwrap().value - 1.0).norm() < 1e-14);
        let beta = C64::new(0.6, 0.2);
        let coh = ProductState::new(vec![ModeState::Coherent(beta)]).unwrap();
        let v1 = ProductState::vacuum(1).unwrap();
        let r = exact_amplitude(&ComplexMatrix::identity(1), &coh, &v1, 30).unwrap();
        assert!((r.value - (-0.5 * beta.norm_sqr()).exp()).norm() < 1e-14);
    }

    #[test]
    fn expectation_product_rule_and_completeness() {
        let input = ProductState::new(vec![
            ModeState::Coherent(C64::new(0.3, 0.1)),
            ModeState::Superposition(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]),
        ])
        .unwrap();
        let op0 = SingleModeOperator::projector(1);
        let op1 = SingleModeOperator::from_matrix(
            &ComplexMatrix::from_rows(&[vec![C64::new(0.5, 0.0), C64::new(0.1, 0.2)], vec![C64::new(0.1, -0.2), C64::new(-0.3, 0.0)]])
                .unwrap(),
        )
        .unwrap();
        let obs = ProductObservable::from_pairs(2, [(0, op0), (1, op1)]).unwrap();
        let got = exact_expectation(&ComplexMatrix::identity(2), &input, &obs, 30).unwrap().value;
        let b = C64::new(0.3, 0.1);
        let e0 = (-b.norm_sqr()).exp() * b.norm_sqr();
        let c = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let m = [[C64::new(0.5, 0.0), C64::new(0.1, 0.2)], [C64::new(0.1, -0.2), C64::new(-0.3, 0.0)]];
        let e1: C64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| c[i].conj() * m[i][j] * c[j]).sum();
        assert!((got - e0 * e1).norm() < 1e-12);

        let u = haar_random_unitary(2, 4).unwrap();
        let fock = ProductState::fock(&[2, 1]).unwrap();
        let total: C64 = (0..=3)
            .map(|k| exact_expectation(&u, &fock, &ProductObservable::pattern_projector(&[k, 3 - k]).unwrap(), 4).unwrap().value)
            .sum();
        assert!((total - 1.0).norm() < 1e-12);
    }

    #[test]
    fn grouping_and_enumeration() {
        let dist = exact_output_distribution(&bs(), &ProductState::fock(&[1, 1]).unwrap(), 4).unwrap().value;
        let g = grouped_distribution(&dist, &[1, 2], 4);
        assert!((g[2] - 0.5).abs() < 1e-12 && (g[4] - 0.5).abs() < 1e-12 && g[3].abs() < 1e-12);
        assert_eq!(enumerate_patterns(2, 2).len(), 6);
        assert_eq!(enumerate_patterns(3, 0), vec![vec![0, 0, 0]]);
    }

    #[test]
    fn amplitude_map_is_unitary() {
        let u = haar_random_unitary(3, 77).unwrap();
        for n in enumerate_patterns(3, 4).into_iter().filter(|p| p.iter().sum::<usize>() == 4) {
            let total: f64 = enumerate_patterns(3, 4)
                .iter()
                .map(|m| fock_amplitude_exact(&u, &n, m).unwrap().norm_sqr())
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "{n:?}");
        }
    }
}
