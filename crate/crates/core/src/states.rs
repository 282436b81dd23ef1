//! Single-mode and product bosonic states: coherent-state overlaps,
//! characteristic functions, and exact Husimi-Q samplers.
//!
//! Conventions: `D(alpha) = exp(alpha a^dag - alpha^* a)` and
//! `S(xi)^dag a S(xi) = a cosh r - a^dag e^{i phi} sinh r` with `xi = r e^{i phi}`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::diagnostics::Counters;
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::observables::{displaced_fock_element, REJECTION_CAP};
use crate::special::{laguerre, ln_factorial};

/// Largest squeezing parameter accepted by default.
pub const R_MAX: f64 = 6.0;

/// Hard cap on the Fock cutoff produced by [`truncate_squeezed_fock`].
pub const TRUNCATION_CAP: usize = 512;

const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum ModeState {
    Fock(usize),
    Coherent(C64),
    SqueezedVacuum { r: f64, phi: f64 },
    /// Coefficients indexed by photon number; the cutoff is `len - 1`.
    Superposition(Vec<C64>),
}

impl ModeState {
    pub fn vacuum() -> Self {
        ModeState::Fock(0)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModeState::Fock(_) => Ok(()),
            ModeState::Coherent(b) => {
                if b.re.is_finite() && b.im.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidState("non-finite coherent amplitude".into()))
                }
            }
            ModeState::SqueezedVacuum { r, phi } => {
                if !(r.is_finite() && phi.is_finite()) || *r < 0.0 {
                    Err(Error::InvalidState(format!("invalid squeezing r={r} phi={phi}")))
                } else if *r >= R_MAX {
                    Err(Error::InvalidState(format!("squeezing r={r} exceeds r_max={R_MAX}")))
                } else {
                    Ok(())
                }
            }
            ModeState::Superposition(c) => {
                if c.is_empty() {
                    return Err(Error::InvalidState("empty superposition".into()));
                }
                let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
                if (norm - 1.0).abs() > NORM_TOL || !norm.is_finite() {
                    Err(Error::InvalidState(format!("superposition norm^2 = {norm}, expected 1")))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// `<alpha|s> e^{|alpha|^2/2}`: the overlap with the vacuum Gaussian stripped.
    pub fn reduced_overlap(&self, alpha: C64) -> C64 {
        OverlapKernel::new(self).eval(alpha)
    }
}

/// Precomputed form of [`ModeState::reduced_overlap`] for repeated evaluation.
#[derive(Clone, Debug)]
pub enum OverlapKernel {
    Fock { n: usize, inv_sqrt_fact: f64 },
    Coherent { beta: C64, half_norm: f64 },
    Squeezed { coef: C64, norm: f64 },
    Superposition(Vec<C64>),
}

impl OverlapKernel {
    pub fn new(s: &ModeState) -> Self {
        match s {
            ModeState::Fock(n) => OverlapKernel::Fock { n: *n, inv_sqrt_fact: (-0.5 * ln_factorial(*n)).exp() },
            ModeState::Coherent(b) => OverlapKernel::Coherent { beta: *b, half_norm: 0.5 * b.norm_sqr() },
            ModeState::SqueezedVacuum { r, phi } => OverlapKernel::Squeezed {
                coef: -C64::from_polar(0.5 * r.tanh(), *phi),
                norm: 1.0 / r.cosh().sqrt(),
            },
            ModeState::Superposition(c) => OverlapKernel::Superposition(c.clone()),
        }
    }

    #[inline]
    pub fn eval(&self, alpha: C64) -> C64 {
        let ac = alpha.conj();
        match self {
            OverlapKernel::Fock { n, inv_sqrt_fact } => match *n {
                0 => C64::new(1.0, 0.0),
                1 => ac,
                2..=24 => ac.powu(*n as u32) * *inv_sqrt_fact,
                _ => fock_reduced(*n, alpha),
            },
            OverlapKernel::Coherent { beta, half_norm } => (ac * beta - half_norm).exp(),
            OverlapKernel::Squeezed { coef, norm } => (ac * ac * coef).exp() * *norm,
            OverlapKernel::Superposition(c) => {
                let mut term = C64::new(1.0, 0.0);
                let mut acc = C64::new(0.0, 0.0);
                for (n, cn) in c.iter().enumerate() {
                    if n > 0 {
                        term *= ac / (n as f64).sqrt();
                    }
                    acc += cn * term;
                }
                acc
            }
        }
    }
}

fn fock_reduced(n: usize, alpha: C64) -> C64 {
    match n {
        0 => return C64::new(1.0, 0.0),
        1 => return alpha.conj(),
        2..=24 => return alpha.conj().powu(n as u32) * (-0.5 * ln_factorial(n)).exp(),
        _ => {}
    }
    let r = alpha.norm();
    if r == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let log_mag = n as f64 * r.ln() - 0.5 * ln_factorial(n);
    C64::from_polar(log_mag.exp(), -(n as f64) * alpha.arg())
}

/// `<alpha|s>`.
pub fn coherent_overlap(s: &ModeState, alpha: C64) -> C64 {
    s.reduced_overlap(alpha) * (-0.5 * alpha.norm_sqr()).exp()
}

/// `chi_s(alpha) = <s| D(alpha) |s>`.
pub fn state_char_fn(s: &ModeState, alpha: C64) -> C64 {
    let g = (-0.5 * alpha.norm_sqr()).exp();
    match s {
        ModeState::Fock(n) => C64::new(g * laguerre(*n, 0.0, alpha.norm_sqr()), 0.0),
        ModeState::Coherent(b) => (alpha * b.conj() - alpha.conj() * b).exp() * g,
        ModeState::SqueezedVacuum { r, phi } => {
            let gamma = alpha * r.cosh() + alpha.conj() * C64::from_polar(r.sinh(), *phi);
            C64::new((-0.5 * gamma.norm_sqr()).exp(), 0.0)
        }
        ModeState::Superposition(c) => {
            let mut acc = C64::new(0.0, 0.0);
            for (m, cm) in c.iter().enumerate() {
                if cm.norm_sqr() == 0.0 {
                    continue;
                }
                for (n, cn) in c.iter().enumerate() {
                    if cn.norm_sqr() == 0.0 {
                        continue;
                    }
                    acc += cm.conj() * cn * displaced_fock_element(m, n, alpha);
                }
            }
            acc
        }
    }
}

/// Precomputed exact sampler for the Husimi density `|<alpha|s>|^2 / pi`.
#[derive(Clone, Debug)]
pub struct HusimiSampler {
    state: ModeState,
    kernel: OverlapKernel,
    kind: SamplerKind,
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Fock(Radial),
    Coherent(C64),
    Squeezed { x: Normal<f64>, y: Normal<f64>, rot: C64 },
    /// Mixture of Fock Husimi envelopes, accepted against the true density.
    Superposition { levels: Vec<(usize, Radial)>, cdf: Vec<f64>, bound: f64 },
}

impl HusimiSampler {
    pub fn new(state: &ModeState) -> Result<Self> {
        state.validate()?;
        let kind = match state {
            ModeState::Fock(n) => SamplerKind::Fock(gamma(*n)),
            ModeState::Coherent(b) => SamplerKind::Coherent(*b),
            ModeState::SqueezedVacuum { r, phi } => {
                let t = r.tanh();
                SamplerKind::Squeezed {
                    x: Normal::new(0.0, (0.5 / (1.0 + t)).sqrt()).expect("finite"),
                    y: Normal::new(0.0, (0.5 / (1.0 - t)).sqrt()).expect("finite"),
                    rot: C64::from_polar(1.0, 0.5 * phi),
                }
            }
            ModeState::Superposition(c) => {
                let mut levels = Vec::new();
                let mut cdf = Vec::new();
                let mut acc = 0.0;
                for (n, cn) in c.iter().enumerate() {
                    let w = cn.norm_sqr();
                    if w > 0.0 {
                        acc += w;
                        levels.push((n, gamma(n)));
                        cdf.push(acc);
                    }
                }
                let bound = levels.len() as f64;
                SamplerKind::Superposition { levels, cdf, bound }
            }
        };
        Ok(Self { state: state.clone(), kernel: OverlapKernel::new(state), kind })
    }

    pub fn state(&self) -> &ModeState {
        &self.state
    }

    pub fn kernel(&self) -> &OverlapKernel {
        &self.kernel
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, counters: &mut Counters) -> Result<C64> {
        match &self.kind {
            SamplerKind::Fock(g) => Ok(radial_draw(g, rng)),
            SamplerKind::Coherent(b) => {
                let n = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("finite");
                Ok(b + C64::new(n.sample(rng), n.sample(rng)))
            }
            SamplerKind::Squeezed { x, y, rot } => Ok(rot * C64::new(x.sample(rng), y.sample(rng))),
            SamplerKind::Superposition { levels, cdf, bound } => {
                let ModeState::Superposition(c) = &self.state else { unreachable!() };
                let total = cdf[cdf.len() - 1];
                for _ in 0..REJECTION_CAP {
                    let u = rng.random::<f64>() * total;
                    let idx = cdf.iter().position(|&x| u < x).unwrap_or(levels.len() - 1);
                    let alpha = radial_draw(&levels[idx].1, rng);
                    counters.proposals += 1;
                    // Both densities share the factor e^{-|alpha|^2}/pi.
                    let target = self.kernel.eval(alpha).norm_sqr();
                    let envelope: f64 =
                        levels.iter().map(|(n, _)| c[*n].norm_sqr() * fock_reduced(*n, alpha).norm_sqr()).sum();
                    if rng.random::<f64>() * bound * envelope < target {
                        counters.accepted += 1;
                        return Ok(alpha);
                    }
                }
                Err(Error::Sampling("Husimi rejection sampler exceeded the iteration cap".into()))
            }
        }
    }
}

/// Radial law of the Fock-`n` Husimi density: `|alpha|^2 ~ Gamma(n + 1, 1)`.
#[derive(Clone, Debug)]
struct Radial {
    shape: usize,
    gamma: Gamma<f64>,
}

fn gamma(n: usize) -> Radial {
    Radial { shape: n + 1, gamma: Gamma::new((n + 1) as f64, 1.0).expect("positive shape") }
}

fn radial_draw<R: Rng + ?Sized>(g: &Radial, rng: &mut R) -> C64 {
    let s = if g.shape <= 8 {
        // Gamma(k, 1) for integer k is a sum of k unit exponentials.
        let mut prod = 1.0;
        for _ in 0..g.shape {
            prod *= 1.0 - rng.random::<f64>();
        }
        -prod.ln()
    } else {
        g.gamma.sample(rng)
    };
    s.sqrt() * unit_phase(rng)
}

/// Uniform point on the unit circle, by rejection from the square.
fn unit_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    loop {
        let x = 2.0 * rng.random::<f64>() - 1.0;
        let y = 2.0 * rng.random::<f64>() - 1.0;
        let n = x * x + y * y;
        if n <= 1.0 && n > 1e-12 {
            let inv = 1.0 / n.sqrt();
            return C64::new(x * inv, y * inv);
        }
    }
}

/// One draw from the Husimi density of `s`.
pub fn sample_husimi<R: Rng + ?Sized>(s: &ModeState, rng: &mut R) -> Result<C64> {
    HusimiSampler::new(s)?.sample(rng, &mut Counters::default())
}

/// Fock coefficients of the squeezed vacuum `S(r e^{i phi})|0>` up to `cutoff`.
pub fn squeezed_vacuum_coefficients(r: f64, phi: f64, cutoff: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); cutoff + 1];
    let step = -C64::from_polar(r.tanh(), phi);
    let mut amp = C64::new(1.0 / r.cosh().sqrt(), 0.0);
    out[0] = amp;
    let mut k = 1;
    while 2 * k <= cutoff {
        amp *= step * ((2 * k - 1) as f64 / (2 * k) as f64).sqrt();
        out[2 * k] = amp;
        k += 1;
    }
    out
}

/// `S(r e^{i phi}) |n>` as a finite superposition whose discarded
/// probability mass is at most `tail_mass`.
pub fn truncate_squeezed_fock(r: f64, phi: f64, n: usize, tail_mass: f64) -> Result<ModeState> {
    truncate_squeezed_fock_capped(r, phi, n, tail_mass, TRUNCATION_CAP)
}

pub fn truncate_squeezed_fock_capped(r: f64, phi: f64, n: usize, tail_mass: f64, cap: usize) -> Result<ModeState> {
    if !(tail_mass > 0.0 && tail_mass < 1.0) {
        return Err(Error::InvalidState(format!("tail mass {tail_mass} outside (0, 1)")));
    }
    ModeState::SqueezedVacuum { r, phi }.validate()?;

    // S a^dag S^dag = a^dag cosh r + a e^{-i phi} sinh r, applied n times to S|0>.
    let work = cap + n + 2;
    let mut psi = squeezed_vacuum_coefficients(r, phi, work);
    let (ch, sh) = (r.cosh(), C64::from_polar(r.sinh(), -phi));
    for j in 1..=n {
        let valid = psi.len() - 1;
        let mut next = vec![C64::new(0.0, 0.0); valid];
        for (m, slot) in next.iter_mut().enumerate() {
            let raise = if m > 0 { psi[m - 1] * ch * (m as f64).sqrt() } else { C64::new(0.0, 0.0) };
            let lower = psi[m + 1] * sh * ((m + 1) as f64).sqrt();
            *slot = (raise + lower) / (j as f64).sqrt();
        }
        psi = next;
    }

    let mut kept = 0.0;
    for (d, z) in psi.iter().enumerate().take(cap + 1) {
        kept += z.norm_sqr();
        if 1.0 - kept <= tail_mass {
            let norm = kept.sqrt();
            return Ok(ModeState::Superposition(psi[..=d].iter().map(|z| z / norm).collect()));
        }
    }
    Err(Error::Truncation(format!(
        "squeezed Fock state r={r}, n={n} needs a cutoff above {cap} for tail mass {tail_mass}"
    )))
}

/// Fock coefficients of `s` up to `cutoff`, with the discarded probability mass.
pub fn fock_expansion(s: &ModeState, cutoff: usize) -> Result<(Vec<C64>, f64)> {
    s.validate()?;
    let coeffs = match s {
        ModeState::Fock(n) => {
            if *n > cutoff {
                return Err(Error::Truncation(format!("Fock state |{n}> exceeds cutoff {cutoff}")));
            }
            let mut v = vec![C64::new(0.0, 0.0); n + 1];
            v[*n] = C64::new(1.0, 0.0);
            return Ok((v, 0.0));
        }
        ModeState::Coherent(b) => {
            let mut v = Vec::with_capacity(cutoff + 1);
            let mut amp = C64::new((-0.5 * b.norm_sqr()).exp(), 0.0);
            v.push(amp);
            for n in 1..=cutoff {
                amp *= b / (n as f64).sqrt();
                v.push(amp);
            }
            v
        }
        ModeState::SqueezedVacuum { r, phi } => squeezed_vacuum_coefficients(*r, *phi, cutoff),
        ModeState::Superposition(c) => c.iter().take(cutoff + 1).copied().collect(),
    };
    let kept: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
    Ok((coeffs, (1.0 - kept).max(0.0)))
}

/// Tensor product of single-mode states.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    modes: Vec<ModeState>,
}

impl ProductState {
    pub fn new(modes: Vec<ModeState>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidState("product state needs at least one mode".into()));
        }
        for (k, m) in modes.iter().enumerate() {
            m.validate().map_err(|e| Error::InvalidState(format!("mode {k}: {e}")))?;
        }
        Ok(Self { modes })
    }

    pub fn fock(pattern: &[usize]) -> Result<Self> {
        Self::new(pattern.iter().map(|&n| ModeState::Fock(n)).collect())
    }

    pub fn vacuum(m: usize) -> Result<Self> {
        Self::fock(&vec![0; m])
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeState] {
        &self.modes
    }
}
