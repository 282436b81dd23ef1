//! Dense truncated-Fock oracles used only by unit tests.

use crate::linalg::{ComplexMatrix, C64};

/// Annihilation operator on `{|0>, ..., |dim-1>}`.
pub fn annihilation(dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) })
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.rows();
    let norm: f64 = (0..n).map(|i| a.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale(C64::new(0.5f64.powi(squarings as i32), 0.0));
    let mut result = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    for k in 1..30 {
        term = (&term * &scaled).scale(C64::new(1.0 / k as f64, 0.0));
        result = add(&result, &term);
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

pub fn add(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] + b[(i, j)])
}

/// `D(alpha) = exp(alpha a^dag - alpha^* a)` truncated to `dim` levels.
pub fn displacement(alpha: C64, dim: usize) -> ComplexMatrix {
    let a = annihilation(dim);
    let ad = a.adjoint();
    let gen = add(&ad.scale(alpha), &a.scale(-alpha.conj()));
    expm(&gen)
}

/// `S(xi) = exp((xi^* a^2 - xi a^dag^2) / 2)` truncated to `dim` levels.
pub fn squeeze(r: f64, phi: f64, dim: usize) -> ComplexMatrix {
    let xi = C64::from_polar(r, phi);
    let a = annihilation(dim);
    let a2 = &a * &a;
    let ad2 = a2.adjoint();
    let gen = add(&a2.scale(xi.conj() * 0.5), &ad2.scale(-xi * 0.5));
    expm(&gen)
}

pub fn trace(a: &ComplexMatrix) -> C64 {
    (0..a.rows()).map(|i| a[(i, i)]).sum()
}
