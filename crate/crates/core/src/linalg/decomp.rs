use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `diag(R)` folded back into `Q`.
pub fn haar_random_unitary(m: usize, seed: u64) -> Result<ComplexMatrix> {
    if m == 0 {
        return Err(Error::Dimension("Haar unitary needs at least one mode".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g = DMatrix::<C64>::from_fn(m, m, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re * scale, im * scale)
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..m {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    Ok(ComplexMatrix::from_nalgebra(&q))
}

/// Autonne-Takagi factors `R = U diag(lambda) U^T`.
#[derive(Clone, Debug)]
pub struct TakagiFactors {
    pub unitary: ComplexMatrix,
    /// Nonnegative, descending.
    pub singular_values: Vec<f64>,
}

impl TakagiFactors {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.singular_values.len();
        let u = &self.unitary;
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| u[(i, k)] * self.singular_values[k] * u[(j, k)]).sum()
        })
    }

    pub fn max_singular_value(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }
}

/// Takagi factorization of a complex symmetric matrix.
///
/// Works on the real symmetric embedding `H = [[A, B], [B, -A]]` of
/// `R = A + iB`: an eigenpair `(s, [x; y])` of `H` with `s >= 0` gives
/// `R conj(u) = s u` for `u = x + iy`. Eigenvectors from distinct positive
/// eigenvalues are automatically orthonormal as complex vectors, and any
/// basis of a degenerate positive eigenspace works, so clusters need no
/// special treatment. Only the kernel, where `[x; y]` and `[-y; x]` are both
/// null vectors, is re-orthonormalized explicitly.
pub fn takagi(r: &ComplexMatrix, tol: f64) -> Result<TakagiFactors> {
    let n = r.require_square("Takagi input")?;
    let deviation = r.symmetry_deviation();
    if deviation > tol {
        return Err(Error::NotSymmetric { deviation });
    }
    if n == 0 {
        return Ok(TakagiFactors { unitary: ComplexMatrix::zeros(0, 0), singular_values: vec![] });
    }
    let sym = ComplexMatrix::from_fn(n, n, |i, j| (r[(i, j)] + r[(j, i)]) * 0.5);

    let h = DMatrix::<f64>::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        let z = sym[(ii, jj)];
        match (bi, bj) {
            (0, 0) => z.re,
            (1, 1) => -z.re,
            _ => z.im,
        }
    });
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let scale = sym.max_abs().max(f64::MIN_POSITIVE);
    let zero_window = 64.0 * f64::EPSILON * (2 * n) as f64 * scale;

    let column = |k: usize| -> Vec<C64> {
        (0..n).map(|i| C64::new(eig.eigenvectors[(i, k)], eig.eigenvectors[(i + n, k)])).collect()
    };

    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut values: Vec<f64> = Vec::with_capacity(n);
    for &k in order.iter().take(n) {
        let s = eig.eigenvalues[k];
        if s > zero_window {
            columns.push(column(k));
            values.push(s);
        }
    }

    // Kernel: complete the basis from the null eigenvectors of H, then from
    // the standard basis if round-off leaves the span short.
    let mut candidates: Vec<Vec<C64>> = order
        .iter()
        .filter(|&&k| eig.eigenvalues[k].abs() <= zero_window)
        .map(|&k| column(k))
        .collect();
    candidates.extend((0..n).map(|i| {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[i] = C64::new(1.0, 0.0);
        e
    }));
    for mut v in candidates {
        if columns.len() == n {
            break;
        }
        for _ in 0..2 {
            for q in &columns {
                let proj: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.5 {
            v.iter_mut().for_each(|z| *z /= norm);
            columns.push(v);
            values.push(0.0);
        }
    }
    if columns.len() != n {
        return Err(Error::Decomposition { residual: f64::INFINITY });
    }

    let unitary = ComplexMatrix::from_fn(n, n, |i, j| columns[j][i]);
    let factors = TakagiFactors { unitary, singular_values: values };
    let residual = factors.reconstruct().max_abs_diff(r);
    if !(residual <= 10.0 * tol) {
        return Err(Error::Decomposition { residual });
    }
    Ok(factors)
}
