use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_PERMANENT: usize = 20;
pub const DEFAULT_MAX_HAFNIAN: usize = 16;

/// Exact permanent with the default size cap.
pub fn permanent_exact(a: &ComplexMatrix) -> Result<C64> {
    permanent_exact_capped(a, DEFAULT_MAX_PERMANENT)
}

/// Glynn's formula walked in Gray-code order, so each step updates the
/// column sums in O(n): `O(2^(n-1) n)` overall.
pub fn permanent_exact_capped(a: &ComplexMatrix, max_n: usize) -> Result<C64> {
    let n = a.require_square("permanent input")?;
    if n > max_n {
        return Err(Error::Size { what: "permanent", size: n, max: max_n });
    }
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let mut sums: Vec<C64> = (0..n).map(|j| (0..n).map(|i| a[(i, j)]).sum()).collect();
    let mut delta = vec![1.0f64; n];
    let mut sign = 1.0;
    let mut total = sums.iter().product::<C64>();
    let steps: u64 = 1u64 << (n - 1);
    for g in 1..steps {
        let row = g.trailing_zeros() as usize + 1;
        delta[row] = -delta[row];
        let factor = 2.0 * delta[row];
        for (j, s) in sums.iter_mut().enumerate() {
            *s += a[(row, j)] * factor;
        }
        sign = -sign;
        total += sums.iter().product::<C64>() * sign;
    }
    Ok(total / steps as f64)
}

/// Exact hafnian with the default size cap.
pub fn hafnian_exact(r: &ComplexMatrix) -> Result<C64> {
    hafnian_exact_capped(r, DEFAULT_MAX_HAFNIAN)
}

/// Sum over perfect matchings, memoized over vertex subsets: the lowest
/// remaining vertex is matched with every other remaining vertex. Diagonal
/// entries never enter. Odd dimension gives exactly zero.
pub fn hafnian_exact_capped(r: &ComplexMatrix, max_n: usize) -> Result<C64> {
    let n = r.require_square("hafnian input")?;
    if n > max_n {
        return Err(Error::Size { what: "hafnian", size: n, max: max_n });
    }
    if n % 2 == 1 {
        return Ok(C64::new(0.0, 0.0));
    }
    let full = (1usize << n) - 1;
    let mut memo = vec![C64::new(0.0, 0.0); 1 << n];
    memo[0] = C64::new(1.0, 0.0);
    for mask in 1..=full {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut acc = C64::new(0.0, 0.0);
        let mut bits = rest;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            acc += r[(i, j)] * memo[rest & !(1 << j)];
        }
        memo[mask] = acc;
    }
    Ok(memo[full])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn permanent_two_by_two() {
        let (a, b, cc, d) = (C64::new(1.0, 2.0), c(3.0), C64::new(0.0, -1.0), c(0.5));
        let m = ComplexMatrix::new(2, 2, vec![a, b, cc, d]).unwrap();
        let p = permanent_exact(&m).unwrap();
        assert!((p - (a * d + b * cc)).norm() < 1e-14);
    }

    #[test]
    fn permanent_of_all_ones_is_factorial() {
        let m = ComplexMatrix::from_fn(3, 3, |_, _| c(1.0));
        assert!((permanent_exact(&m).unwrap() - 6.0).norm() < 1e-12);
        let m = ComplexMatrix::from_fn(6, 6, |_, _| c(1.0));
        assert!((permanent_exact(&m).unwrap() - 720.0).norm() < 1e-9);
    }

    #[test]
    fn permanent_of_identity_is_one() {
        for n in 1..8 {
            assert!((permanent_exact(&ComplexMatrix::identity(n)).unwrap() - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn permanent_size_cap() {
        let m = ComplexMatrix::identity(4);
        assert!(matches!(permanent_exact_capped(&m, 3), Err(Error::Size { .. })));
    }

    #[test]
    fn hafnian_small_cases() {
        let m = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((hafnian_exact(&m).unwrap() - 1.0).norm() < 1e-15);
        let m = ComplexMatrix::from_real_rows(&[vec![7.0, 2.5], vec![2.5, -3.0]]).unwrap();
        assert!((hafnian_exact(&m).unwrap() - 2.5).norm() < 1e-15);
        let m = ComplexMatrix::from_fn(4, 4, |_, _| c(0.2));
        assert!((hafnian_exact(&m).unwrap() - 0.12).norm() < 1e-14);
        let odd = ComplexMatrix::from_fn(3, 3, |_, _| c(1.0));
        assert_eq!(hafnian_exact(&odd).unwrap(), c(0.0));
        assert_eq!(hafnian_exact(&ComplexMatrix::zeros(0, 0)).unwrap(), c(1.0));
    }

    #[test]
    fn hafnian_of_all_ones_counts_matchings() {
        // (n-1)!! perfect matchings of K_n.
        let m = ComplexMatrix::from_fn(8, 8, |_, _| c(1.0));
        assert!((hafnian_exact(&m).unwrap() - 105.0).norm() < 1e-10);
    }
}
