//! Small special-function helpers shared by the phase-space code.

use std::sync::OnceLock;

const LN_FACTORIAL_TABLE: usize = 2048;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = 0.0;
        t.push(0.0);
        for k in 1..LN_FACTORIAL_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    let table = ln_factorial_table();
    if n < table.len() {
        return table[n];
    }
    let mut acc = table[table.len() - 1];
    for k in table.len()..=n {
        acc += (k as f64).ln();
    }
    acc
}

/// Generalized Laguerre polynomial `L_n^(k)(x)` by the three-term recurrence.
pub fn laguerre(n: usize, k: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * cur - (jf + k) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Power-series coefficients `c_j` of `L_n^(k)(s) = sum_j c_j s^j`.
pub fn laguerre_coefficients(n: usize, k: usize) -> Vec<f64> {
    // c_j = (-1)^j C(n + k, n - j) / j!
    (0..=n)
        .map(|j| {
            let ln_binom = ln_factorial(n + k) - ln_factorial(n - j) - ln_factorial(k + j);
            let mag = (ln_binom - ln_factorial(j)).exp();
            if j % 2 == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials() {
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-13);
        assert!((ln_factorial(3000) - (1..=3000).map(|k| (k as f64).ln()).sum::<f64>()).abs() < 1e-8);
    }

    #[test]
    fn laguerre_known_values() {
        assert_eq!(laguerre(0, 0.0, 3.0), 1.0);
        assert!((laguerre(1, 0.0, 1.0)).abs() < 1e-15);
        // L_2(x) = (x^2 - 4x + 2) / 2
        let x = 0.7;
        assert!((laguerre(2, 0.0, x) - (x * x - 4.0 * x + 2.0) / 2.0).abs() < 1e-14);
        // L_2^(1)(x) = (x^2 - 6x + 6) / 2
        assert!((laguerre(2, 1.0, x) - (x * x - 6.0 * x + 6.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn coefficients_agree_with_recurrence() {
        for n in 0..8 {
            for k in 0..5 {
                let c = laguerre_coefficients(n, k);
                for &x in &[0.0f64, 0.3, 1.7, 4.2] {
                    let series: f64 = c.iter().enumerate().map(|(j, cj)| cj * x.powi(j as i32)).sum();
                    let rec = laguerre(n, k as f64, x);
                    assert!((series - rec).abs() < 1e-10 * (1.0 + rec.abs()), "n={n} k={k} x={x}");
                }
            }
        }
    }
}
