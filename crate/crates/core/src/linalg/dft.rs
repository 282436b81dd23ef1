use rustfft::FftPlanner;

use super::matrix::C64;
use crate::error::{Error, Result};

/// `out[w] = (1/L) sum_k exp(-2 pi i k w / L) values[k]`.
pub fn inverse_dft(values: &[C64]) -> Result<Vec<C64>> {
    let len = values.len();
    if len == 0 {
        return Err(Error::Dimension("empty input to inverse DFT".into()));
    }
    let mut buf = values.to_vec();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let inv = 1.0 / len as f64;
    buf.iter_mut().for_each(|z| *z *= inv);
    Ok(buf)
}

/// `out[k] = sum_w exp(2 pi i k w / L) values[w]`, the inverse of [`inverse_dft`].
pub fn forward_dft(values: &[C64]) -> Result<Vec<C64>> {
    let len = values.len();
    if len == 0 {
        return Err(Error::Dimension("empty input to forward DFT".into()));
    }
    let mut buf = values.to_vec();
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn constant_maps_to_delta() {
        let out = inverse_dft(&[c(1.0, 0.0); 4]).unwrap();
        assert!((out[0] - 1.0).norm() < 1e-15);
        assert!(out[1..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn delta_maps_to_flat() {
        let out = inverse_dft(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(out.iter().all(|z| (z - 0.25).norm() < 1e-15));
    }

    #[test]
    fn matches_direct_sum() {
        let v = [c(0.3, -0.2), c(1.0, 0.5), c(-0.7, 0.1), c(0.0, 2.0), c(0.25, 0.25)];
        let l = v.len();
        let out = inverse_dft(&v).unwrap();
        for (w, o) in out.iter().enumerate() {
            let direct: C64 = v
                .iter()
                .enumerate()
                .map(|(k, x)| x * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (k * w) as f64 / l as f64))
                .sum::<C64>()
                / l as f64;
            assert!((o - direct).norm() < 1e-14);
        }
    }

    #[test]
    fn round_trip() {
        let v: Vec<C64> = (0..7).map(|i| c((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let back = inverse_dft(&forward_dft(&v).unwrap()).unwrap();
        let again = forward_dft(&inverse_dft(&v).unwrap()).unwrap();
        for i in 0..v.len() {
            assert!((back[i] - v[i]).norm() < 1e-12);
            assert!((again[i] - v[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn empty_is_rejected() {
        assert!(inverse_dft(&[]).is_err());
    }
}
