//! Cached 1D complex FFT plans shared by the meridian and box transforms.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type PlanKey = (usize, bool); // (length, inverse)
type PlanMap = HashMap<PlanKey, Arc<dyn Fft<f64>>>;

fn plan_cache() -> &'static Mutex<PlanMap> {
    static CACHE: OnceLock<Mutex<PlanMap>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = plan_cache().lock().expect("fft plan cache poisoned");
    cache
        .entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// In-place forward DFT (no scaling).
pub fn forward(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// In-place inverse DFT, scaled by 1/n so it inverts [`forward`].
pub fn inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    plan(n, true).process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Signed integer frequency for DFT bin `m` of an `n`-point transform:
/// 0, 1, ..., n/2, -(n/2 - 1), ..., -1.
pub fn signed_freq(m: usize, n: usize) -> i64 {
    debug_assert!(m < n);
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip() {
        let n = 16;
        let orig: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let mut buf = orig.clone();
        forward(&mut buf);
        inverse(&mut buf);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_in_one_bin() {
        let n = 32;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * 3.0 * j as f64 / n as f64;
                Complex64::new(th.cos(), 0.0)
            })
            .collect();
        forward(&mut buf);
        // cos(3θ) splits between bins 3 and n-3 with weight n/2 each.
        assert!((buf[3].re - n as f64 / 2.0).abs() < 1e-9);
        assert!((buf[n - 3].re - n as f64 / 2.0).abs() < 1e-9);
        let leak: f64 = (0..n)
            .filter(|&m| m != 3 && m != n - 3)
            .map(|m| buf[m].norm())
            .sum();
        assert!(leak < 1e-9);
    }

    #[test]
    fn signed_frequencies() {
        assert_eq!(signed_freq(0, 8), 0);
        assert_eq!(signed_freq(4, 8), 4);
        assert_eq!(signed_freq(5, 8), -3);
        assert_eq!(signed_freq(7, 8), -1);
    }
}
