//! Composite Simpson quadrature.

use crate::{Error, Result};

/// `∫_a^b f` by composite Simpson with `intervals` (even, ≥ 2) subintervals.
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, intervals: usize) -> Result<f64> {
    if intervals < 2 || !intervals.is_multiple_of(2) {
        return Err(Error::InvalidParameter(alloc::format!(
            "Simpson needs an even interval count ≥ 2, got {intervals}"
        )));
    }
    let h = (b - a) / intervals as f64;
    let mut acc = f(a) + f(b);
    for j in 1..intervals {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + j as f64 * h);
    }
    Ok(acc * h / 3.0)
}

/// Simpson weights for `intervals + 1` equally spaced nodes with spacing `h`.
/// Odd interval counts fall back to the trapezoid rule on the last interval.
pub fn simpson_weights(intervals: usize, h: f64) -> alloc::vec::Vec<f64> {
    let mut w = alloc::vec![0.0; intervals + 1];
    if intervals == 0 {
        return w;
    }
    let even = intervals - intervals % 2;
    for j in (0..even).step_by(2) {
        w[j] += h / 3.0;
        w[j + 1] += 4.0 * h / 3.0;
        w[j + 2] += h / 3.0;
    }
    if even < intervals {
        w[intervals - 1] += h / 2.0;
        w[intervals] += h / 2.0;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_cubics_exactly() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 2).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        assert!(simpson(|x| x, 0.0, 1.0, 3).is_err());
    }

    #[test]
    fn weights_match_rule() {
        let w = simpson_weights(4, 0.25);
        let v: f64 = w.iter().enumerate().map(|(j, w)| w * (0.25 * j as f64) * (0.25 * j as f64)).sum();
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
        let w = simpson_weights(3, 1.0);
        assert!((w.iter().sum::<f64>() - 3.0).abs() < 1e-14);
    }
}
