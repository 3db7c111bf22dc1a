//! Growth-rate slopes of ln(moment) against n.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::linear_fit;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub p: f64,
    /// Least-squares slope of ln value against n.
    pub slope: f64,
    /// Standard error of the slope from the regression residuals.
    pub stderr: f64,
    /// (ln v_{n2} - ln v_{n1}) / (n2 - n1).
    pub ratio_slope: f64,
    pub window: (usize, usize),
}

/// Last quarter of a horizon n_max: [n_max - n_max/4, n_max], at least two points.
pub fn default_window(n_max: usize) -> (usize, usize) {
    let start = n_max - n_max / 4;
    (start.min(n_max.saturating_sub(1)), n_max)
}

/// Fits ln(values[n]) for n in the inclusive `window`.
pub fn estimate_exponent(p: f64, values: &[f64], window: (usize, usize)) -> Result<ExponentEstimate> {
    let (n1, n2) = window;
    if n1 >= n2 || n2 >= values.len() {
        return Err(Error::Estimation(format!("window [{n1}, {n2}] is not inside a series of {} steps", values.len())));
    }
    if let Some(n) = (n1..=n2).find(|&n| !(values[n] > 0.0) || !values[n].is_finite()) {
        return Err(Error::Estimation(format!("value at n = {n} is {}, not positive; the window is unusable", values[n])));
    }
    let x: Vec<f64> = (n1..=n2).map(|n| n as f64).collect();
    let y: Vec<f64> = (n1..=n2).map(|n| values[n].ln()).collect();
    let (slope, _, stderr) = linear_fit(&x, &y);
    let ratio_slope = (y[y.len() - 1] - y[0]) / (n2 - n1) as f64;
    Ok(ExponentEstimate { p, slope, stderr, ratio_slope, window })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_series_slope() {
        let p = 3.0;
        let v: Vec<f64> = (0..=40).map(|n| 2f64.powf(n as f64 * p)).collect();
        let e = estimate_exponent(p, &v, default_window(40)).unwrap();
        assert!((e.slope - p * 2f64.ln()).abs() < 1e-12);
        assert!((e.ratio_slope - p * 2f64.ln()).abs() < 1e-12);
        assert!(e.stderr < 1e-12);
        assert_eq!(e.window, (30, 40));
    }

    #[test]
    fn constant_series_slope() {
        let e = estimate_exponent(2.0, &[5.0; 12], (0, 11)).unwrap();
        assert_eq!(e.slope, 0.0);
    }

    #[test]
    fn unusable_windows() {
        assert!(estimate_exponent(1.0, &[1.0, -1.0, 2.0], (0, 2)).is_err());
        assert!(estimate_exponent(1.0, &[1.0, 2.0], (1, 1)).is_err());
        assert!(estimate_exponent(1.0, &[1.0, 2.0], (0, 5)).is_err());
        assert_eq!(default_window(1), (0, 1));
    }
}
