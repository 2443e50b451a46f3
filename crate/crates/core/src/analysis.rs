//! Small statistics and fitting helpers for fidelity series.

use serde::{Deserialize, Serialize};

/// Mean and sample standard deviation; `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares `y ≈ intercept + slope·x`; needs two distinct `x`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Some(LinearFit { slope, intercept, slope_stderr, r_squared, points: n })
}

/// Fit of `F ≈ A·exp(−rate·n^power)` with the amplitude `A` held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub power: f64,
    pub rate: f64,
    pub points: usize,
}

/// Points `(n, F)` usable for a decay fit with amplitude `a`: `0 < F < a` and `n > 0`.
fn decay_points(points: &[(f64, f64)], a: f64) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter(|(n, f)| *n > 0.0 && *f > 0.0 && *f < a)
        .map(|&(n, f)| (n.ln(), (-(f / a).ln()).ln()))
        .collect()
}

/// Free-power fit: regression of `ln(−ln(F/A))` on `ln n`.
pub fn fit_decay_power(points: &[(f64, f64)], amplitude: f64) -> Option<DecayFit> {
    let pts = decay_points(points, amplitude);
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let fit = linear_regression(&x, &y)?;
    Some(DecayFit { power: fit.slope, rate: fit.intercept.exp(), points: fit.points })
}

/// Rate at fixed power: geometric mean of `−ln(F/A)/n^power` over the points.
pub fn fit_decay_rate(points: &[(f64, f64)], amplitude: f64, power: f64) -> Option<DecayFit> {
    let pts = decay_points(points, amplitude);
    if pts.is_empty() {
        return None;
    }
    let ln_rate = pts.iter().map(|(ln_n, y)| y - power * ln_n).sum::<f64>() / pts.len() as f64;
    Some(DecayFit { power, rate: ln_rate.exp(), points: pts.len() })
}

/// Exponential rate `−d ln F / dn` by regression of `ln F` on `n`.
pub fn fit_exponential_rate(points: &[(f64, f64)]) -> Option<LinearFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().filter(|(_, f)| *f > 0.0).map(|&(n, f)| (n, f.ln())).unzip();
    linear_regression(&x, &y).map(|fit| LinearFit { slope: -fit.slope, ..fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[]), None);
        assert_eq!(mean_std(&[2.0]), Some((2.0, 0.0)));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((m - 2.5).abs() < 1e-15);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn regression_recovers_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let fit = linear_regression(&x, &y).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(linear_regression(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn decay_fits_recover_parameters() {
        let a = 0.9;
        let pts: Vec<(f64, f64)> = (1..50).map(|k| {
            let n = 100.0 * k as f64;
            (n, a * (-2e-7 * n * n).exp())
        }).collect();
        let free = fit_decay_power(&pts, a).unwrap();
        assert!((free.power - 2.0).abs() < 1e-9);
        assert!((free.rate / 2e-7 - 1.0).abs() < 1e-7);
        let fixed = fit_decay_rate(&pts, a, 2.0).unwrap();
        assert!((fixed.rate / 2e-7 - 1.0).abs() < 1e-9);
        let exp_pts: Vec<(f64, f64)> = (0..20).map(|n| (n as f64, 0.5 * (-0.01 * n as f64).exp())).collect();
        assert!((fit_exponential_rate(&exp_pts).unwrap().slope - 0.01).abs() < 1e-12);
    }
}
