//! Sample-size calculators and the exponential penalty-tail fit.
//!
//! The recovery error after `i` Kaczmarz steps is modelled as
//! `q^i * w0 + eps0 * exp(-gamma1 * m)`, where `w0 = ||X_0 - X*||_F^2`. Asking
//! for a target `eps1` gives `m >= ln(eps0 / (eps1 - q^i w0)) / gamma1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kaczmarz::linear_fit;

/// `(n^2 + n)/2 + 1`: fewest half-spaces that can enclose a finite volume in
/// the `(n^2 + n)/2`-dimensional PSD cone.
pub fn min_samples_dimension(n: usize) -> usize {
    (n * n + n) / 2 + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub eps0: f64,
    pub gamma1: f64,
    pub m_fit_start: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
}

/// First index from which `curve` is strictly decreasing to the end.
fn decaying_tail_start(curve: &[(f64, f64)]) -> usize {
    let mut start = curve.len().saturating_sub(1);
    while start > 0 && curve[start - 1].1 > curve[start].1 {
        start -= 1;
    }
    start
}

/// Fits `error(m) - q^i w0 ~ eps0 exp(-gamma1 m)` on the decaying tail of
/// `curve` (pairs `(m, mean error)`, sorted by `m`). When `m_fit_start` is
/// `None` the tail starts at the first point after which the curve is
/// strictly decreasing.
pub fn fit_penalty_tail(curve: &[(f64, f64)], q: f64, iters: u32, omega0: f64, m_fit_start: Option<f64>) -> Result<TailFit> {
    let floor = q.powi(iters as i32) * omega0;
    let start = match m_fit_start {
        Some(m0) => curve.iter().position(|p| p.0 >= m0).unwrap_or(curve.len()),
        None => decaying_tail_start(curve),
    };
    let pts: Vec<(f64, f64)> = curve[start..]
        .iter()
        .filter(|p| p.1 - floor > 0.0)
        .map(|p| (p.0, (p.1 - floor).ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::TailNotDecaying(format!("{} usable tail points, need 3", pts.len())));
    }
    let (slope, intercept, _) = linear_fit(&pts).ok_or_else(|| Error::TailNotDecaying("degenerate abscissae".into()))?;
    let gamma1 = -slope;
    if !(gamma1 > 0.0) {
        return Err(Error::TailNotDecaying(format!("fitted gamma1 = {gamma1:e}")));
    }
    let residual = (pts.iter().map(|&(m, l)| (l - (intercept + slope * m)).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    Ok(TailFit { eps0: intercept.exp(), gamma1, m_fit_start: curve[start].0, residual })
}

/// Smallest `m` meeting `eps1` after `iters` steps at contraction `q` from
/// initial squared error `omega0`.
pub fn min_samples_theorem2(eps0: f64, gamma1: f64, eps1: f64, q: f64, iters: u32, omega0: f64) -> Result<f64> {
    let floor = q.powi(iters as i32) * omega0;
    if !(eps1 > floor) {
        return Err(Error::InfeasibleTarget { eps1, floor });
    }
    if !(gamma1 > 0.0) || !(eps0 > 0.0) {
        return Err(Error::InvalidConfig(format!("need eps0 > 0 and gamma1 > 0, got {eps0}, {gamma1}")));
    }
    Ok((eps0 / (eps1 - floor)).ln() / gamma1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_bound() {
        assert_eq!(min_samples_dimension(1), 2);
        assert_eq!(min_samples_dimension(2), 4);
        assert_eq!(min_samples_dimension(10), 56);
    }

    #[test]
    fn theorem2_examples() {
        let m = min_samples_theorem2(1.0, 0.001, 0.01, 0.5, 10_000, 0.0).unwrap();
        assert!((m - 1000.0 * 100.0_f64.ln()).abs() < 1e-9);
        assert!((m - 4605.17).abs() < 0.01);
        // eps1 - floor = eps0
        let m = min_samples_theorem2(0.5, 0.01, 0.75, 0.5, 1, 0.5).unwrap();
        assert!(m.abs() < 1e-12);
        assert!(matches!(
            min_samples_theorem2(1.0, 0.01, 0.25, 0.5, 1, 0.5),
            Err(Error::InfeasibleTarget { .. })
        ));
    }

    #[test]
    fn theorem2_monotone_on_grid() {
        let base = |eps0: f64, g: f64, e1: f64| min_samples_theorem2(eps0, g, e1, 0.9, 50, 1.0).unwrap();
        for k in 1..10 {
            let e1 = 0.01 * k as f64;
            assert!(base(1.0, 0.001, e1 + 0.01) < base(1.0, 0.001, e1));
            let e0 = 0.5 + 0.1 * k as f64;
            assert!(base(e0 + 0.1, 0.001, 0.05) > base(e0, 0.001, 0.05));
            let g = 0.001 * k as f64;
            assert!(base(1.0, g + 0.001, 0.05) < base(1.0, g, 0.05));
        }
    }

    #[test]
    fn recovers_synthetic_tail() {
        let curve: Vec<(f64, f64)> = (0..20).map(|k| {
            let m = 500.0 + 250.0 * k as f64;
            (m, 0.5 * (-0.001 * m).exp())
        }).collect();
        let fit = fit_penalty_tail(&curve, 0.0, 1, 0.0, None).unwrap();
        assert!((fit.eps0 - 0.5).abs() < 0.005);
        assert!((fit.gamma1 - 0.001).abs() < 1e-5);
        assert_eq!(fit.m_fit_start, 500.0);
    }

    #[test]
    fn floor_is_subtracted() {
        let floor = 0.01;
        let curve: Vec<(f64, f64)> = (0..10).map(|k| {
            let m = 1000.0 * (k + 1) as f64;
            (m, floor + 2.0 * (-0.0005 * m).exp())
        }).collect();
        let fit = fit_penalty_tail(&curve, 0.5, 1, 2.0 * floor, None).unwrap();
        assert!((fit.gamma1 - 0.0005).abs() < 1e-9);
    }

    #[test]
    fn constant_curve_is_rejected() {
        let curve: Vec<(f64, f64)> = (0..8).map(|k| (k as f64 * 100.0, 0.3)).collect();
        assert!(matches!(fit_penalty_tail(&curve, 0.0, 1, 0.0, None), Err(Error::TailNotDecaying(_))));
        assert!(matches!(fit_penalty_tail(&curve, 0.0, 1, 0.0, Some(0.0)), Err(Error::TailNotDecaying(_))));
    }

    #[test]
    fn tail_start_skips_rising_prefix() {
        let curve = vec![(1.0, 0.1), (2.0, 0.5), (3.0, 0.3), (4.0, 0.2), (5.0, 0.1)];
        assert_eq!(decaying_tail_start(&curve), 1);
    }
}
