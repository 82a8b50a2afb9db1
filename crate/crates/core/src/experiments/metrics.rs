//! Recovery metrics and polyhedron distance diagnostics.

use serde::{Deserialize, Serialize};

use crate::bounds::min_samples_dimension;
use crate::error::{Error, Result};
use crate::mle::LikelihoodModel;
use crate::model::{LiftedMatrix, SensingEnsemble};
use crate::normal::norm_cdf;

fn check_shape(a: &LiftedMatrix, b: &LiftedMatrix) -> Result<()> {
    if a.coords().len() != b.coords().len() {
        return Err(Error::DimensionMismatch { expected: a.coords().len(), got: b.coords().len() });
    }
    Ok(())
}

/// `||X* - X||_F^2 / ||X*||_F^2`.
pub fn nmse(truth: &LiftedMatrix, est: &LiftedMatrix) -> Result<f64> {
    check_shape(truth, est)?;
    let den = truth.frobenius_norm().powi(2);
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num: f64 = truth.coords().iter().zip(est.coords()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(num / den)
}

/// Mean squared spectral-radius error over trials `(X*, X)`.
pub fn mse_spectral(trials: &[(LiftedMatrix, LiftedMatrix)]) -> Result<f64> {
    let radii: Vec<(f64, f64)> = trials
        .iter()
        .map(|(t, e)| check_shape(t, e).map(|_| (t.eig().spectral_radius(), e.eig().spectral_radius())))
        .collect::<Result<_>>()?;
    mse_spectral_from_radii(&radii)
}

pub fn mse_spectral_from_radii(radii: &[(f64, f64)]) -> Result<f64> {
    if radii.is_empty() {
        return Err(Error::InvalidConfig("spectral MSE needs at least one trial".into()));
    }
    Ok(radii.iter().map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / radii.len() as f64)
}

/// Squared Hellinger distance between Bernoulli(p) and Bernoulli(q); in `[0, 2]`.
pub fn hellinger_sq(p: f64, q: f64) -> f64 {
    let a = p.sqrt() - q.sqrt();
    let b = (1.0 - p).max(0.0).sqrt() - (1.0 - q).max(0.0).sqrt();
    a * a + b * b
}

/// Row-averaged squared Hellinger distance between `Phi(mu_j - lambda_j)`
/// and `Phi(mu_hat_j - lambda_j)`, with `Phi` the standard normal CDF. The
/// noise level does not enter, so values are comparable across sigma.
pub fn hellinger(model: &LikelihoodModel<'_>, truth: &LiftedMatrix, est: &LiftedMatrix) -> Result<f64> {
    check_shape(truth, est)?;
    let mu = model.ensemble().apply(truth.coords());
    let mu_hat = model.ensemble().apply(est.coords());
    let total: f64 = mu
        .iter()
        .zip(&mu_hat)
        .zip(model.thresholds())
        .map(|((a, b), lam)| hellinger_sq(norm_cdf(a - lam), norm_cdf(b - lam)))
        .sum();
    Ok(total / mu.len() as f64)
}

/// Mean `|l_i|` over the non-dominant eigenvalues.
pub fn eigen_profile(est: &LiftedMatrix) -> f64 {
    est.eig().mean_non_dominant()
}

/// `(1/m) sum_j mu_j^2 / sigma^2`.
pub fn snr(mu: &[f64], sigma: f64) -> f64 {
    mu.iter().map(|v| v * v).sum::<f64>() / mu.len().max(1) as f64 / (sigma * sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceDiagnostics {
    /// Mean of `H_j = |Tr(V_j (X - X*))|` over all rows.
    pub t_ave: f64,
    /// Mean of `H_j` over the `k` rows whose hyperplanes pass closest to `X*`.
    pub energy: f64,
    pub k: usize,
}

/// `offsets[j]` is the hyperplane offset of row `j` (`tau_j^2`, or `lambda_j`
/// for the noisy model). The closest-row subset has `min(m, (n^2+n)/2 + 1)`
/// members; ties keep the lower row index.
pub fn distance_diagnostics(
    ensemble: &SensingEnsemble,
    offsets: &[f64],
    truth: &LiftedMatrix,
    est: &LiftedMatrix,
) -> Result<DistanceDiagnostics> {
    check_shape(truth, est)?;
    let m = ensemble.m();
    if offsets.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: offsets.len() });
    }
    if m == 0 {
        return Err(Error::EmptySystem);
    }
    let at_truth = ensemble.apply(truth.coords());
    let diff: Vec<f64> = est.coords().iter().zip(truth.coords()).map(|(a, b)| a - b).collect();
    let h: Vec<f64> = ensemble.apply(&diff).into_iter().map(f64::abs).collect();
    let t_ave = h.iter().sum::<f64>() / m as f64;

    let k = min_samples_dimension(ensemble.n()).min(m);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        let sa = (at_truth[a] - offsets[a]).abs();
        let sb = (at_truth[b] - offsets[b]).abs();
        sa.total_cmp(&sb).then(a.cmp(&b))
    });
    let energy = order[..k].iter().map(|&j| h[j]).sum::<f64>() / k as f64;
    Ok(DistanceDiagnostics { t_ave, energy, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{embed, HermitianMatrix, SignalModel};
    use crate::sampling::{gen_instance, OneBitRecord, Sign};

    #[test]
    fn nmse_extremes() {
        let (x, _) = gen_instance(4, 1, SignalModel::Complex, 1).unwrap();
        let t = x.lifted();
        assert_eq!(nmse(&t, &t).unwrap(), 0.0);
        let z = LiftedMatrix::zeros(4, SignalModel::Complex);
        assert!((nmse(&t, &z).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(nmse(&z, &t), Err(Error::ZeroReference)));
    }

    #[test]
    fn spectral_mse_examples() {
        let five = embed(&HermitianMatrix::from_real_diag(&[5.0, 0.0]), SignalModel::Real).unwrap();
        let four = embed(&HermitianMatrix::from_real_diag(&[4.0, 1.0]), SignalModel::Real).unwrap();
        assert!((mse_spectral(&[(five.clone(), four)]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(mse_spectral(&[(five.clone(), five)]).unwrap(), 0.0);
        assert!(mse_spectral(&[]).is_err());
    }

    #[test]
    fn spectral_mse_matches_eigenvalue_recomputation() {
        let trials: Vec<_> = (0..4)
            .map(|s| {
                let (x, _) = gen_instance(5, 1, SignalModel::Real, s).unwrap();
                let (y, _) = gen_instance(5, 1, SignalModel::Real, s + 10).unwrap();
                (x.lifted(), y.lifted())
            })
            .collect();
        // rank one: the spectral radius is ||x||^2
        let want = trials
            .iter()
            .map(|(a, b)| (a.trace() - b.trace()).powi(2))
            .sum::<f64>()
            / 4.0;
        assert!((mse_spectral(&trials).unwrap() - want).abs() < 1e-9 * want);
    }

    #[test]
    fn hellinger_extremes() {
        assert_eq!(hellinger_sq(0.3, 0.3), 0.0);
        assert!((hellinger_sq(0.0, 1.0) - 2.0).abs() < 1e-15);
        for &(p, q) in &[(0.1, 0.9), (0.5, 0.2), (1e-9, 0.4)] {
            let h = hellinger_sq(p, q);
            assert!((0.0..=2.0).contains(&h));
            assert!((h - hellinger_sq(q, p)).abs() < 1e-15);
        }
    }

    #[test]
    fn hellinger_zero_at_truth() {
        let (x, ens) = gen_instance(3, 50, SignalModel::Real, 2).unwrap();
        let recs: Vec<_> = (0..50)
            .map(|j| OneBitRecord { sign: Sign::Plus, threshold: j as f64 * 0.1, hidden_magnitude: None })
            .collect();
        let lm = LikelihoodModel::new(&recs, &ens, 0.5).unwrap();
        assert_eq!(hellinger(&lm, &x.lifted(), &x.lifted()).unwrap(), 0.0);
        let h = hellinger(&lm, &x.lifted(), &LiftedMatrix::zeros(3, SignalModel::Real)).unwrap();
        assert!(h > 0.0 && h <= 2.0);
        let other = LikelihoodModel::new(&recs, &ens, 2.0).unwrap();
        assert_eq!(h, hellinger(&other, &x.lifted(), &LiftedMatrix::zeros(3, SignalModel::Real)).unwrap());
    }

    #[test]
    fn snr_example() {
        assert!((snr(&[1.0, 3.0], 0.5) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_vanish_at_truth() {
        let (x, ens) = gen_instance(3, 40, SignalModel::Real, 3).unwrap();
        let offsets = vec![1.0; 40];
        let d = distance_diagnostics(&ens, &offsets, &x.lifted(), &x.lifted()).unwrap();
        assert_eq!((d.t_ave, d.energy, d.k), (0.0, 0.0, 7));
        let z = LiftedMatrix::zeros(3, SignalModel::Real);
        let d = distance_diagnostics(&ens, &offsets, &x.lifted(), &z).unwrap();
        let mean_mu = ens.apply(x.lifted().coords()).iter().sum::<f64>() / 40.0;
        assert!((d.t_ave - mean_mu).abs() < 1e-12);
    }
}
