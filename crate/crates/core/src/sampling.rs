//! Simulation of signals, sensing rows, thresholds and one-bit sign data.
//!
//! Every random quantity is drawn from its own ChaCha stream keyed by
//! `(seed, Stream)`, so changing one component (say, the noise level) never
//! perturbs another (the sensing rows).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SensingEnsemble, SignalModel, SignalVector};

/// Independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Signal = 1,
    Sensing = 2,
    Threshold = 3,
    Noise = 4,
    RowSampling = 5,
    Perturbation = 6,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Sign of a one-bit sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// `sgn` with `sgn(0) = +1`.
    pub fn of(v: f64) -> Sign {
        if v >= 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// One sign sample with its comparison threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneBitRecord {
    pub sign: Sign,
    pub threshold: f64,
    /// The value that was compared against the threshold. Only simulations
    /// populate it; solvers never read it.
    pub hidden_magnitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ThresholdSpec {
    /// `Lognormal(0, 1)`, strictly positive.
    Lognormal,
    /// `N(0, 1)`, used by the noisy model.
    Gaussian,
    Fixed(Vec<f64>),
    Adaptive(Vec<f64>),
}

impl ThresholdSpec {
    pub fn draw(&self, m: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = stream_rng(seed, Stream::Threshold);
        match self {
            ThresholdSpec::Lognormal => {
                let dist = LogNormal::new(0.0, 1.0).expect("valid lognormal");
                Ok((0..m).map(|_| dist.sample(&mut rng)).collect())
            }
            ThresholdSpec::Gaussian => Ok((0..m).map(|_| StandardNormal.sample(&mut rng)).collect()),
            ThresholdSpec::Fixed(v) | ThresholdSpec::Adaptive(v) => {
                if v.len() != m {
                    return Err(Error::DimensionMismatch { expected: m, got: v.len() });
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub enabled: bool,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { sigma: 0.0, enabled: false }
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::InvalidSigma(sigma));
        }
        Ok(Self { sigma, enabled: true })
    }
}

/// Ground-truth signal and `m` Gaussian sensing rows.
///
/// Real model: `x ~ N(0, I)`, `a_j ~ N(0, I)`. Complex model:
/// `x ~ N(0, I) + jN(0, I)` and `a_j ~ (N(0, I) + jN(0, I)) / sqrt(2)`.
pub fn gen_instance(n: usize, m: usize, model: SignalModel, seed: u64) -> Result<(SignalVector, SensingEnsemble)> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let x = gen_signal(n, model, seed)?;
    let ensemble = gen_sensing(n, m, model, seed)?;
    Ok((x, ensemble))
}

pub fn gen_signal(n: usize, model: SignalModel, seed: u64) -> Result<SignalVector> {
    let mut rng = stream_rng(seed, Stream::Signal);
    let entries = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = match model {
                SignalModel::Real => 0.0,
                SignalModel::Complex => StandardNormal.sample(&mut rng),
            };
            Complex64::new(re, im)
        })
        .collect();
    SignalVector::new(entries, model)
}

pub fn gen_sensing(n: usize, m: usize, model: SignalModel, seed: u64) -> Result<SensingEnsemble> {
    let mut rng = stream_rng(seed, Stream::Sensing);
    let scale = match model {
        SignalModel::Real => 1.0,
        SignalModel::Complex => std::f64::consts::FRAC_1_SQRT_2,
    };
    let rows = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    match model {
                        SignalModel::Real => Complex64::new(re, 0.0),
                        SignalModel::Complex => {
                            let im: f64 = StandardNormal.sample(&mut rng);
                            Complex64::new(re * scale, im * scale)
                        }
                    }
                })
                .collect()
        })
        .collect();
    SensingEnsemble::new(n, model, rows)
}

/// `y_j = |a_j^H x|`.
pub fn magnitudes(x: &SignalVector, ensemble: &SensingEnsemble) -> Result<Vec<f64>> {
    if x.n() != ensemble.n() {
        return Err(Error::DimensionMismatch { expected: ensemble.n(), got: x.n() });
    }
    Ok(ensemble
        .rows()
        .iter()
        .map(|a| {
            a.iter()
                .zip(x.entries())
                .map(|(ai, xi)| ai.conj() * xi)
                .sum::<Complex64>()
                .norm()
        })
        .collect())
}

/// Compares `values[j] + z_j` against `thresholds[j]`; `z_j = 0` when noise is
/// disabled.
///
/// Noiseless runs pass magnitudes `y_j` and require `tau_j >= 0` so that the
/// sign also orders `y_j^2` against `tau_j^2`. The noisy model passes
/// `mu_j = y_j^2` and any real threshold.
pub fn quantize(values: &[f64], thresholds: &[f64], noise: NoiseSpec, seed: u64) -> Result<Vec<OneBitRecord>> {
    if values.len() != thresholds.len() {
        return Err(Error::DimensionMismatch { expected: values.len(), got: thresholds.len() });
    }
    let noisy = noise.enabled && noise.sigma > 0.0;
    if !noisy {
        if let Some((row, &value)) = thresholds.iter().enumerate().find(|(_, &t)| !(t >= 0.0)) {
            return Err(Error::NegativeThreshold { row, value });
        }
    }
    let mut rng = stream_rng(seed, Stream::Noise);
    Ok(values
        .iter()
        .zip(thresholds)
        .map(|(&v, &t)| {
            let z: f64 = if noisy {
                noise.sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
            } else {
                0.0
            };
            let seen = v + z;
            OneBitRecord { sign: Sign::of(seen - t), threshold: t, hidden_magnitude: Some(seen) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{dot, HermitianMatrix};

    #[test]
    fn instances_are_reproducible() {
        let (x1, e1) = gen_instance(10, 100, SignalModel::Real, 7).unwrap();
        let (x2, e2) = gen_instance(10, 100, SignalModel::Real, 7).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(e1.lifted_rows(), e2.lifted_rows());
        let (x3, _) = gen_instance(10, 100, SignalModel::Real, 8).unwrap();
        assert_ne!(x1, x3);
    }

    #[test]
    fn signal_moments() {
        let x = gen_signal(100_000, SignalModel::Real, 1).unwrap();
        let n = x.n() as f64;
        let mean = x.entries().iter().map(|z| z.re).sum::<f64>() / n;
        let var = x.entries().iter().map(|z| (z.re - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "{mean}");
        assert!(var > 0.97 && var < 1.03, "{var}");
    }

    #[test]
    fn complex_signal_parts_unit_variance() {
        let x = gen_signal(100_000, SignalModel::Complex, 2).unwrap();
        let n = x.n() as f64;
        let vr = x.entries().iter().map(|z| z.re * z.re).sum::<f64>() / n;
        let vi = x.entries().iter().map(|z| z.im * z.im).sum::<f64>() / n;
        let cross = x.entries().iter().map(|z| z.re * z.im).sum::<f64>() / n;
        assert!((vr - 1.0).abs() < 0.03 && (vi - 1.0).abs() < 0.03);
        assert!(cross.abs() < 0.02);
    }

    #[test]
    fn lognormal_thresholds_positive() {
        let t = ThresholdSpec::Lognormal.draw(10_000, 3).unwrap();
        assert!(t.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn magnitude_examples() {
        let e1 = SignalVector::from_real(&[1.0, 0.0]).unwrap();
        let ens = SensingEnsemble::new(2, SignalModel::Real, vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]]).unwrap();
        assert_eq!(magnitudes(&e1, &ens).unwrap(), vec![1.0]);

        let x = SignalVector::from_real(&[1.0, 1.0]).unwrap();
        let ens = SensingEnsemble::new(2, SignalModel::Real, vec![vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]]).unwrap();
        assert_eq!(magnitudes(&x, &ens).unwrap(), vec![0.0]);

        let wrong = SignalVector::from_real(&[1.0]).unwrap();
        assert!(matches!(magnitudes(&wrong, &ens), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn squared_magnitudes_match_trace_oracle() {
        for model in [SignalModel::Real, SignalModel::Complex] {
            let (x, ens) = gen_instance(3, 20, model, 9).unwrap();
            let y = magnitudes(&x, &ens).unwrap();
            let big_x = HermitianMatrix::outer(x.entries());
            let lifted = x.lifted();
            for j in 0..ens.m() {
                let v = HermitianMatrix::outer(ens.row(j));
                let tr = v.trace_product(&big_x).re;
                assert!((y[j] * y[j] - tr).abs() < 1e-10);
                assert!((y[j] * y[j] - dot(ens.lifted_row(j), lifted.coords())).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quantize_examples() {
        let r = quantize(&[2.0, 0.5, 1.0], &[1.0, 1.0, 1.0], NoiseSpec::none(), 0).unwrap();
        assert_eq!(r[0].sign, Sign::Plus);
        assert_eq!(r[1].sign, Sign::Minus);
        // tie goes to +1
        assert_eq!(r[2].sign, Sign::Plus);
        assert!(matches!(
            quantize(&[1.0], &[-0.1], NoiseSpec::none(), 0),
            Err(Error::NegativeThreshold { row: 0, .. })
        ));
        // negative thresholds are fine once noise is on
        assert!(quantize(&[1.0], &[-0.1], NoiseSpec::gaussian(0.5).unwrap(), 0).is_ok());
    }

    #[test]
    fn noiseless_records_satisfy_squared_inequalities() {
        let (x, ens) = gen_instance(5, 500, SignalModel::Complex, 4).unwrap();
        let y = magnitudes(&x, &ens).unwrap();
        let tau = ThresholdSpec::Lognormal.draw(ens.m(), 4).unwrap();
        let recs = quantize(&y, &tau, NoiseSpec::none(), 4).unwrap();
        for (r, (&yj, &tj)) in recs.iter().zip(y.iter().zip(&tau)) {
            let s = r.sign.value();
            assert!(s * (yj - tj) >= 0.0);
            assert!(s * (yj * yj - tj * tj) >= 0.0);
            assert!(s * (r.hidden_magnitude.unwrap() - r.threshold) >= 0.0);
        }
    }

    #[test]
    fn noisy_sign_frequency_matches_gaussian_cdf() {
        let m = 100_000;
        let mu = 0.3;
        let lambda = 0.0;
        let sigma = 0.5;
        let recs = quantize(&vec![mu; m], &vec![lambda; m], NoiseSpec::gaussian(sigma).unwrap(), 12).unwrap();
        let p_hat = recs.iter().filter(|r| r.sign == Sign::Plus).count() as f64 / m as f64;
        let p = crate::normal::norm_cdf((mu - lambda) / sigma);
        let se = (p * (1.0 - p) / m as f64).sqrt();
        assert!((p_hat - p).abs() < 3.0 * se, "{p_hat} vs {p}");
    }
}
