//! Sign data to lifted estimate: build the polyhedron, find a point in it with
//! randomized Kaczmarz, and optionally refine the thresholds adaptively.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bounds::min_samples_dimension;
use crate::error::{Error, Result};
use crate::kaczmarz::{solve, RkaConfig, RkaResult};
use crate::model::{LiftedMatrix, SensingEnsemble, SignalVector};
use crate::polyhedron::build_system;
use crate::sampling::{magnitudes, quantize, NoiseSpec, OneBitRecord};

/// Recovers `X` from one-bit records. Refuses systems with fewer rows than
/// the dimension bound.
pub fn recover(records: &[OneBitRecord], ensemble: &SensingEnsemble, cfg: &RkaConfig) -> Result<(LiftedMatrix, RkaResult)> {
    recover_from(records, ensemble, &LiftedMatrix::zeros(ensemble.n(), ensemble.model()), cfg)
}

/// As [`recover`], warm-started at `x0`.
pub fn recover_from(
    records: &[OneBitRecord],
    ensemble: &SensingEnsemble,
    x0: &LiftedMatrix,
    cfg: &RkaConfig,
) -> Result<(LiftedMatrix, RkaResult)> {
    if records.is_empty() {
        return Err(Error::EmptySystem);
    }
    let system = build_system(records, ensemble)?;
    if system.below_dimension_bound() {
        return Err(Error::BelowDimensionBound {
            n: ensemble.n(),
            m: system.len(),
            required: min_samples_dimension(ensemble.n()),
        });
    }
    let res = solve(&system, x0.coords(), cfg)?;
    let est = LiftedMatrix::from_coords(res.coords.clone(), ensemble.n(), ensemble.model())?;
    Ok((est, res))
}

/// Simulates noiseless one-bit acquisition of `x_truth` at `thresholds` and
/// recovers the lifted matrix.
pub fn run_opera(
    x_truth: &SignalVector,
    ensemble: &SensingEnsemble,
    thresholds: &[f64],
    cfg: &RkaConfig,
) -> Result<(LiftedMatrix, RkaResult)> {
    if ensemble.m() == 0 {
        return Err(Error::EmptySystem);
    }
    let y = magnitudes(x_truth, ensemble)?;
    let records = quantize(&y, thresholds, NoiseSpec::none(), 0)?;
    recover(&records, ensemble, cfg)
}

/// `sqrt(l_1) v_1`, phase-fixed so that the largest-magnitude entry (last
/// one on ties) is real and positive.
pub fn extract_signal(x: &LiftedMatrix) -> Result<SignalVector> {
    let eig = x.eig();
    let lead = eig.values[0];
    if !(lead > 0.0) {
        return Err(Error::NonPositiveLeadEigenvalue { value: lead });
    }
    let v = &eig.vectors[0];
    let max_abs = v.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let k = v
        .iter()
        .rposition(|z| z.norm() >= max_abs * (1.0 - 1e-12))
        .expect("nonempty eigenvector");
    let pivot = v[k];
    let phase = Complex64::new(pivot.re / pivot.norm(), pivot.im / pivot.norm()).conj();
    let scale = lead.sqrt();
    let mut entries: Vec<Complex64> = v.iter().map(|z| z * phase * scale).collect();
    entries[k] = Complex64::new(entries[k].norm(), 0.0);
    if x.model() == crate::model::SignalModel::Real {
        for z in &mut entries {
            z.im = 0.0;
        }
    }
    SignalVector::new(entries, x.model())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    /// Stop once `||tau^(k+1) - tau^(k)||_2 <= delta`.
    pub delta: f64,
    pub max_outer: usize,
    pub inner: RkaConfig,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self { delta: 1e-3, max_outer: 50, inner: RkaConfig::default() }
    }
}

/// Result of one threshold refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdUpdate {
    pub thresholds: Vec<f64>,
    /// `eps_j = r_j (Tr(V_j X) - tau_j^2)`.
    pub slacks: Vec<f64>,
    pub clamped: Vec<bool>,
}

impl ThresholdUpdate {
    pub fn clamped_count(&self) -> usize {
        self.clamped.iter().filter(|&&c| c).count()
    }
}

/// Moves every hyperplane half-way toward the current iterate:
/// `r_j tau_new^2 = r_j Tr(V_j X) - eps_j / 2`, with `tau_new^2` clamped at 0.
///
/// `lifted_values[j]` is `Tr(V_j X)` at the current iterate.
pub fn threshold_update(records: &[OneBitRecord], lifted_values: &[f64]) -> Result<ThresholdUpdate> {
    if records.len() != lifted_values.len() {
        return Err(Error::DimensionMismatch { expected: records.len(), got: lifted_values.len() });
    }
    let mut thresholds = Vec::with_capacity(records.len());
    let mut slacks = Vec::with_capacity(records.len());
    let mut clamped = Vec::with_capacity(records.len());
    for (rec, &v) in records.iter().zip(lifted_values) {
        let r = rec.sign.value();
        let tau_sq = rec.threshold * rec.threshold;
        let eps = r * (v - tau_sq);
        let new_sq = v - r * eps / 2.0;
        slacks.push(eps);
        clamped.push(new_sq < 0.0);
        thresholds.push(new_sq.max(0.0).sqrt());
    }
    Ok(ThresholdUpdate { thresholds, slacks, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterStep {
    pub k: usize,
    pub tau_change: f64,
    pub clamped: usize,
    pub rka_iterations: usize,
    pub rka_converged: bool,
    pub mean_slack: f64,
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub thresholds: Vec<f64>,
    pub estimate: LiftedMatrix,
    pub trace: Vec<OuterStep>,
    pub converged: bool,
    /// Set when more than half of the rows hit the `tau^2 >= 0` clamp in some
    /// outer iteration.
    pub clamping_dominates: bool,
    pub total_rka_iterations: usize,
}

/// Adaptive threshold refinement. Each outer pass solves the current
/// polyhedron (warm-started at the previous iterate), moves each threshold so
/// its hyperplane halves the slack at the iterate, and re-acquires the signs
/// of the same scene `x_truth` at the new thresholds.
pub fn adaptive_thresholds(
    x_truth: &SignalVector,
    ensemble: &SensingEnsemble,
    tau0: &[f64],
    cfg: &AdaptiveConfig,
) -> Result<AdaptiveRun> {
    if !(cfg.delta > 0.0) {
        return Err(Error::InvalidConfig(format!("delta must be positive, got {}", cfg.delta)));
    }
    if cfg.max_outer == 0 {
        return Err(Error::InvalidConfig("max_outer must be at least 1".into()));
    }
    if let Some((row, &value)) = tau0.iter().enumerate().find(|(_, &t)| !(t > 0.0)) {
        return Err(Error::NegativeThreshold { row, value });
    }
    let y = magnitudes(x_truth, ensemble)?;
    let mut tau = tau0.to_vec();
    let mut records = quantize(&y, &tau, NoiseSpec::none(), 0)?;
    let mut estimate = LiftedMatrix::zeros(ensemble.n(), ensemble.model());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut clamping_dominates = false;
    let mut total = 0;

    for k in 0..cfg.max_outer {
        let mut inner = cfg.inner.clone();
        inner.seed = cfg.inner.seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (est, res) = recover_from(&records, ensemble, &estimate, &inner)?;
        estimate = est;
        total += res.iterations_used;

        let update = threshold_update(&records, &ensemble.apply(estimate.coords()))?;
        let change = tau
            .iter()
            .zip(&update.thresholds)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let clamped = update.clamped_count();
        if 2 * clamped > records.len() {
            log::warn!("outer iteration {k}: {clamped} of {} threshold updates clamped", records.len());
            clamping_dominates = true;
        }
        let mean_slack = update.slacks.iter().sum::<f64>() / update.slacks.len() as f64;
        trace.push(OuterStep {
            k,
            tau_change: change,
            clamped,
            rka_iterations: res.iterations_used,
            rka_converged: res.converged,
            mean_slack,
        });
        tau = update.thresholds;
        records = quantize(&y, &tau, NoiseSpec::none(), 0)?;
        if change <= cfg.delta {
            converged = true;
            break;
        }
    }
    Ok(AdaptiveRun { thresholds: tau, estimate, trace, converged, clamping_dominates, total_rka_iterations: total })
}
