//! Randomized Kaczmarz projections for mixed `<=` / `=` systems.
//!
//! At every step a row `j` is drawn with probability `||c_j||^2 / ||C||_F^2`,
//! and the iterate is projected onto that row's half-space (or hyperplane):
//! `x <- x - beta / ||c_j||^2 * c_j` with `beta = (c_j x - b_j)^+` for `<=`
//! rows and `beta = c_j x - b_j` for equality rows.

use std::io::Write;

use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::dot;
use crate::polyhedron::{InequalitySystem, RowKind};
use crate::sampling::{stream_rng, Stream};

/// Stop once `||x_i - truth||^2 <= eps`. Only experiments know `truth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleStop {
    pub truth: Vec<f64>,
    pub eps: f64,
}

impl OracleStop {
    /// Relative form: `eps = rel * ||truth||^2`.
    pub fn relative(truth: Vec<f64>, rel: f64) -> Self {
        let eps = rel * dot(&truth, &truth);
        Self { truth, eps }
    }

    pub fn error(&self, coords: &[f64]) -> f64 {
        coords.iter().zip(&self.truth).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RkaConfig {
    pub max_iters: usize,
    /// Stop when the largest residual drops to this value. Checked every
    /// `report_every` iterations.
    pub stop_gap: f64,
    pub oracle_stop: Option<OracleStop>,
    pub seed: u64,
    /// Telemetry stride; `0` means one stride per row count of the system.
    pub report_every: usize,
}

impl Default for RkaConfig {
    fn default() -> Self {
        Self { max_iters: 1_000_000, stop_gap: 1e-9, oracle_stop: None, seed: 0, report_every: 0 }
    }
}

impl RkaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.stop_gap >= 0.0) {
            return Err(Error::InvalidConfig(format!("stop_gap must be >= 0, got {}", self.stop_gap)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Feasible,
    Oracle,
    MaxIters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub gap: f64,
    pub oracle_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RkaResult {
    pub coords: Vec<f64>,
    pub iterations_used: usize,
    /// Number of iterations that actually moved the iterate.
    pub updates: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub trace: Vec<TracePoint>,
}

impl RkaResult {
    pub fn final_gap(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |t| t.gap)
    }

    /// Telemetry as CSV with columns `iteration,gap,oracle_error`.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,gap,oracle_error")?;
        for t in &self.trace {
            match t.oracle_error {
                Some(e) => writeln!(w, "{},{:.16e},{:.16e}", t.iteration, t.gap, e)?,
                None => writeln!(w, "{},{:.16e},", t.iteration, t.gap)?,
            }
        }
        Ok(())
    }
}

/// Row sampler for the norm-weighted law, built once per system.
pub struct RowSampler {
    alias: WeightedAliasIndex<f64>,
}

impl RowSampler {
    pub fn new(system: &InequalitySystem) -> Result<Self> {
        if system.is_empty() {
            return Err(Error::EmptySystem);
        }
        if let Some(row) = system.row_sq_norms().iter().position(|&n| !(n > 0.0)) {
            return Err(Error::ZeroNormRow { row });
        }
        let alias = WeightedAliasIndex::new(system.row_sq_norms().to_vec())
            .map_err(|e| Error::InvalidConfig(format!("row weights: {e}")))?;
        Ok(Self { alias })
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng)
    }
}

pub fn solve(system: &InequalitySystem, x0: &[f64], cfg: &RkaConfig) -> Result<RkaResult> {
    cfg.validate()?;
    let sampler = RowSampler::new(system)?;
    solve_with(system, &sampler, x0, cfg)
}

/// As [`solve`], reusing a prebuilt sampler.
pub fn solve_with(system: &InequalitySystem, sampler: &RowSampler, x0: &[f64], cfg: &RkaConfig) -> Result<RkaResult> {
    cfg.validate()?;
    if x0.len() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), got: x0.len() });
    }
    if let Some(o) = &cfg.oracle_stop {
        if o.truth.len() != system.dim() {
            return Err(Error::DimensionMismatch { expected: system.dim(), got: o.truth.len() });
        }
    }
    let stride = if cfg.report_every == 0 { system.len().max(1) } else { cfg.report_every };
    let mut rng = stream_rng(cfg.seed, Stream::RowSampling);
    let mut x = x0.to_vec();
    let mut trace = Vec::new();
    let oracle = cfg.oracle_stop.as_ref();

    let gap0 = system.max_residual(&x);
    let err0 = oracle.map(|o| o.error(&x));
    trace.push(TracePoint { iteration: 0, gap: gap0, oracle_error: err0 });
    let early = if gap0 <= cfg.stop_gap {
        Some(StopReason::Feasible)
    } else if matches!((oracle, err0), (Some(o), Some(e)) if e <= o.eps) {
        Some(StopReason::Oracle)
    } else {
        None
    };
    if let Some(reason) = early {
        return Ok(RkaResult { coords: x, iterations_used: 0, updates: 0, converged: true, stop_reason: reason, trace });
    }

    let mut updates = 0;
    let mut reason = StopReason::MaxIters;
    let mut last_logged = 0;
    let mut it = 0;
    while it < cfg.max_iters {
        it += 1;
        let j = sampler.sample(&mut rng);
        let row = system.row(j);
        let slack = dot(row, &x) - system.rhs()[j];
        let beta = match system.kinds()[j] {
            RowKind::LessEq => slack.max(0.0),
            RowKind::Eq => slack,
        };
        if beta != 0.0 {
            let step = beta / system.row_sq_norms()[j];
            for (xi, ci) in x.iter_mut().zip(row) {
                *xi -= step * ci;
            }
            updates += 1;
            if let Some(o) = oracle {
                let e = o.error(&x);
                if e <= o.eps {
                    trace.push(TracePoint { iteration: it, gap: system.max_residual(&x), oracle_error: Some(e) });
                    last_logged = it;
                    reason = StopReason::Oracle;
                    break;
                }
            }
        }
        if it % stride == 0 {
            let gap = system.max_residual(&x);
            trace.push(TracePoint { iteration: it, gap, oracle_error: oracle.map(|o| o.error(&x)) });
            last_logged = it;
            if gap <= cfg.stop_gap {
                reason = StopReason::Feasible;
                break;
            }
        }
    }
    if last_logged != it {
        trace.push(TracePoint { iteration: it, gap: system.max_residual(&x), oracle_error: oracle.map(|o| o.error(&x)) });
    }
    Ok(RkaResult {
        coords: x,
        iterations_used: it,
        updates,
        converged: reason != StopReason::MaxIters,
        stop_reason: reason,
        trace,
    })
}

/// Equality-only mode, used to check the solver against the classical
/// contraction `E||x_i - x*||^2 <= q^i ||x_0 - x*||^2`.
pub fn solve_consistent_eq(system: &InequalitySystem, x0: &[f64], cfg: &RkaConfig) -> Result<RkaResult> {
    if let Some(row) = system.kinds().iter().position(|k| *k != RowKind::Eq) {
        return Err(Error::InvalidConfig(format!("row {row} is not an equality row")));
    }
    solve(system, x0, cfg)
}

/// Per-iteration contraction factor from a least-squares fit of
/// `ln(error)` against iteration. Returns `(q_hat, r_squared)`.
pub fn fit_contraction_rate(points: &[(usize, f64)]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e > 0.0 && e.is_finite())
        .map(|&(i, e)| (i as f64, e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (slope, _, r2) = linear_fit(&pts)?;
    Some((slope.exp(), r2))
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, r^2)`.
pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some((a, b, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{gen_instance, magnitudes, quantize, NoiseSpec, ThresholdSpec};
    use crate::polyhedron::build_system;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn le_system(rows: &[&[f64]], rhs: &[f64]) -> InequalitySystem {
        let dim = rows[0].len();
        let flat = rows.iter().flat_map(|r| r.iter().copied()).collect();
        InequalitySystem::new(dim, flat, rhs.to_vec(), vec![RowKind::LessEq; rhs.len()]).unwrap()
    }

    #[test]
    fn feasible_start_is_fixed_point() {
        let sys = le_system(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]);
        let cfg = RkaConfig { max_iters: 100, stop_gap: 0.0, report_every: 1000, ..Default::default() };
        let out = solve(&sys, &[0.5, -3.0], &cfg).unwrap();
        // gap check at the start already stops it
        assert_eq!(out.coords, vec![0.5, -3.0]);
        assert_eq!(out.updates, 0);
        assert_eq!(out.stop_reason, StopReason::Feasible);
    }

    #[test]
    fn single_row_projection() {
        let sys = le_system(&[&[1.0, 0.0]], &[1.0]);
        let cfg = RkaConfig { max_iters: 1, stop_gap: 0.0, ..Default::default() };
        let out = solve(&sys, &[2.0, 0.0], &cfg).unwrap();
        assert_eq!(out.coords, vec![1.0, 0.0]);
        assert_eq!(out.iterations_used, 1);
    }

    #[test]
    fn row_sampling_follows_norm_law() {
        let sys = le_system(&[&[1.0, 0.0], &[0.0, 2.0]], &[0.0, 0.0]);
        let sampler = RowSampler::new(&sys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let draws = 100_000;
        let hits = (0..draws).filter(|_| sampler.sample(&mut rng) == 1).count() as f64;
        let p = 4.0 / 5.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - draws as f64 * p).abs() < 3.0 * sd, "{hits}");
    }

    #[test]
    fn zero_row_and_empty_rejected() {
        let sys = le_system(&[&[1.0, 0.0], &[0.0, 0.0]], &[0.0, 0.0]);
        assert!(matches!(solve(&sys, &[0.0, 0.0], &RkaConfig::default()), Err(Error::ZeroNormRow { row: 1 })));
        let empty = InequalitySystem::new(2, vec![], vec![], vec![]).unwrap();
        assert!(matches!(solve(&empty, &[0.0, 0.0], &RkaConfig::default()), Err(Error::EmptySystem)));
    }

    fn gaussian_eq_system(m: usize, d: usize, seed: u64) -> (InequalitySystem, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<f64> = (0..m * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let truth: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rhs = rows.chunks_exact(d).map(|r| dot(r, &truth)).collect();
        (InequalitySystem::new(d, rows, rhs, vec![RowKind::Eq; m]).unwrap(), truth)
    }

    #[test]
    fn equality_mode_contracts_geometrically() {
        let (m, d, runs, iters) = (50, 10, 50, 600);
        let stride = 20;
        let mut mean_log = vec![0.0; iters / stride + 1];
        for seed in 0..runs {
            let (sys, truth) = gaussian_eq_system(m, d, seed);
            let cfg = RkaConfig {
                max_iters: iters,
                stop_gap: 0.0,
                oracle_stop: Some(OracleStop { truth, eps: 0.0 }),
                seed,
                report_every: stride,
            };
            let out = solve_consistent_eq(&sys, &vec![0.0; d], &cfg).unwrap();
            for (k, t) in out.trace.iter().enumerate() {
                mean_log[k] += t.oracle_error.unwrap().ln() / runs as f64;
            }
        }
        let pts: Vec<(f64, f64)> = mean_log.iter().enumerate().map(|(k, &l)| ((k * stride) as f64, l)).collect();
        let (slope, _, r2) = linear_fit(&pts).unwrap();
        let q = slope.exp();
        assert!(slope < 0.0 && q > 0.0 && q < 1.0, "q = {q}");
        assert!(r2 > 0.98, "r2 = {r2}");
    }

    #[test]
    fn exact_start_stays_exact() {
        let (sys, truth) = gaussian_eq_system(30, 5, 3);
        let cfg = RkaConfig { max_iters: 500, stop_gap: 0.0, report_every: 50, ..Default::default() };
        let out = solve_consistent_eq(&sys, &truth, &cfg).unwrap();
        let err: f64 = out.coords.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(err < 1e-24);
    }

    #[test]
    fn orthonormal_rows_contract_within_expected_iterations() {
        // m = d orthonormal rows: each hit zeroes one coordinate's error
        let d = 8;
        let mut rows = vec![0.0; d * d];
        for i in 0..d {
            rows[i * d + i] = 1.0;
        }
        let truth: Vec<f64> = (0..d).map(|i| i as f64 - 3.5).collect();
        let sys = InequalitySystem::new(d, rows, truth.clone(), vec![RowKind::Eq; d]).unwrap();
        let eps: f64 = 1e-3;
        let budget = (d as f64 * (1.0 / eps).ln()).ceil() as usize;
        let mut below = 0;
        let runs = 200;
        let init: f64 = truth.iter().map(|v| v * v).sum();
        for seed in 0..runs {
            let cfg = RkaConfig {
                max_iters: budget,
                stop_gap: 0.0,
                oracle_stop: Some(OracleStop { truth: truth.clone(), eps: 0.0 }),
                seed,
                report_every: budget,
            };
            let out = solve_consistent_eq(&sys, &vec![0.0; d], &cfg).unwrap();
            let e = out.trace.last().unwrap().oracle_error.unwrap();
            if e <= eps * init {
                below += 1;
            }
        }
        // closed form: expected error ratio is (1 - 1/d)^budget <= eps
        let mean_ratio_bound = (1.0 - 1.0 / d as f64).powi(budget as i32);
        assert!(mean_ratio_bound <= eps);
        assert!(below as f64 / runs as f64 > 0.5, "{below}");
    }

    #[test]
    fn iterates_on_sign_data_are_nonexpansive_toward_truth() {
        let (x, ens) = gen_instance(4, 300, crate::model::SignalModel::Complex, 5).unwrap();
        let y = magnitudes(&x, &ens).unwrap();
        let tau = ThresholdSpec::Lognormal.draw(300, 5).unwrap();
        let sys = build_system(&quantize(&y, &tau, NoiseSpec::none(), 5).unwrap(), &ens).unwrap();
        let truth = x.lifted().into_coords();
        let cfg = RkaConfig {
            max_iters: 3000,
            stop_gap: 0.0,
            oracle_stop: Some(OracleStop { truth, eps: 0.0 }),
            seed: 1,
            report_every: 1,
        };
        let out = solve(&sys, &vec![0.0; sys.dim()], &cfg).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1].oracle_error.unwrap() <= w[0].oracle_error.unwrap() * (1.0 + 1e-12) + 1e-12);
            assert!(w[1].iteration >= w[0].iteration);
        }
    }

    #[test]
    fn updated_row_is_satisfied_exactly() {
        let sys = le_system(&[&[1.0, 2.0], &[-3.0, 1.0], &[0.5, 0.5]], &[1.0, -2.0, 0.3]);
        let mut x = vec![4.0, 4.0];
        for j in 0..3 {
            let row = sys.row(j);
            let beta = (dot(row, &x) - sys.rhs()[j]).max(0.0);
            let step = beta / sys.row_sq_norms()[j];
            for (xi, ci) in x.iter_mut().zip(row) {
                *xi -= step * ci;
            }
            assert!((dot(row, &x) - sys.rhs()[j]).max(0.0) < 1e-14);
        }
    }

    #[test]
    fn same_seed_same_result() {
        let (sys, _) = gaussian_eq_system(40, 6, 9);
        let cfg = RkaConfig { max_iters: 300, stop_gap: 0.0, seed: 4, report_every: 10, ..Default::default() };
        let a = solve(&sys, &vec![0.0; 6], &cfg).unwrap();
        let b = solve(&sys, &vec![0.0; 6], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let sys = le_system(&[&[1.0, 0.0]], &[1.0]);
        let out = solve(&sys, &[2.0, 0.0], &RkaConfig { max_iters: 1, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        out.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,gap,oracle_error\n0,"));
        assert_eq!(text.lines().count(), 1 + out.trace.len());
    }
}
