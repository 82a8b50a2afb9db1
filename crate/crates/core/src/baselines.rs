//! Trace-regularized convex baselines solved by accelerated projected
//! gradient over the PSD cone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kaczmarz::OracleStop;
use crate::mle::{solve_mle, LikelihoodModel, MleOptions, MleResult, StepRule};
use crate::model::{dot, embed, identity_coords, LiftedMatrix, SensingEnsemble, SignalModel};
use crate::sampling::OneBitRecord;

const PSD_ROUNDING: f64 = 1e-12;

/// Frobenius-nearest PSD matrix: negative eigenvalues set to zero.
/// Eigenvalues within rounding of zero count as nonnegative, which makes the
/// projection exactly idempotent.
pub fn project_psd(x: &LiftedMatrix) -> LiftedMatrix {
    let eig = x.eig();
    let floor = -PSD_ROUNDING * eig.spectral_radius();
    if eig.values.iter().all(|&l| l >= floor) {
        return x.clone();
    }
    let h = eig.reconstruct_with(|l| l.max(0.0));
    embed(&h, x.model()).expect("reconstruction is Hermitian")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgOptions {
    pub max_iters: usize,
    /// Relative gradient-mapping tolerance.
    pub tol: f64,
    pub oracle_stop: Option<OracleStop>,
    pub accelerated: bool,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self { max_iters: 5000, tol: 1e-6, oracle_stop: None, accelerated: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PgStop {
    Stationary,
    Oracle,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct PgResult {
    pub estimate: LiftedMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub stop: PgStop,
    /// `sum_j r(Tr(V_j X))^2` for the data term at the output.
    pub data_residual: f64,
}

impl PgResult {
    pub fn converged(&self) -> bool {
        self.stop != PgStop::MaxIters
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Minimizes a smooth `f` over the PSD cone with FISTA, backtracking on the
/// local Lipschitz constant and restarting whenever the objective rises.
pub fn projected_gradient<F>(f: F, x0: &LiftedMatrix, opt: &PgOptions) -> Result<(LiftedMatrix, f64, usize, PgStop)>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    if opt.max_iters == 0 || !(opt.tol > 0.0) {
        return Err(Error::InvalidConfig("need max_iters >= 1 and tol > 0".into()));
    }
    let (n, model) = (x0.n(), x0.model());
    let proj = |v: Vec<f64>| -> Result<Vec<f64>> { Ok(project_psd(&LiftedMatrix::from_coords(v, n, model)?).into_coords()) };

    let mut x = proj(x0.coords().to_vec())?;
    let (mut fx, g0) = f(&x);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut lip = 1.0_f64.max(dot(&g0, &g0).sqrt());
    let mut target = None;
    let mut stop = PgStop::MaxIters;
    let mut iters = 0;

    if let Some(o) = &opt.oracle_stop {
        if o.error(&x) <= o.eps {
            return Ok((LiftedMatrix::from_coords(x, n, model)?, fx, 0, PgStop::Oracle));
        }
    }
    while iters < opt.max_iters {
        iters += 1;
        let (fy, gy) = f(&y);
        let (z, fz) = loop {
            let z = proj(y.iter().zip(&gy).map(|(a, g)| a - g / lip).collect())?;
            let fz = f(&z).0;
            let lin: f64 = gy.iter().zip(z.iter().zip(&y)).map(|(g, (a, b))| g * (a - b)).sum();
            if fz <= fy + lin + 0.5 * lip * dist_sq(&z, &y) * (1.0 + 1e-12) + 1e-14 * fy.abs() {
                break (z, fz);
            }
            lip *= 2.0;
            if !lip.is_finite() {
                return Err(Error::InvalidConfig("step size underflow in projected gradient".into()));
            }
        };
        let mapping = lip * dist_sq(&z, &y).sqrt();
        let tgt = *target.get_or_insert(opt.tol * (1.0 + mapping));

        if opt.accelerated && fz > fx {
            // momentum overshoot: restart from the last accepted point
            y = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = if opt.accelerated { (t - 1.0) / t_next } else { 0.0 };
        y = z.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        x = z;
        fx = fz;
        t = t_next;
        lip *= 0.9;

        if let Some(o) = &opt.oracle_stop {
            if o.error(&x) <= o.eps {
                stop = PgStop::Oracle;
                break;
            }
        }
        if mapping <= tgt {
            stop = PgStop::Stationary;
            break;
        }
    }
    if stop == PgStop::MaxIters {
        log::warn!("projected gradient stopped after {iters} iterations");
    }
    Ok((LiftedMatrix::from_coords(x, n, model)?, fx, iters, stop))
}

fn check_len(ensemble: &SensingEnsemble, got: usize) -> Result<()> {
    if got != ensemble.m() {
        return Err(Error::DimensionMismatch { expected: ensemble.m(), got });
    }
    if got == 0 {
        return Err(Error::EmptySystem);
    }
    Ok(())
}

fn trace_penalized<R>(ensemble: &SensingEnsemble, alpha: f64, residual: R) -> impl Fn(&[f64]) -> (f64, Vec<f64>) + '_
where
    R: Fn(usize, f64) -> f64 + 'static,
{
    let eye = identity_coords(ensemble.n(), ensemble.model());
    move |x: &[f64]| {
        let d = x.len();
        let mut g: Vec<f64> = eye.iter().map(|e| alpha * e).collect();
        let mut f = alpha * dot(&eye, x);
        for (j, row) in ensemble.lifted_rows().chunks_exact(d).enumerate() {
            let r = residual(j, dot(row, x));
            if r != 0.0 {
                f += 0.5 * r * r;
                for (gi, c) in g.iter_mut().zip(row) {
                    *gi += r * c;
                }
            }
        }
        (f, g)
    }
}

/// `min 1/2 sum_j (Tr(V_j X) - y_j^2)^2 + alpha Tr(X)` over `X >= 0`.
pub fn phaselift(y_sq: &[f64], ensemble: &SensingEnsemble, alpha: f64, opt: &PgOptions) -> Result<PgResult> {
    check_len(ensemble, y_sq.len())?;
    check_alpha(alpha)?;
    let targets = y_sq.to_vec();
    let data = targets.clone();
    let f = trace_penalized(ensemble, alpha, move |j, v| v - targets[j]);
    let x0 = LiftedMatrix::zeros(ensemble.n(), ensemble.model());
    let (estimate, objective, iterations, stop) = projected_gradient(f, &x0, opt)?;
    let data_residual = ensemble.apply(estimate.coords()).iter().zip(&data).map(|(v, t)| (v - t).powi(2)).sum();
    Ok(PgResult { estimate, objective, iterations, stop, data_residual })
}

/// `min 1/2 sum_j ((r_j (tau_j^2 - Tr(V_j X)))^+)^2 + alpha Tr(X)` over `X >= 0`:
/// the sign constraints `r_j (Tr(V_j X) - tau_j^2) >= 0` as a squared hinge.
pub fn onebit_phaselift(records: &[OneBitRecord], ensemble: &SensingEnsemble, alpha: f64, opt: &PgOptions) -> Result<PgResult> {
    onebit_phaselift_from(records, ensemble, alpha, &LiftedMatrix::zeros(ensemble.n(), ensemble.model()), opt)
}

pub fn onebit_phaselift_from(
    records: &[OneBitRecord],
    ensemble: &SensingEnsemble,
    alpha: f64,
    x0: &LiftedMatrix,
    opt: &PgOptions,
) -> Result<PgResult> {
    check_len(ensemble, records.len())?;
    check_alpha(alpha)?;
    let rt: Vec<(f64, f64)> = records.iter().map(|r| (r.sign.value(), r.threshold * r.threshold)).collect();
    let hinge = rt.clone();
    let f = trace_penalized(ensemble, alpha, move |j, v| {
        let (r, t2) = hinge[j];
        // residual in value space; its square is the squared hinge
        if r * (v - t2) < 0.0 {
            v - t2
        } else {
            0.0
        }
    });
    let (estimate, objective, iterations, stop) = projected_gradient(f, x0, opt)?;
    let data_residual = ensemble
        .apply(estimate.coords())
        .iter()
        .zip(&rt)
        .map(|(v, (r, t2))| (r * (t2 - v)).max(0.0).powi(2))
        .sum();
    Ok(PgResult { estimate, objective, iterations, stop, data_residual })
}

/// Fraction of sign constraints `r_j (Tr(V_j X) - tau_j^2) >= -tol` met by `x`.
pub fn satisfied_fraction(records: &[OneBitRecord], ensemble: &SensingEnsemble, x: &LiftedMatrix, tol: f64) -> f64 {
    let vals = ensemble.apply(x.coords());
    let ok = records
        .iter()
        .zip(&vals)
        .filter(|(r, &v)| r.sign.value() * (v - r.threshold * r.threshold) >= -tol)
        .count();
    ok as f64 / records.len().max(1) as f64
}

/// Trace-penalized, PSD-constrained likelihood maximization. Without an
/// oracle stop this is [`solve_mle`] with `trace_weight = alpha` and
/// projection; with one, projected gradient ascent halts as soon as the
/// oracle criterion is met.
pub fn noisy_phaselift(
    records: &[OneBitRecord],
    ensemble: &SensingEnsemble,
    sigma: f64,
    alpha: f64,
    opt: &PgOptions,
) -> Result<MleResult> {
    check_alpha(alpha)?;
    let lm = LikelihoodModel::new(records, ensemble, sigma)?;
    let x0 = vec![0.0; ensemble.dim()];
    match &opt.oracle_stop {
        None => solve_mle(
            &lm,
            &x0,
            &MleOptions {
                step_rule: StepRule::Gradient,
                tol: opt.tol,
                max_iters: opt.max_iters,
                trace_weight: alpha,
                project_psd: true,
            },
        ),
        Some(_) => {
            let f = |x: &[f64]| {
                let (l, g) = (lm.loglik(x).expect("dimension checked"), lm.grad_loglik(x).expect("dimension checked"));
                let eye = identity_coords(ensemble.n(), ensemble.model());
                let f = -l + alpha * dot(&eye, x);
                let g = g.iter().zip(&eye).map(|(gi, e)| -gi + alpha * e).collect();
                (f, g)
            };
            let start = LiftedMatrix::from_coords(x0, ensemble.n(), ensemble.model())?;
            let (estimate, objective, iterations, stop) = projected_gradient(f, &start, opt)?;
            Ok(MleResult { estimate, objective: -objective, iterations, stationarity: f64::NAN, converged: stop != PgStop::MaxIters })
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!("trace weight must be >= 0, got {alpha}")));
    }
    Ok(())
}

/// Isotropic default start for callers that need a strictly feasible PSD point.
pub fn scaled_identity(n: usize, model: SignalModel, scale: f64) -> LiftedMatrix {
    LiftedMatrix::from_coords(identity_coords(n, model).into_iter().map(|v| v * scale).collect(), n, model)
        .expect("identity has the right length")
}
