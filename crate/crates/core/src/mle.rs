//! Maximum-likelihood recovery from noisy sign data.
//!
//! Under `r_j = sgn(mu_j + z_j - lambda_j)` with `z_j ~ N(0, sigma^2)` and
//! `mu_j = Tr(V_j X)`, the log-likelihood is
//! `L(X) = sum_j log Phi(r_j (mu_j - lambda_j) / sigma)`, concave in `X`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, identity_coords, LiftedMatrix, SensingEnsemble};
use crate::normal::{inv_mills, inv_mills_derivative, log_norm_cdf};
use crate::sampling::OneBitRecord;

#[derive(Debug, Clone)]
pub struct LikelihoodModel<'a> {
    ensemble: &'a SensingEnsemble,
    signs: Vec<f64>,
    thresholds: Vec<f64>,
    sigma: f64,
}

impl<'a> LikelihoodModel<'a> {
    pub fn new(records: &[OneBitRecord], ensemble: &'a SensingEnsemble, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidSigma(sigma));
        }
        if records.len() != ensemble.m() {
            return Err(Error::DimensionMismatch { expected: ensemble.m(), got: records.len() });
        }
        if records.is_empty() {
            return Err(Error::EmptySystem);
        }
        Ok(Self {
            ensemble,
            signs: records.iter().map(|r| r.sign.value()).collect(),
            thresholds: records.iter().map(|r| r.threshold).collect(),
            sigma,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.ensemble.dim()
    }

    pub fn m(&self) -> usize {
        self.signs.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn ensemble(&self) -> &SensingEnsemble {
        self.ensemble
    }

    /// Standardized margins `t_j = r_j (mu_j - lambda_j) / sigma`.
    fn margins(&self, coords: &[f64]) -> Vec<f64> {
        let d = self.dim();
        self.ensemble
            .lifted_rows()
            .chunks_exact(d)
            .zip(self.signs.iter().zip(&self.thresholds))
            .map(|(row, (&r, &lam))| r * (dot(row, coords) - lam) / self.sigma)
            .collect()
    }

    fn check(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: coords.len() });
        }
        Ok(())
    }

    pub fn loglik(&self, coords: &[f64]) -> Result<f64> {
        self.check(coords)?;
        Ok(self.margins(coords).into_iter().map(log_norm_cdf).sum())
    }

    pub fn grad_loglik(&self, coords: &[f64]) -> Result<Vec<f64>> {
        self.check(coords)?;
        Ok(self.value_and_grad(coords).1)
    }

    fn value_and_grad(&self, coords: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim();
        let t = self.margins(coords);
        let mut grad = vec![0.0; d];
        let mut value = 0.0;
        for ((row, &tj), &r) in self.ensemble.lifted_rows().chunks_exact(d).zip(&t).zip(&self.signs) {
            value += log_norm_cdf(tj);
            let w = inv_mills(tj) * r / self.sigma;
            for (g, c) in grad.iter_mut().zip(row) {
                *g += w * c;
            }
        }
        (value, grad)
    }

    /// Negated Hessian `sum_j -psi'(t_j) / sigma^2 c_j c_j^T`, row-major `d x d`.
    pub fn neg_hessian(&self, coords: &[f64]) -> Result<Vec<f64>> {
        self.check(coords)?;
        let d = self.dim();
        let t = self.margins(coords);
        let mut h = vec![0.0; d * d];
        let s2 = self.sigma * self.sigma;
        for (row, &tj) in self.ensemble.lifted_rows().chunks_exact(d).zip(&t) {
            let w = -inv_mills_derivative(tj) / s2;
            for a in 0..d {
                let wa = w * row[a];
                let ha = &mut h[a * d..(a + 1) * d];
                for b in a..d {
                    ha[b] += wa * row[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                h[a * d + b] = h[b * d + a];
            }
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// Steepest ascent with backtracking.
    #[default]
    Gradient,
    /// Newton direction from the exact Hessian with backtracking.
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub step_rule: StepRule,
    /// Relative stationarity tolerance.
    pub tol: f64,
    pub max_iters: usize,
    /// Weight of the `- alpha Tr(X)` penalty.
    pub trace_weight: f64,
    /// Project every iterate onto the PSD cone.
    pub project_psd: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { step_rule: StepRule::Gradient, tol: 1e-6, max_iters: 5000, trace_weight: 0.0, project_psd: false }
    }
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub estimate: LiftedMatrix,
    pub objective: f64,
    pub iterations: usize,
    /// Final stationarity measure (gradient norm, or gradient-mapping norm
    /// when projecting).
    pub stationarity: f64,
    pub converged: bool,
}

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-18;

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Maximizes `L(X) - alpha Tr(X)` from `x0`. Accepted steps never decrease
/// the objective. Hitting `max_iters` returns the last iterate with
/// `converged = false`.
pub fn solve_mle(model: &LikelihoodModel<'_>, x0: &[f64], opt: &MleOptions) -> Result<MleResult> {
    model.check(x0)?;
    if !(opt.tol > 0.0) || opt.max_iters == 0 || !(opt.trace_weight >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "need tol > 0, max_iters >= 1, trace_weight >= 0; got {}, {}, {}",
            opt.tol, opt.max_iters, opt.trace_weight
        )));
    }
    let n = model.ensemble().n();
    let kind = model.ensemble().model();
    let d = model.dim();
    let eye = identity_coords(n, kind);
    let project = |v: Vec<f64>| -> Result<Vec<f64>> {
        if opt.project_psd {
            Ok(crate::baselines::project_psd(&LiftedMatrix::from_coords(v, n, kind)?).into_coords())
        } else {
            Ok(v)
        }
    };
    let objective = |x: &[f64]| -> (f64, Vec<f64>) {
        let (mut f, mut g) = model.value_and_grad(x);
        if opt.trace_weight > 0.0 {
            f -= opt.trace_weight * dot(&eye, x);
            for (gi, e) in g.iter_mut().zip(&eye) {
                *gi -= opt.trace_weight * e;
            }
        }
        (f, g)
    };
    let stationarity = |x: &[f64], g: &[f64]| -> Result<f64> {
        if opt.project_psd {
            let moved: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + b).collect();
            let p = project(moved)?;
            Ok(p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        } else {
            Ok(norm(g))
        }
    };

    let mut x = project(x0.to_vec())?;
    let (mut f, mut g) = objective(&x);
    let mut stat = stationarity(&x, &g)?;
    let target = opt.tol * (1.0 + stat);
    let mut step = 1.0 / (1.0 + norm(&g));
    let mut iterations = 0;
    let mut converged = stat <= target;

    while !converged && iterations < opt.max_iters {
        iterations += 1;
        let dir = match opt.step_rule {
            StepRule::Gradient => g.clone(),
            StepRule::Newton => newton_direction(model, &x, &g, d)?,
        };
        let mut s = match opt.step_rule {
            StepRule::Gradient => step * 2.0,
            StepRule::Newton => 1.0,
        };
        let mut accepted = None;
        while s >= MIN_STEP {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
            let trial = project(trial)?;
            let (ft, gt) = objective(&trial);
            let gain: f64 = g.iter().zip(trial.iter().zip(&x)).map(|(gi, (t, xi))| gi * (t - xi)).sum();
            if ft.is_finite() && ft >= f + ARMIJO_C * gain && ft >= f {
                accepted = Some((trial, ft, gt));
                break;
            }
            s *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            // no ascent left at f64 resolution
            log::debug!("line search exhausted at iteration {iterations}, stationarity {stat:e}");
            break;
        };
        if opt.step_rule == StepRule::Gradient {
            step = s;
        }
        x = xn;
        f = fnew;
        g = gn;
        stat = stationarity(&x, &g)?;
        converged = stat <= target;
    }
    if !converged && iterations >= opt.max_iters {
        log::warn!("likelihood ascent stopped after {iterations} iterations at stationarity {stat:e} (target {target:e})");
    }
    Ok(MleResult { estimate: LiftedMatrix::from_coords(x, n, kind)?, objective: f, iterations, stationarity: stat, converged })
}

fn newton_direction(model: &LikelihoodModel<'_>, x: &[f64], g: &[f64], d: usize) -> Result<Vec<f64>> {
    let h = DMatrix::from_row_slice(d, d, &model.neg_hessian(x)?);
    let rhs = DVector::from_column_slice(g);
    let mut ridge = 0.0;
    let scale = (0..d).map(|i| h[(i, i)]).fold(0.0_f64, f64::max).max(1e-300);
    loop {
        let mut hr = h.clone();
        for i in 0..d {
            hr[(i, i)] += ridge;
        }
        if let Some(ch) = hr.cholesky() {
            return Ok(ch.solve(&rhs).as_slice().to_vec());
        }
        ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 10.0 };
        if ridge > scale {
            return Ok(g.to_vec());
        }
    }
}
