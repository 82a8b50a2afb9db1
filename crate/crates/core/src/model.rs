//! Signals, sensing ensembles and lifted Hermitian matrices.
//!
//! Every solver in this crate works on real coordinate vectors. A Hermitian
//! `n x n` matrix is mapped to `d(n)` reals by keeping the diagonal as-is and
//! scaling the real and imaginary parts of each upper off-diagonal entry by
//! `sqrt(2)`. The map is a Frobenius isometry, so `<embed(A), embed(B)>` equals
//! `Re Tr(A B)` and row norms seen by the solvers are the Frobenius norms of
//! the sensing matrices `V_j = a_j a_j^H`.
//!
//! Coordinates are laid out over the upper triangle in row-major order. For
//! each `(i, j)` with `i <= j` the diagonal contributes one coordinate; an
//! off-diagonal entry contributes one coordinate in the real model and two
//! (real, imaginary) in the complex model.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::{eig_hermitian, EigenDecomposition};
use crate::error::{Error, Result};

/// Absolute tolerance on `max |H - H^H|` accepted by [`embed`].
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalModel {
    Real,
    Complex,
}

impl SignalModel {
    /// Number of real coordinates of an embedded `n x n` Hermitian matrix.
    pub fn coord_dim(self, n: usize) -> usize {
        match self {
            SignalModel::Real => n * (n + 1) / 2,
            SignalModel::Complex => n * n,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SignalModel::Real => "real",
            SignalModel::Complex => "complex",
        }
    }
}

impl std::str::FromStr for SignalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(SignalModel::Real),
            "complex" => Ok(SignalModel::Complex),
            other => Err(Error::InvalidConfig(format!("unknown signal model `{other}`"))),
        }
    }
}

impl std::fmt::Display for SignalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries. No symmetry check is made here;
    /// [`embed`] performs it.
    pub fn from_rows(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        Ok(Self { n, data })
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = Complex64::new(v, 0.0);
        }
        m
    }

    /// `x x^H`.
    pub fn outer(x: &[Complex64]) -> Self {
        let n = x.len();
        let mut data = Vec::with_capacity(n * n);
        for xi in x {
            for xj in x {
                data.push(xi * xj.conj());
            }
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `max_{i,j} |H_ij - conj(H_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `Tr(A B)`.
    pub fn trace_product(&self, other: &HermitianMatrix) -> Complex64 {
        let n = self.n;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self.get(i, k) * other.get(k, i);
            }
        }
        acc
    }

    pub fn sub(&self, other: &HermitianMatrix) -> HermitianMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        HermitianMatrix { n: self.n, data }
    }

    pub fn eig(&self) -> EigenDecomposition {
        eig_hermitian(self)
    }
}

/// The unknown signal `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalVector {
    entries: Vec<Complex64>,
    model: SignalModel,
}

impl SignalVector {
    pub fn new(entries: Vec<Complex64>, model: SignalModel) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        if model == SignalModel::Real {
            if let Some(z) = entries.iter().find(|z| z.im != 0.0) {
                return Err(Error::ComplexInRealModel { value: z.im });
            }
        }
        Ok(Self { entries, model })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), SignalModel::Real)
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn model(&self) -> SignalModel {
        self.model
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Embedded `x x^H`.
    pub fn lifted(&self) -> LiftedMatrix {
        LiftedMatrix {
            coords: lift_row(&self.entries, self.model),
            n: self.n(),
            model: self.model,
        }
    }
}

/// Hermitian `n x n` matrix held in isometric real coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedMatrix {
    coords: Vec<f64>,
    n: usize,
    model: SignalModel,
}

impl LiftedMatrix {
    pub fn from_coords(coords: Vec<f64>, n: usize, model: SignalModel) -> Result<Self> {
        let d = model.coord_dim(n);
        if coords.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: coords.len() });
        }
        Ok(Self { coords, n, model })
    }

    pub fn zeros(n: usize, model: SignalModel) -> Self {
        Self { coords: vec![0.0; model.coord_dim(n)], n, model }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> SignalModel {
        self.model
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.coords, &self.coords).sqrt()
    }

    pub fn decode(&self) -> HermitianMatrix {
        decode(&self.coords, self.n, self.model)
    }

    pub fn eig(&self) -> EigenDecomposition {
        eig_hermitian(&self.decode())
    }

    /// `Tr(X)`, read directly off the diagonal coordinates.
    pub fn trace(&self) -> f64 {
        let mut idx = 0;
        let mut t = 0.0;
        for i in 0..self.n {
            t += self.coords[idx];
            idx += 1 + self.off_width() * (self.n - i - 1);
        }
        t
    }

    fn off_width(&self) -> usize {
        match self.model {
            SignalModel::Real => 1,
            SignalModel::Complex => 2,
        }
    }
}

/// Coordinates of the identity matrix; the gradient of `Tr(X)` in coordinates.
pub fn identity_coords(n: usize, model: SignalModel) -> Vec<f64> {
    lift_diag(&vec![1.0; n], model)
}

fn lift_diag(diag: &[f64], model: SignalModel) -> Vec<f64> {
    let n = diag.len();
    let w = if model == SignalModel::Real { 1 } else { 2 };
    let mut out = vec![0.0; model.coord_dim(n)];
    let mut idx = 0;
    for (i, &v) in diag.iter().enumerate() {
        out[idx] = v;
        idx += 1 + w * (n - i - 1);
    }
    out
}

/// Maps a Hermitian matrix to isometric real coordinates.
pub fn embed(h: &HermitianMatrix, model: SignalModel) -> Result<LiftedMatrix> {
    let defect = h.hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NonHermitianInput { defect, tol: HERMITIAN_TOL });
    }
    let n = h.n();
    let mut coords = Vec::with_capacity(model.coord_dim(n));
    for i in 0..n {
        coords.push(h.get(i, i).re);
        for j in i + 1..n {
            let z = h.get(i, j);
            match model {
                SignalModel::Real => {
                    if z.im.abs() > HERMITIAN_TOL {
                        return Err(Error::ComplexInRealModel { value: z.im });
                    }
                    coords.push(SQRT_2 * z.re);
                }
                SignalModel::Complex => {
                    coords.push(SQRT_2 * z.re);
                    coords.push(SQRT_2 * z.im);
                }
            }
        }
    }
    Ok(LiftedMatrix { coords, n, model })
}

/// Coordinates of `a a^H`, computed without forming the matrix.
pub fn lift_row(a: &[Complex64], model: SignalModel) -> Vec<f64> {
    let n = a.len();
    let mut coords = Vec::with_capacity(model.coord_dim(n));
    for i in 0..n {
        coords.push(a[i].norm_sqr());
        for j in i + 1..n {
            let z = a[i] * a[j].conj();
            match model {
                SignalModel::Real => coords.push(SQRT_2 * z.re),
                SignalModel::Complex => {
                    coords.push(SQRT_2 * z.re);
                    coords.push(SQRT_2 * z.im);
                }
            }
        }
    }
    coords
}

/// Inverse of [`embed`]. The result is Hermitian by construction.
pub fn decode(coords: &[f64], n: usize, model: SignalModel) -> HermitianMatrix {
    debug_assert_eq!(coords.len(), model.coord_dim(n));
    let mut h = HermitianMatrix::zeros(n);
    let mut idx = 0;
    for i in 0..n {
        h.set(i, i, Complex64::new(coords[idx], 0.0));
        idx += 1;
        for j in i + 1..n {
            let z = match model {
                SignalModel::Real => {
                    idx += 1;
                    Complex64::new(coords[idx - 1] / SQRT_2, 0.0)
                }
                SignalModel::Complex => {
                    idx += 2;
                    Complex64::new(coords[idx - 2] / SQRT_2, coords[idx - 1] / SQRT_2)
                }
            };
            h.set(i, j, z);
            h.set(j, i, z.conj());
        }
    }
    h
}

/// `m` sensing rows together with their lifted coordinates.
#[derive(Debug, Clone)]
pub struct SensingEnsemble {
    n: usize,
    model: SignalModel,
    rows: Vec<Vec<Complex64>>,
    lifted: Vec<f64>,
    row_sq_norms: Vec<f64>,
    total_sq_norm: f64,
}

impl SensingEnsemble {
    pub fn new(n: usize, model: SignalModel, rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let d = model.coord_dim(n);
        let mut lifted = Vec::with_capacity(rows.len() * d);
        let mut row_sq_norms = Vec::with_capacity(rows.len());
        for a in &rows {
            if a.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: a.len() });
            }
            if model == SignalModel::Real {
                if let Some(z) = a.iter().find(|z| z.im != 0.0) {
                    return Err(Error::ComplexInRealModel { value: z.im });
                }
            }
            let v = lift_row(a, model);
            row_sq_norms.push(dot(&v, &v));
            lifted.extend_from_slice(&v);
        }
        let total_sq_norm = row_sq_norms.iter().sum();
        Ok(Self { n, model, rows, lifted, row_sq_norms, total_sq_norm })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn model(&self) -> SignalModel {
        self.model
    }

    pub fn dim(&self) -> usize {
        self.model.coord_dim(self.n)
    }

    pub fn rows(&self) -> &[Vec<Complex64>] {
        &self.rows
    }

    pub fn row(&self, j: usize) -> &[Complex64] {
        &self.rows[j]
    }

    pub fn lifted_row(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.lifted[j * d..(j + 1) * d]
    }

    /// All lifted rows, row-major `m x d`.
    pub fn lifted_rows(&self) -> &[f64] {
        &self.lifted
    }

    pub fn row_sq_norms(&self) -> &[f64] {
        &self.row_sq_norms
    }

    pub fn total_sq_norm(&self) -> f64 {
        self.total_sq_norm
    }

    /// `Tr(V_j X)` for every row.
    pub fn apply(&self, coords: &[f64]) -> Vec<f64> {
        let d = self.dim();
        self.lifted.chunks_exact(d).map(|row| dot(row, coords)).collect()
    }

    /// Keeps the first `m` rows.
    pub fn truncated(&self, m: usize) -> SensingEnsemble {
        let m = m.min(self.m());
        let d = self.dim();
        SensingEnsemble {
            n: self.n,
            model: self.model,
            rows: self.rows[..m].to_vec(),
            lifted: self.lifted[..m * d].to_vec(),
            row_sq_norms: self.row_sq_norms[..m].to_vec(),
            total_sq_norm: self.row_sq_norms[..m].iter().sum(),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, model: SignalModel, rng: &mut ChaCha8Rng) -> HermitianMatrix {
        let mut h = HermitianMatrix::zeros(n);
        for i in 0..n {
            h.set(i, i, c(rng.random_range(-1.0..1.0), 0.0));
            for j in i + 1..n {
                let im = if model == SignalModel::Complex { rng.random_range(-1.0..1.0) } else { 0.0 };
                let z = c(rng.random_range(-1.0..1.0), im);
                h.set(i, j, z);
                h.set(j, i, z.conj());
            }
        }
        h
    }

    #[test]
    fn identity_embeds_to_unit_diagonal() {
        let x = embed(&HermitianMatrix::identity(2), SignalModel::Complex).unwrap();
        assert_eq!(x.coords(), &[1.0, 0.0, 0.0, 1.0]);
        assert!((x.frobenius_norm() - SQRT_2).abs() < 1e-15);
        assert_eq!(x.trace(), 2.0);
    }

    #[test]
    fn zero_embeds_to_zero() {
        let x = embed(&HermitianMatrix::zeros(3), SignalModel::Real).unwrap();
        assert!(x.coords().iter().all(|&v| v == 0.0));
        assert_eq!(x.coords().len(), 6);
    }

    #[test]
    fn inner_product_matches_trace_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in [SignalModel::Real, SignalModel::Complex] {
            for _ in 0..1000 {
                let a = random_hermitian(3, model, &mut rng);
                let b = random_hermitian(3, model, &mut rng);
                let lhs = dot(embed(&a, model).unwrap().coords(), embed(&b, model).unwrap().coords());
                // brute force Re Tr(AB) over direct products
                let mut rhs = 0.0;
                for i in 0..3 {
                    for k in 0..3 {
                        rhs += (a.get(i, k) * b.get(k, i)).re;
                    }
                }
                assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let mut h = HermitianMatrix::identity(2);
        h.set(0, 1, c(1.0, 0.0));
        assert!(matches!(embed(&h, SignalModel::Complex), Err(Error::NonHermitianInput { .. })));
        let mut h = HermitianMatrix::identity(2);
        h.set(0, 1, c(0.0, 1.0));
        h.set(1, 0, c(0.0, -1.0));
        assert!(matches!(embed(&h, SignalModel::Real), Err(Error::ComplexInRealModel { .. })));
    }

    #[test]
    fn lift_basis_vector() {
        let v = lift_row(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], SignalModel::Real);
        assert_eq!(v, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let z = lift_row(&[c(0.0, 0.0); 2], SignalModel::Complex);
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn lift_of_one_i_decodes_to_outer_product() {
        let a = [c(1.0, 0.0), c(0.0, 1.0)];
        let h = decode(&lift_row(&a, SignalModel::Complex), 2, SignalModel::Complex);
        // a a^H computed entrywise
        let want = [[c(1.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(1.0, 0.0)]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h.get(i, j) - want[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn round_trip_and_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for model in [SignalModel::Real, SignalModel::Complex] {
            let h = random_hermitian(5, model, &mut rng);
            let e = embed(&h, model).unwrap();
            let back = e.decode();
            assert!(back.sub(&h).frobenius_norm() < 1e-14);
            assert!((e.frobenius_norm() - h.frobenius_norm()).abs() < 1e-13);
            let again = embed(&back, model).unwrap();
            for (a, b) in e.coords().iter().zip(again.coords()) {
                assert!((a - b).abs() < 1e-15);
            }
            if model == SignalModel::Real {
                assert!(back.is_real());
            }
        }
    }

    #[test]
    fn ensemble_norms_consistent() {
        let rows = vec![vec![c(1.0, 2.0), c(-0.5, 0.3)], vec![c(0.0, 1.0), c(2.0, 0.0)]];
        let e = SensingEnsemble::new(2, SignalModel::Complex, rows.clone()).unwrap();
        for (j, a) in rows.iter().enumerate() {
            let v = HermitianMatrix::outer(a);
            assert!((e.row_sq_norms()[j] - v.frobenius_norm().powi(2)).abs() < 1e-12);
            let asq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            assert!((e.row_sq_norms()[j].sqrt() - asq).abs() < 1e-12);
        }
        assert!((e.total_sq_norm() - e.row_sq_norms().iter().sum::<f64>()).abs() < 1e-12);
    }
}
