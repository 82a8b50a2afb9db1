//! Cyclic Jacobi eigensolver for Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot `a_pq` with a diagonal
//! unitary and then applies a real Givens rotation. When the input is real the
//! phase factor is `+-1` exactly and the whole decomposition stays real.

use num_complex::Complex64;

use crate::model::HermitianMatrix;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order with matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// `vectors[k]` is the eigenvector for `values[k]`.
    pub vectors: Vec<Vec<Complex64>>,
    pub sweeps: usize,
}

impl EigenDecomposition {
    /// Largest absolute eigenvalue.
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Mean of `|l_i|` over all but the largest eigenvalue.
    pub fn mean_non_dominant(&self) -> f64 {
        if self.values.len() < 2 {
            return 0.0;
        }
        let tail = &self.values[1..];
        tail.iter().map(|v| v.abs()).sum::<f64>() / tail.len() as f64
    }

    /// `sum_k f(l_k) v_k v_k^H`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.values.len();
        let mut out = HermitianMatrix::zeros(n);
        for (l, v) in self.values.iter().zip(&self.vectors) {
            let w = f(*l);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in i..n {
                    let z = out.get(i, j) + v[i] * v[j].conj() * w;
                    out.set(i, j, z);
                }
            }
        }
        for i in 0..n {
            let d = out.get(i, i);
            out.set(i, i, Complex64::new(d.re, 0.0));
            for j in i + 1..n {
                out.set(j, i, out.get(i, j).conj());
            }
        }
        out
    }
}

pub fn eig_hermitian(h: &HermitianMatrix) -> EigenDecomposition {
    let n = h.n();
    let mut a: Vec<Complex64> = h.as_slice().to_vec();
    let mut v = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i * n + i] = Complex64::new(1.0, 0.0);
        a[i * n + i].im = 0.0;
    }

    let fro: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && fro > 0.0 {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * fro {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, n, p, q, sweeps);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].re.total_cmp(&a[i * n + i].re).then(i.cmp(&j)));
    let values = order.iter().map(|&k| a[k * n + k].re).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|i| v[i * n + k]).collect())
        .collect();
    EigenDecomposition { values, vectors, sweeps }
}

fn rotate(a: &mut [Complex64], v: &mut [Complex64], n: usize, p: usize, q: usize, sweep: usize) {
    let g = a[p * n + q];
    let b = g.norm();
    if b == 0.0 {
        return;
    }
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;
    // negligible against both diagonals: drop it once the sweep is warm
    if sweep > 4 && app.abs() + 100.0 * b == app.abs() && aqq.abs() + 100.0 * b == aqq.abs() {
        a[p * n + q] = Complex64::new(0.0, 0.0);
        a[q * n + p] = Complex64::new(0.0, 0.0);
        return;
    }
    // unit phase of the pivot, exactly real when g is real
    let e = Complex64::new(g.re / b, g.im / b);
    let theta = (aqq - app) / (2.0 * b);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // U restricted to (p, q): [[c, s], [-s e*, c e*]]
    let ec = e.conj();
    let m00 = Complex64::new(c, 0.0);
    let m01 = Complex64::new(s, 0.0);
    let m10 = ec * (-s);
    let m11 = ec * c;

    // A <- A U
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = akp * m00 + akq * m10;
        a[k * n + q] = akp * m01 + akq * m11;
    }
    // A <- U^H A
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = m00.conj() * apk + m10.conj() * aqk;
        a[q * n + k] = m01.conj() * apk + m11.conj() * aqk;
    }
    a[p * n + q] = Complex64::new(0.0, 0.0);
    a[q * n + p] = Complex64::new(0.0, 0.0);
    a[p * n + p].im = 0.0;
    a[q * n + q].im = 0.0;

    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = vkp * m00 + vkq * m10;
        v[k * n + q] = vkp * m01 + vkq * m11;
    }
}
