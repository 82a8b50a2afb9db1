//! The linear system `c_j x <= b_j` induced by one-bit sign data.
//!
//! A record with sign `r_j` and threshold `tau_j` says
//! `r_j (Tr(V_j X) - tau_j^2) >= 0`. Rows are stored negated,
//! `c_j = -r_j vec(V_j)`, `b_j = -r_j tau_j^2`, so the solver only ever sees the
//! `<=` convention.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::bounds::min_samples_dimension;
use crate::error::{Error, Result};
use crate::model::{dot, SensingEnsemble, SignalModel};
use crate::sampling::OneBitRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    LessEq,
    Eq,
}

/// `(n, model)` of systems that come from lifted measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftShape {
    pub n: usize,
    pub model: SignalModel,
}

#[derive(Debug, Clone)]
pub struct InequalitySystem {
    dim: usize,
    rows: Vec<f64>,
    rhs: Vec<f64>,
    kinds: Vec<RowKind>,
    row_sq_norms: Vec<f64>,
    total_sq_norm: f64,
    shape: Option<LiftShape>,
    below_dimension_bound: bool,
}

impl InequalitySystem {
    /// Generic system from row-major `rows` (`rhs.len() x dim`).
    pub fn new(dim: usize, rows: Vec<f64>, rhs: Vec<f64>, kinds: Vec<RowKind>) -> Result<Self> {
        if rows.len() != rhs.len() * dim {
            return Err(Error::DimensionMismatch { expected: rhs.len() * dim, got: rows.len() });
        }
        if kinds.len() != rhs.len() {
            return Err(Error::DimensionMismatch { expected: rhs.len(), got: kinds.len() });
        }
        let row_sq_norms: Vec<f64> = if dim == 0 {
            vec![0.0; rhs.len()]
        } else {
            rows.chunks_exact(dim).map(|r| dot(r, r)).collect()
        };
        let total_sq_norm = row_sq_norms.iter().sum();
        Ok(Self {
            dim,
            rows,
            rhs,
            kinds,
            row_sq_norms,
            total_sq_norm,
            shape: None,
            below_dimension_bound: false,
        })
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn kinds(&self) -> &[RowKind] {
        &self.kinds
    }

    pub fn row_sq_norms(&self) -> &[f64] {
        &self.row_sq_norms
    }

    pub fn total_sq_norm(&self) -> f64 {
        self.total_sq_norm
    }

    pub fn shape(&self) -> Option<LiftShape> {
        self.shape
    }

    /// Set when there are fewer rows than `(n^2 + n)/2 + 1`, the count below
    /// which the rows cannot bound a finite-volume region.
    pub fn below_dimension_bound(&self) -> bool {
        self.below_dimension_bound
    }

    /// `c_j x - b_j` for every row.
    pub fn slacks(&self, coords: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|j| dot(self.row(j), coords) - self.rhs[j]).collect()
    }

    /// `(c_j x - b_j)^+` for `<=` rows and `|c_j x - b_j|` for equality rows.
    pub fn residuals(&self, coords: &[f64]) -> Result<Vec<f64>> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: coords.len() });
        }
        Ok(self
            .slacks(coords)
            .into_iter()
            .zip(&self.kinds)
            .map(|(s, k)| match k {
                RowKind::LessEq => s.max(0.0),
                RowKind::Eq => s.abs(),
            })
            .collect())
    }

    pub fn max_residual(&self, coords: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.len() {
            let s = dot(self.row(j), coords) - self.rhs[j];
            let r = match self.kinds[j] {
                RowKind::LessEq => s,
                RowKind::Eq => s.abs(),
            };
            worst = worst.max(r);
        }
        worst
    }

    /// Text form: a header line `m d n model`, then one line per row with the
    /// kind (`le`/`eq`), `b_j` and the `d` entries of `c_j`, all floats with 17
    /// significant digits. Generic systems write `0 none` for `n model`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let (n, model) = match self.shape {
            Some(s) => (s.n, s.model.as_str()),
            None => (0, "none"),
        };
        writeln!(w, "{} {} {} {}", self.len(), self.dim, n, model)?;
        for j in 0..self.len() {
            let kind = match self.kinds[j] {
                RowKind::LessEq => "le",
                RowKind::Eq => "eq",
            };
            write!(w, "{} {:.16e}", kind, self.rhs[j])?;
            for v in self.row(j) {
                write!(w, " {v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse { line: 1, msg: format!("expected `m d n model`, got `{header}`") });
        }
        let num = |s: &str, line: usize| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse { line, msg: format!("bad integer `{s}`") })
        };
        let m = num(fields[0], 1)?;
        let dim = num(fields[1], 1)?;
        let n = num(fields[2], 1)?;
        let shape = match fields[3] {
            "none" => None,
            other => Some(LiftShape { n, model: other.parse()? }),
        };
        let mut rows = Vec::with_capacity(m * dim);
        let mut rhs = Vec::with_capacity(m);
        let mut kinds = Vec::with_capacity(m);
        for (idx, line) in lines.take(m) {
            let line = line?;
            let lineno = idx + 1;
            let mut it = line.split_whitespace();
            let kind = match it.next() {
                Some("le") => RowKind::LessEq,
                Some("eq") => RowKind::Eq,
                other => return Err(Error::Parse { line: lineno, msg: format!("bad row kind {other:?}") }),
            };
            let vals: Vec<f64> = it
                .map(|s| s.parse().map_err(|_| Error::Parse { line: lineno, msg: format!("bad float `{s}`") }))
                .collect::<Result<_>>()?;
            if vals.len() != dim + 1 {
                return Err(Error::Parse { line: lineno, msg: format!("expected {} values, got {}", dim + 1, vals.len()) });
            }
            kinds.push(kind);
            rhs.push(vals[0]);
            rows.extend_from_slice(&vals[1..]);
        }
        if rhs.len() != m {
            return Err(Error::Parse { line: rhs.len() + 2, msg: format!("expected {m} rows, got {}", rhs.len()) });
        }
        let mut sys = Self::new(dim, rows, rhs, kinds)?;
        if let Some(s) = shape {
            sys.shape = Some(s);
            sys.below_dimension_bound = m < min_samples_dimension(s.n);
        }
        Ok(sys)
    }
}

/// Builds the sign-data polyhedron in `c x <= b` form.
pub fn build_system(records: &[OneBitRecord], ensemble: &SensingEnsemble) -> Result<InequalitySystem> {
    if records.len() != ensemble.m() {
        return Err(Error::DimensionMismatch { expected: ensemble.m(), got: records.len() });
    }
    if let Some((row, r)) = records.iter().enumerate().find(|(_, r)| !(r.threshold >= 0.0)) {
        return Err(Error::NegativeThreshold { row, value: r.threshold });
    }
    let d = ensemble.dim();
    let mut rows = Vec::with_capacity(records.len() * d);
    let mut rhs = Vec::with_capacity(records.len());
    for (j, rec) in records.iter().enumerate() {
        let s = rec.sign.value();
        rows.extend(ensemble.lifted_row(j).iter().map(|v| -s * v));
        rhs.push(-s * rec.threshold * rec.threshold);
    }
    let m = records.len();
    let mut sys = InequalitySystem {
        dim: d,
        rows,
        rhs,
        kinds: vec![RowKind::LessEq; m],
        // negation leaves the norms untouched
        row_sq_norms: ensemble.row_sq_norms().to_vec(),
        total_sq_norm: ensemble.total_sq_norm(),
        shape: Some(LiftShape { n: ensemble.n(), model: ensemble.model() }),
        below_dimension_bound: false,
    };
    let required = min_samples_dimension(ensemble.n());
    if m < required {
        log::warn!("{m} one-bit rows is below the dimension bound {required} for n = {}", ensemble.n());
        sys.below_dimension_bound = true;
    }
    Ok(sys)
}
