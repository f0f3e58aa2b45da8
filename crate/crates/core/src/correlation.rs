//! Correlation matrices rebuilt from eigensystems, and their dispersion
//! across a series.

use serde::Serialize;

use crate::error::{argument, Error, Result};
use crate::matcore::{symmetric_eigen, Matrix};
use crate::orientation::EigenSystem;

/// Diagonal entries of `V Λ Vᵀ` at or below this cannot be rescaled.
pub const SCALE_FLOOR: f64 = 1e-14;
/// Bound on symmetry error and diagonal deviation.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Most negative eigenvalue admitted.
pub const PSD_TOL: f64 = 1e-9;

/// Symmetric, unit-diagonal, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: Matrix,
}

impl CorrelationMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        if !entries.is_square() {
            return argument("correlation matrix must be square");
        }
        if entries.symmetry_error() > STRUCTURE_TOL {
            return argument("correlation matrix is not symmetric");
        }
        let n = entries.rows();
        if let Some(i) = (0..n).find(|&i| (entries[(i, i)] - 1.0).abs() > STRUCTURE_TOL) {
            return argument(format!("diagonal entry {i} is {}", entries[(i, i)]));
        }
        let out = Self { entries };
        let min = out.min_eigenvalue()?;
        if min < -PSD_TOL {
            return argument(format!("correlation matrix has eigenvalue {min}"));
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_matrix(self) -> Matrix {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (ev, _) = symmetric_eigen(&self.entries)?;
        Ok(ev.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Eigensystem with eigenvalues in descending order.
    pub fn eigensystem(&self) -> Result<EigenSystem> {
        let (ev, vecs) = symmetric_eigen(&self.entries)?;
        let order = crate::orientation::sort_order(&ev);
        let sorted: Vec<f64> = order.iter().map(|&k| ev[k]).collect();
        EigenSystem::new(vecs.select_columns(&order), sorted)
    }
}

/// `diag(1/s) · B Λ Bᵀ · diag(1/s)` with `s² = diag(B Λ Bᵀ)`.
///
/// `basis` need not be exactly orthonormal; the rescaling absorbs the
/// resulting diagonal drift and the diagonal is then set to exactly one.
pub fn reconstruct_correlation(basis: &Matrix, eigenvalues: &[f64]) -> Result<CorrelationMatrix> {
    if !basis.is_square() {
        return argument("basis must be square");
    }
    let n = basis.rows();
    if eigenvalues.len() != n {
        return argument(format!(
            "{} eigenvalues for dimension {n}",
            eigenvalues.len()
        ));
    }
    if eigenvalues.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return argument("eigenvalues must be finite and nonnegative");
    }
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..n)
                .map(|m| basis[(i, m)] * eigenvalues[m] * basis[(j, m)])
                .sum();
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let mut inv_s = Vec::with_capacity(n);
    for i in 0..n {
        let d = c[(i, i)];
        if d.is_nan() || d <= SCALE_FLOOR {
            return Err(Error::DegenerateScale { index: i, value: d });
        }
        inv_s.push(1.0 / d.sqrt());
    }
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = if i == j {
                1.0
            } else {
                c[(i, j)] * inv_s[i] * inv_s[j]
            };
        }
    }
    Ok(CorrelationMatrix { entries: c })
}

fn check_panel(panel: &Matrix) -> Result<()> {
    let (t, n) = (panel.rows(), panel.cols());
    if n == 0 {
        return argument("panel has no features");
    }
    if t <= n {
        return argument(format!(
            "need more records than features for a nonsingular estimate (T = {t}, N = {n})"
        ));
    }
    Ok(())
}

/// Column-centred covariance of a `records × features` panel, normalized by `T`.
pub fn sample_covariance(panel: &Matrix) -> Result<Matrix> {
    check_panel(panel)?;
    let (t, n) = (panel.rows(), panel.cols());
    let means: Vec<f64> = (0..n)
        .map(|j| (0..t).map(|r| panel[(r, j)]).sum::<f64>() / t as f64)
        .collect();
    let mut cov = Matrix::zeros(n, n);
    for r in 0..t {
        let row = panel.row(r);
        for i in 0..n {
            let di = row[i] - means[i];
            for j in i..n {
                cov[(i, j)] += di * (row[j] - means[j]);
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov[(i, j)] / t as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

/// Pearson correlation of the columns of a `records × features` panel.
pub fn sample_correlation(panel: &Matrix) -> Result<CorrelationMatrix> {
    let cov = sample_covariance(panel)?;
    let n = cov.rows();
    let mut inv_s = Vec::with_capacity(n);
    for i in 0..n {
        let d = cov[(i, i)];
        if d.is_nan() || d <= SCALE_FLOOR {
            return Err(Error::DegenerateScale { index: i, value: d });
        }
        inv_s.push(1.0 / d.sqrt());
    }
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let v = cov[(i, j)] * inv_s[i] * inv_s[j];
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(CorrelationMatrix { entries: c })
}

/// Statistics of one off-diagonal entry `(i, j)`, `i < j`, over a series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryDispersion {
    pub i: usize,
    pub j: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub stdev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionReport {
    pub dim: usize,
    pub samples: usize,
    /// False for a single sample, where every `stdev` is reported as 0.
    pub stdev_defined: bool,
    pub entries: Vec<EntryDispersion>,
}

impl DispersionReport {
    pub fn mean_stdev(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.iter().map(|e| e.stdev).sum::<f64>() / self.entries.len() as f64
    }

    /// True when no entry is more dispersed than in `baseline`.
    pub fn stdev_reduced_entrywise(&self, baseline: &DispersionReport) -> Result<bool> {
        if self.dim != baseline.dim {
            return argument("dispersion reports differ in dimension");
        }
        Ok(self
            .entries
            .iter()
            .zip(&baseline.entries)
            .all(|(a, b)| a.stdev <= b.stdev))
    }

    /// Fraction of entries less dispersed than in `baseline`.
    pub fn reduced_fraction(&self, baseline: &DispersionReport) -> Result<f64> {
        if self.dim != baseline.dim {
            return argument("dispersion reports differ in dimension");
        }
        if self.entries.is_empty() {
            return Ok(1.0);
        }
        let n = self
            .entries
            .iter()
            .zip(&baseline.entries)
            .filter(|(a, b)| a.stdev <= b.stdev)
            .count();
        Ok(n as f64 / self.entries.len() as f64)
    }
}

/// Per-entry min, max, mean and unbiased standard deviation over the
/// strictly upper triangle.
pub fn dispersion_report(series: &[CorrelationMatrix]) -> Result<DispersionReport> {
    let Some(first) = series.first() else {
        return argument("dispersion needs at least one matrix");
    };
    let n = first.dim();
    if series.iter().any(|c| c.dim() != n) {
        return argument("matrices differ in dimension");
    }
    let samples = series.len();
    let mut entries = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let values: Vec<f64> = series.iter().map(|c| c.get(i, j)).collect();
            let mean = values.iter().sum::<f64>() / samples as f64;
            let stdev = if samples > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            entries.push(EntryDispersion {
                i,
                j,
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean,
                stdev,
            });
        }
    }
    Ok(DispersionReport {
        dim: n,
        samples,
        stdev_defined: samples > 1,
        entries,
    })
}
