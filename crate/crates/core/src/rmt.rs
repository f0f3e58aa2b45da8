//! Marchenko–Pastur noise model, informative-mode classification and
//! shrinkage of the noise subspace.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{argument, Result};
use crate::matcore::{apply_cascade, apply_cascade_transposed, compose_cascade, Matrix};
use crate::orientation::OrientationResult;

/// Aspect ratio, support edges and scale of a (rescaled) MP law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpModel {
    pub q: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub lambda_bar: f64,
}

impl MpModel {
    pub fn new(q: f64, lambda_bar: f64) -> Result<Self> {
        let (lambda_minus, lambda_plus) = mp_support(q)?;
        if !(lambda_bar > 0.0 && lambda_bar.is_finite()) {
            return argument(format!("lambda_bar must be positive, got {lambda_bar}"));
        }
        Ok(Self {
            q,
            lambda_minus,
            lambda_plus,
            lambda_bar,
        })
    }

    /// Support of the rescaled density, `λ̄·[λ₋, λ₊]`.
    pub fn scaled_support(&self) -> (f64, f64) {
        (
            self.lambda_bar * self.lambda_minus,
            self.lambda_bar * self.lambda_plus,
        )
    }

    pub fn upper_edge(&self) -> f64 {
        self.lambda_bar * self.lambda_plus
    }

    pub fn density(&self, lambda: f64) -> f64 {
        rescaled_mp_density(lambda, self.q, self.lambda_bar)
    }

    /// `(λ, ρ(λ))` at `samples` cosine-spaced points spanning the scaled
    /// support, endpoints included.
    pub fn density_grid(&self, samples: usize) -> Result<Vec<(f64, f64)>> {
        if samples < 2 {
            return argument("a density grid needs at least two samples");
        }
        let (lo, hi) = self.scaled_support();
        let centre = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        Ok((0..samples)
            .map(|i| {
                let t = PI * i as f64 / (samples - 1) as f64;
                let lambda = if i == 0 {
                    lo
                } else if i == samples - 1 {
                    hi
                } else {
                    centre - half * t.cos()
                };
                (lambda, self.density(lambda))
            })
            .collect())
    }
}

/// `((1 - √q)², (1 + √q)²)`.
pub fn mp_support(q: f64) -> Result<(f64, f64)> {
    if !(q > 0.0 && q.is_finite()) {
        return argument(format!("aspect ratio q must be positive, got {q}"));
    }
    let r = q.sqrt();
    Ok(((1.0 - r).powi(2), (1.0 + r).powi(2)))
}

/// MP density for unit-variance noise. Zero outside the support; `NaN` for
/// `q ≤ 0`. For `q > 1` this is the continuous part only, of mass `1/q`.
pub fn mp_density(lambda: f64, q: f64) -> f64 {
    let Ok((lo, hi)) = mp_support(q) else {
        return f64::NAN;
    };
    if !(lambda > lo && lambda < hi) {
        return 0.0;
    }
    ((hi - lambda) * (lambda - lo)).sqrt() / (2.0 * PI * q * lambda)
}

/// `ρ(λ/λ̄) / λ̄`.
pub fn rescaled_mp_density(lambda: f64, q: f64, lambda_bar: f64) -> f64 {
    if lambda_bar.is_nan() || lambda_bar <= 0.0 {
        return f64::NAN;
    }
    mp_density(lambda / lambda_bar, q) / lambda_bar
}

/// Split of the modes into an informative prefix and the noise remainder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeClassification {
    pub informative: Vec<usize>,
    pub noise: Vec<usize>,
    /// Model tested at each step; the last one is the step that stopped.
    pub steps: Vec<MpModel>,
}

impl ModeClassification {
    pub fn informative_count(&self) -> usize {
        self.informative.len()
    }

    /// Model fitted to the final noise block.
    pub fn noise_model(&self) -> Option<&MpModel> {
        self.steps.last()
    }
}

/// [`classify_modes_with`] at edge multiplier 1.
pub fn classify_modes(eigenvalues: &[f64], records: usize) -> Result<ModeClassification> {
    classify_modes_with(eigenvalues, records, 1.0)
}

/// Peels informative modes off the top of a descending spectrum.
///
/// At step `K`, `λ̄` is the mean of modes `K..N`, `q' = (N - K)/T`, and mode
/// `K` is informative iff it exceeds `multiplier · λ̄ · (1 + √q')²`.
pub fn classify_modes_with(
    eigenvalues: &[f64],
    records: usize,
    edge_multiplier: f64,
) -> Result<ModeClassification> {
    let n = eigenvalues.len();
    if n < 2 {
        return argument("classification needs at least two modes");
    }
    if records <= n {
        return argument(format!(
            "need more records than modes (T = {records}, N = {n})"
        ));
    }
    if !(edge_multiplier > 0.0 && edge_multiplier.is_finite()) {
        return argument("edge multiplier must be positive");
    }
    if eigenvalues.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return argument("eigenvalues must be finite and nonnegative");
    }
    if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
        return argument("eigenvalues must be sorted in descending order");
    }

    let mut steps = Vec::new();
    let mut k = 0;
    while k < n - 1 {
        let tail = &eigenvalues[k..];
        let lambda_bar = tail.iter().sum::<f64>() / tail.len() as f64;
        if lambda_bar <= 0.0 {
            break;
        }
        let model = MpModel::new((n - k) as f64 / records as f64, lambda_bar)?;
        steps.push(model);
        if eigenvalues[k] > edge_multiplier * model.upper_edge() {
            k += 1;
        } else {
            break;
        }
    }
    Ok(ModeClassification {
        informative: (0..k).collect(),
        noise: (k..n).collect(),
        steps,
    })
}

fn check_informative(result: &OrientationResult, informative: usize) -> Result<()> {
    let n = result.dim();
    if informative >= n {
        return argument(format!(
            "informative count {informative} must be below the dimension {n}"
        ));
    }
    Ok(())
}

/// `W = R_Kᵀ ⋯ R₁ᵀ 𝒱`, together with the cascades `R₁ … R_K`.
///
/// `W` has an identity block in its leading `K × K` corner and no coupling
/// between that block and the rest.
pub fn rotate_away_informative(
    result: &OrientationResult,
    informative: usize,
) -> Result<(Matrix, Vec<Matrix>)> {
    check_informative(result, informative)?;
    let n = result.dim();
    let mut w = result.oriented_basis.clone();
    let mut cascades = Vec::with_capacity(informative);
    for k in 0..informative {
        let row = result.angles.row(k);
        apply_cascade_transposed(&mut w, k, row);
        cascades.push(compose_cascade(n, k, row)?);
    }
    Ok((w, cascades))
}

/// `R₁ ⋯ R_K · w`, undoing [`rotate_away_informative`].
pub fn rotate_back(w: &Matrix, cascades: &[Matrix]) -> Result<Matrix> {
    let mut out = w.clone();
    for r in cascades.iter().rev() {
        out = r.matmul(&out)?;
    }
    Ok(out)
}

/// `α·C + (1 - α)·I` on a correlation matrix.
pub fn lw_shrink(corr: &Matrix, alpha: f64) -> Result<Matrix> {
    check_alpha(alpha)?;
    if !corr.is_square() {
        return argument("correlation matrix must be square");
    }
    let scale = corr.max_abs().max(1.0);
    if corr.symmetry_error() > 1e-8 * scale {
        return argument("correlation matrix is not symmetric");
    }
    let n = corr.rows();
    if (0..n).any(|i| (corr[(i, i)] - 1.0).abs() > 1e-8) {
        return argument("correlation matrix must have a unit diagonal");
    }
    let mut out = corr.clone();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = alpha * corr[(i, j)] + if i == j { 1.0 - alpha } else { 0.0 };
        }
    }
    Ok(out)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return argument(format!("shrinkage weight must lie in [0, 1], got {alpha}"));
    }
    Ok(())
}

/// Shrinks only the noise block toward the identity.
///
/// With `Q = R₁ ⋯ R_K` and `W = Qᵀ𝒱 = diag(I_K, W_n)`, the rotated matrix is
/// `diag(Λ_K, W_n Λ_n W_nᵀ)`. The noise block is blended with `I`, then the
/// whole is rotated back by `Q`. `eigenvalues` follow the column order of `𝒱`.
pub fn shrink_noise_subspace(
    result: &OrientationResult,
    eigenvalues: &[f64],
    informative: usize,
    alpha: f64,
) -> Result<Matrix> {
    check_alpha(alpha)?;
    let n = result.dim();
    if eigenvalues.len() != n {
        return argument(format!(
            "{} eigenvalues for dimension {n}",
            eigenvalues.len()
        ));
    }
    if eigenvalues.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return argument("eigenvalues must be finite and nonnegative");
    }
    let (w, _) = rotate_away_informative(result, informative)?;

    let mut rotated = Matrix::zeros(n, n);
    for (i, &lambda) in eigenvalues.iter().enumerate().take(informative) {
        rotated[(i, i)] = lambda;
    }
    for i in informative..n {
        for j in i..n {
            let b: f64 = (informative..n)
                .map(|m| w[(i, m)] * eigenvalues[m] * w[(j, m)])
                .sum();
            let blended = alpha * b + if i == j { 1.0 - alpha } else { 0.0 };
            rotated[(i, j)] = blended;
            rotated[(j, i)] = blended;
        }
    }

    // Q · rotated · Qᵀ, applying the cascades from both sides.
    for k in (0..informative).rev() {
        let row = result.angles.row(k);
        apply_cascade(&mut rotated, k, row);
        let mut t = rotated.transpose();
        apply_cascade(&mut t, k, row);
        rotated = t;
    }
    rotated.symmetrize();
    Ok(rotated)
}
