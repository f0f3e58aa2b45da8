//! Seeded synthetic generators: orthonormal bases, wobbling eigenbasis
//! series, and Gaussian data panels with optional spikes.
//!
//! All randomness comes from [`SeededRng`], a ChaCha8 stream keyed by a
//! 64-bit seed, so fixtures are reproducible across platforms.

use std::f64::consts::PI;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dirstats::RawSeries;
use crate::error::{argument, Result};
use crate::matcore::Matrix;
use crate::orientation::{rotation_from_angles, AngleMatrix, EigenSystem};

/// Deterministic random source.
///
/// Uniforms are `(next_u64 >> 11) · 2⁻⁵³` from a ChaCha8 stream seeded with
/// `ChaCha8Rng::seed_from_u64(seed)`. Gaussians use the Box-Muller cosine branch.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    /// Uniform on `(-π, π]`.
    pub fn major_angle(&mut self) -> f64 {
        PI - 2.0 * PI * self.uniform()
    }

    /// Uniform on `[-π/2, π/2)`.
    pub fn minor_angle(&mut self) -> f64 {
        self.uniform_in(-PI / 2.0, PI / 2.0)
    }
}

/// Wraps an angle onto `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// Angle matrix with major first angles and minor remaining angles.
pub fn random_angle_matrix(dim: usize, rng: &mut SeededRng) -> AngleMatrix {
    let mut angles = AngleMatrix::zeros(dim);
    for k in 0..dim.saturating_sub(1) {
        angles.set(k, k + 1, rng.major_angle());
        for j in (k + 2)..dim {
            angles.set(k, j, rng.minor_angle());
        }
    }
    angles
}

/// Composes `N(N-1)/2` random Givens rotations into an orthonormal basis.
/// With `force_reflection` the last column is negated, giving `det = -1`.
pub fn random_orthonormal(dim: usize, seed: u64, force_reflection: bool) -> Result<Matrix> {
    if dim < 2 {
        return argument(format!("dimension must be at least 2, got {dim}"));
    }
    let mut rng = SeededRng::new(seed);
    let mut basis = rotation_from_angles(&random_angle_matrix(dim, &mut rng));
    if force_reflection {
        basis.scale_column(dim - 1, -1.0);
    }
    Ok(basis)
}

/// Haar-distributed orthogonal matrix (either determinant) from Gram-Schmidt
/// on a Gaussian matrix. Independent of the Givens machinery.
pub fn haar_orthonormal(dim: usize, rng: &mut SeededRng) -> Matrix {
    loop {
        let mut cols: Vec<Vec<f64>> = (0..dim)
            .map(|_| (0..dim).map(|_| rng.gaussian()).collect())
            .collect();
        let mut ok = true;
        for j in 0..dim {
            for p in 0..j {
                let (head, tail) = cols.split_at_mut(j);
                let dot: f64 = head[p].iter().zip(&tail[0]).map(|(a, b)| a * b).sum();
                for (x, q) in tail[0].iter_mut().zip(&head[p]) {
                    *x -= dot * q;
                }
            }
            let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|x| *x /= norm);
        }
        if ok {
            // A second pass restores orthogonality lost to roundoff.
            for j in 0..dim {
                for p in 0..j {
                    let (head, tail) = cols.split_at_mut(j);
                    let dot: f64 = head[p].iter().zip(&tail[0]).map(|(a, b)| a * b).sum();
                    for (x, q) in tail[0].iter_mut().zip(&head[p]) {
                        *x -= dot * q;
                    }
                }
                let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
                cols[j].iter_mut().for_each(|x| *x /= norm);
            }
            return Matrix::from_columns(&cols).expect("finite by construction");
        }
    }
}

/// `λ_k ∝ 2^{-k}`, scaled so the profile sums to `dim` like a correlation spectrum.
pub fn geometric_profile(dim: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|k| 0.5f64.powi(k as i32)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x * dim as f64 / total).collect()
}

/// Parity of the reflection pattern injected into generated bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ReflectionParity {
    /// No reflection; every basis is a pure rotation.
    #[default]
    Even,
    /// The last eigenvector is negated, so every basis has `det = -1`.
    Odd,
}

/// Recipe for a wobbling eigenbasis series.
#[derive(Debug, Clone, PartialEq)]
pub struct WobbleSpec {
    pub dim: usize,
    pub base_angles: AngleMatrix,
    /// Leading modes whose first angle wobbles around its base value.
    /// Remaining reducible modes are redrawn uniformly at every step.
    pub directed_modes: usize,
    pub angle_noise_sigma: f64,
    pub series_length: usize,
    pub seed: u64,
    pub reflection_parity: ReflectionParity,
}

impl WobbleSpec {
    /// Directed modes sit near the edge of the arcsin range (first angle
    /// `±(π/2 - 0.08)`, alternating in sign) with small fixed trailing angles.
    pub fn standard(
        dim: usize,
        directed_modes: usize,
        angle_noise_sigma: f64,
        series_length: usize,
        seed: u64,
    ) -> Self {
        let mut base = AngleMatrix::zeros(dim);
        for k in 0..directed_modes.min(dim.saturating_sub(1)) {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            base.set(k, k + 1, sign * (PI / 2.0 - 0.08));
            for j in (k + 2)..dim {
                let t = if (j - k) % 2 == 0 { 0.25 } else { -0.15 };
                base.set(k, j, t);
            }
        }
        Self {
            dim,
            base_angles: base,
            directed_modes,
            angle_noise_sigma,
            series_length,
            seed,
            reflection_parity: ReflectionParity::Even,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return argument("wobble dimension must be at least 2");
        }
        if self.base_angles.dim() != self.dim {
            return argument("base angle matrix does not match the dimension");
        }
        if self.directed_modes > self.dim - 1 {
            return argument(format!(
                "at most {} directed modes fit in dimension {}",
                self.dim - 1,
                self.dim
            ));
        }
        if !(self.angle_noise_sigma >= 0.0 && self.angle_noise_sigma.is_finite()) {
            return argument("angle noise sigma must be finite and nonnegative");
        }
        if self.series_length == 0 {
            return argument("series length must be at least 1");
        }
        Ok(())
    }
}

/// Generates the raw (un-oriented) snapshots described by `spec`.
///
/// Step `n` perturbs the first angle of each directed mode by `N(0, σ²)`,
/// redraws every undirected mode, rebuilds the basis from the angles, applies
/// the reflection parity and attaches [`geometric_profile`] eigenvalues.
pub fn wobble_series(spec: &WobbleSpec) -> Result<RawSeries> {
    spec.validate()?;
    let n = spec.dim;
    let mut rng = SeededRng::new(spec.seed);
    let eigenvalues = geometric_profile(n);
    let mut systems = Vec::with_capacity(spec.series_length);
    for _ in 0..spec.series_length {
        let mut angles = spec.base_angles.clone();
        for k in 0..spec.directed_modes {
            let base = angles.get(k, k + 1);
            let noisy = if spec.angle_noise_sigma > 0.0 {
                wrap_angle(base + spec.angle_noise_sigma * rng.gaussian())
            } else {
                base
            };
            angles.set(k, k + 1, noisy);
        }
        for k in spec.directed_modes..n - 1 {
            angles.set(k, k + 1, rng.major_angle());
            for j in (k + 2)..n {
                angles.set(k, j, rng.minor_angle());
            }
        }
        let mut basis = rotation_from_angles(&angles);
        if spec.reflection_parity == ReflectionParity::Odd {
            basis.scale_column(n - 1, -1.0);
        }
        systems.push(EigenSystem::new(basis, eigenvalues.clone())?);
    }
    let timestamps = (0..spec.series_length as i64).collect();
    RawSeries::new(systems, timestamps)
}

/// `records × features` panel of independent standard normals.
pub fn gaussian_panel(records: usize, features: usize, rng: &mut SeededRng) -> Matrix {
    let data = (0..records * features).map(|_| rng.gaussian()).collect();
    Matrix::new(records, features, data).expect("finite by construction")
}

/// Gaussian panel whose population covariance is `I + Σ (λ_k - 1) u_k u_kᵀ`
/// with Haar-random orthonormal spike directions `u_k`.
pub fn spiked_panel(records: usize, features: usize, spikes: &[f64], seed: u64) -> Result<Matrix> {
    if spikes.len() > features {
        return argument("more spikes than features");
    }
    if spikes.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return argument("spike variances must be positive and finite");
    }
    let mut rng = SeededRng::new(seed);
    let directions = haar_orthonormal(features, &mut rng);
    // Σ^{1/2} = I + Σ (√λ_k - 1) u_k u_kᵀ for orthonormal u_k.
    let mut root = Matrix::identity(features);
    for (k, &spike) in spikes.iter().enumerate() {
        let u = directions.column(k);
        let w = spike.sqrt() - 1.0;
        for i in 0..features {
            for j in 0..features {
                root[(i, j)] += w * u[i] * u[j];
            }
        }
    }
    let z = gaussian_panel(records, features, &mut rng);
    z.matmul(&root)
}
