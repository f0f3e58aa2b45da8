//! Directional statistics on evolving eigensystems.
//!
//! Oriented eigenbases are averaged as directions, not as angles: each
//! column of the filtered basis is the resultant of the weighted columns in
//! the window, renormalized to unit length. The orientation algorithm then
//! restores orthogonality and yields the filtered angle matrix.

use crate::error::{argument, Error, Result};
use crate::matcore::Matrix;
use crate::orientation::{
    orient_columns, orient_eigenvectors, rotation_from_angles, AngleMatrix, EigenSystem, Method,
    OrientationResult, ReflectionVec,
};
use crate::par::Execution;

/// Resultant norms below this are treated as cancelled.
pub const RESULTANT_FLOOR: f64 = 1e-12;

/// Inverse participation ratio `Σ v_i⁴` of the unit-normalized vector.
pub fn inverse_participation_ratio(v: &[f64]) -> Result<f64> {
    let sq: f64 = v.iter().map(|x| x * x).sum();
    if v.is_empty() || sq == 0.0 || !sq.is_finite() {
        return argument("participation needs a nonzero finite vector");
    }
    Ok(v.iter().map(|x| (x * x / sq).powi(2)).sum())
}

/// Participation score `1 / (N · IPR)`, in `[1/N, 1]`.
pub fn participation_score(v: &[f64]) -> Result<f64> {
    let ipr = inverse_participation_ratio(v)?;
    Ok(1.0 / (v.len() as f64 * ipr))
}

/// Participation score of every column of `basis`.
pub fn participation_scores(basis: &Matrix) -> Result<Vec<f64>> {
    (0..basis.cols())
        .map(|j| participation_score(&basis.column(j)))
        .collect()
}

/// Direction of the weighted resultant of `vectors`.
pub fn average_direction(vectors: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if vectors.is_empty() {
        return argument("cannot average an empty set of directions");
    }
    if vectors.len() != weights.len() {
        return argument("one weight per vector is required");
    }
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return argument("weights must be positive and finite");
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return argument("vectors differ in dimension");
    }
    let mut sum = vec![0.0; dim];
    for (v, &w) in vectors.iter().zip(weights) {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += w * x;
        }
    }
    let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < RESULTANT_FLOOR {
        return Err(Error::DegenerateDirection { norm });
    }
    Ok(sum.into_iter().map(|x| x / norm).collect())
}

/// Length of the mean unit phasor of a set of angles.
pub fn mean_resultant_length(angles: &[f64]) -> f64 {
    if angles.is_empty() {
        return 0.0;
    }
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    ((s / n).powi(2) + (c / n).powi(2)).sqrt()
}

/// Circular variance `1 - R̄`.
pub fn circular_variance(angles: &[f64]) -> f64 {
    1.0 - mean_resultant_length(angles)
}

/// Circular mean direction on `(-π, π]`; `None` when the resultant vanishes.
pub fn circular_mean(angles: &[f64]) -> Option<f64> {
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    if s.hypot(c) < RESULTANT_FLOOR {
        None
    } else {
        Some(crate::synth::wrap_angle(s.atan2(c)))
    }
}

/// Positive filter weights `h[0..K]`; `h[0]` multiplies the newest snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterKernel {
    weights: Vec<f64>,
    normalized: bool,
}

impl FilterKernel {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return argument("filter kernel needs at least one weight");
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return argument("filter weights must be positive and finite");
        }
        Ok(Self {
            weights,
            normalized: false,
        })
    }

    /// Builds a kernel rescaled to unit sum.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        Ok(Self::new(weights)?.to_normalized())
    }

    pub fn to_normalized(&self) -> Self {
        let total: f64 = self.weights.iter().sum();
        Self {
            weights: self.weights.iter().map(|w| w / total).collect(),
            normalized: true,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weighted mean lag in samples, `Σ k h[k] / Σ h[k]`.
    pub fn delay(&self) -> f64 {
        let total: f64 = self.weights.iter().sum();
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| k as f64 * w)
            .sum::<f64>()
            / total
    }
}

fn check_timestamps(timestamps: &[i64], len: usize) -> Result<()> {
    if timestamps.len() != len {
        return argument(format!(
            "{} timestamps for {len} snapshots",
            timestamps.len()
        ));
    }
    if timestamps.windows(2).any(|w| w[0] >= w[1]) {
        return argument("timestamps must be strictly increasing");
    }
    Ok(())
}

/// Time-indexed raw eigensystems, before orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    systems: Vec<EigenSystem>,
    timestamps: Vec<i64>,
}

impl RawSeries {
    pub fn new(systems: Vec<EigenSystem>, timestamps: Vec<i64>) -> Result<Self> {
        if let Some(first) = systems.first() {
            if systems.iter().any(|s| s.dim() != first.dim()) {
                return argument("all snapshots must share one dimension");
            }
        }
        check_timestamps(&timestamps, systems.len())?;
        Ok(Self {
            systems,
            timestamps,
        })
    }

    pub fn systems(&self) -> &[EigenSystem] {
        &self.systems
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    /// Orients every snapshot independently.
    pub fn orient(
        &self,
        method: Method,
        orient_to_first_orthant: bool,
        exec: Execution,
    ) -> Result<EigenSeries> {
        let snapshots = exec.try_map_range(self.systems.len(), |i| {
            orient_eigenvectors(&self.systems[i], method, orient_to_first_orthant)
        })?;
        EigenSeries::new(snapshots, self.timestamps.clone())
    }
}

/// Time-indexed oriented eigensystems sharing one dimension and method.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSeries {
    snapshots: Vec<OrientationResult>,
    timestamps: Vec<i64>,
}

impl EigenSeries {
    pub fn new(snapshots: Vec<OrientationResult>, timestamps: Vec<i64>) -> Result<Self> {
        if let Some(first) = snapshots.first() {
            if snapshots.iter().any(|s| s.dim() != first.dim()) {
                return argument("all snapshots must share one dimension");
            }
            if snapshots.iter().any(|s| s.method != first.method) {
                return argument("all snapshots must be oriented with one method");
            }
        }
        check_timestamps(&timestamps, snapshots.len())?;
        Ok(Self {
            snapshots,
            timestamps,
        })
    }

    pub fn snapshots(&self) -> &[OrientationResult] {
        &self.snapshots
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.snapshots.first().map(OrientationResult::dim)
    }

    pub fn method(&self) -> Option<Method> {
        self.snapshots.first().map(|s| s.method)
    }

    /// Angle `(k, j)` across the series.
    pub fn angle_series(&self, k: usize, j: usize) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.angles.get(k, j)).collect()
    }

    /// Static stabilization of every snapshot: rows `K..` of each angle matrix
    /// are zeroed and the oriented basis is rebuilt from the remaining angles.
    pub fn statically_stabilized(&self, informative: usize) -> Result<Self> {
        let snapshots = self
            .snapshots
            .iter()
            .map(|s| {
                let angles = static_stabilize(&s.angles, informative)?;
                let oriented_basis = rotation_from_angles(&angles);
                Ok(OrientationResult {
                    oriented_basis,
                    angles,
                    ..s.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(snapshots, self.timestamps.clone())
    }
}

/// Output of dynamic (and optionally static) stabilization.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizedSeries {
    /// Filtered oriented bases `𝒱̄[n]`, each in SO(N).
    pub bases: Vec<Matrix>,
    /// Angles `θ̃[n]` of the filtered bases.
    pub angle_matrices: Vec<AngleMatrix>,
    /// Reflections found while re-orienting the filtered columns.
    pub reflections: Vec<ReflectionVec>,
    /// Filtered eigenvalues `Λ̄[n]`, descending.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Timestamp of the newest snapshot in each window.
    pub timestamps: Vec<i64>,
    /// Weighted mean lag of the kernel, in samples.
    pub delay: f64,
}

impl StabilizedSeries {
    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn angle_series(&self, k: usize, j: usize) -> Vec<f64> {
        self.angle_matrices.iter().map(|a| a.get(k, j)).collect()
    }

    /// Zeroes rows `K..` of every filtered angle matrix and rebuilds the bases.
    pub fn statically_stabilized(&self, informative: usize) -> Result<Self> {
        let angle_matrices = self
            .angle_matrices
            .iter()
            .map(|a| static_stabilize(a, informative))
            .collect::<Result<Vec<_>>>()?;
        let bases = angle_matrices.iter().map(rotation_from_angles).collect();
        Ok(Self {
            bases,
            angle_matrices,
            ..self.clone()
        })
    }
}

fn check_filterable(series: &EigenSeries, kernel: &FilterKernel) -> Result<()> {
    if series.len() < kernel.len() {
        return argument(format!(
            "series of length {} is shorter than the kernel ({})",
            series.len(),
            kernel.len()
        ));
    }
    Ok(())
}

/// Per-index convolution of the sorted eigenvalues with the normalized kernel,
/// valid windows only.
pub fn filter_eigenvalues(series: &EigenSeries, kernel: &FilterKernel) -> Result<Vec<Vec<f64>>> {
    check_filterable(series, kernel)?;
    let h = kernel.to_normalized();
    let k_len = h.len();
    Ok((k_len - 1..series.len())
        .map(|n| {
            let dim = series.snapshots[n].sorted_eigenvalues.len();
            (0..dim)
                .map(|i| {
                    h.weights()
                        .iter()
                        .enumerate()
                        .map(|(k, w)| w * series.snapshots[n - k].sorted_eigenvalues[i])
                        .sum()
                })
                .collect()
        })
        .collect())
}

/// Dynamic stabilization with the default re-orientation method (arctan2).
pub fn filter_eigenbases(series: &EigenSeries, kernel: &FilterKernel) -> Result<StabilizedSeries> {
    filter_eigenbases_with(series, kernel, Method::Arctan2, Execution::default())
}

/// Dynamic stabilization.
///
/// For each valid window ending at `n`: `M_h = Σ_k h[k] 𝒱[n-k]`, every column
/// rescaled to unit length, then oriented (sorted by the filtered eigenvalues)
/// and rebuilt from its angles. Windows are processed independently.
pub fn filter_eigenbases_with(
    series: &EigenSeries,
    kernel: &FilterKernel,
    method: Method,
    exec: Execution,
) -> Result<StabilizedSeries> {
    check_filterable(series, kernel)?;
    let filtered_eigenvalues = filter_eigenvalues(series, kernel)?;
    let k_len = kernel.len();
    let dim = series.dim().unwrap_or(0);
    let windows = series.len() + 1 - k_len;

    let results = exec.try_map_range(windows, |m| {
        let n = m + k_len - 1;
        let mut mh = Matrix::zeros(dim, dim);
        for (k, &w) in kernel.weights().iter().enumerate() {
            let v = &series.snapshots[n - k].oriented_basis;
            for i in 0..dim {
                for j in 0..dim {
                    mh[(i, j)] += w * v[(i, j)];
                }
            }
        }
        for j in 0..dim {
            let norm = (0..dim).map(|i| mh[(i, j)].powi(2)).sum::<f64>().sqrt();
            if norm < RESULTANT_FLOOR {
                return Err(Error::DegenerateDirection { norm });
            }
            mh.scale_column(j, 1.0 / norm);
        }
        let oriented = orient_columns(&mh, &filtered_eigenvalues[m], method, false)?;
        let basis = rotation_from_angles(&oriented.angles);
        Ok((
            basis,
            oriented.angles,
            oriented.reflections,
            oriented.sorted_eigenvalues,
        ))
    })?;

    let mut out = StabilizedSeries {
        bases: Vec::with_capacity(windows),
        angle_matrices: Vec::with_capacity(windows),
        reflections: Vec::with_capacity(windows),
        eigenvalues: Vec::with_capacity(windows),
        timestamps: series.timestamps[k_len - 1..].to_vec(),
        delay: kernel.delay(),
    };
    for (basis, angles, reflections, eigenvalues) in results {
        out.bases.push(basis);
        out.angle_matrices.push(angles);
        out.reflections.push(reflections);
        out.eigenvalues.push(eigenvalues);
    }
    Ok(out)
}

/// Keeps the angles of the first `informative` modes and zeroes the rest.
pub fn static_stabilize(angles: &AngleMatrix, informative: usize) -> Result<AngleMatrix> {
    let n = angles.dim();
    if informative > n.saturating_sub(1) {
        return argument(format!(
            "informative count {informative} exceeds the {} reducible modes",
            n.saturating_sub(1)
        ));
    }
    let mut out = angles.clone();
    for k in informative..n.saturating_sub(1) {
        out.set_row(k, &vec![0.0; n - k - 1]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{compose_cascade, det, orthonormality_error};
    use crate::synth::{random_angle_matrix, wobble_series, SeededRng, WobbleSpec};
    use std::f64::consts::PI;

    #[test]
    fn participation_examples() {
        let n = 5;
        let flat = vec![1.0 / (n as f64).sqrt(); n];
        assert!((participation_score(&flat).unwrap() - 1.0).abs() < 1e-15);
        let one_hot = [0.0, 0.0, 1.0, 0.0];
        assert_eq!(inverse_participation_ratio(&one_hot).unwrap(), 1.0);
        assert_eq!(participation_score(&one_hot).unwrap(), 0.25);
        let half = 0.5f64.sqrt();
        let v = [half, half, 0.0, 0.0];
        assert!((inverse_participation_ratio(&v).unwrap() - 0.5).abs() < 1e-15);
        assert!((participation_score(&v).unwrap() - 0.5).abs() < 1e-15);
        assert!(participation_score(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn average_direction_examples() {
        let e1 = vec![1.0, 0.0, 0.0];
        let e2 = vec![0.0, 1.0, 0.0];
        assert_eq!(average_direction(std::slice::from_ref(&e1), &[2.0]).unwrap(), e1);
        assert_eq!(
            average_direction(&[e1.clone(), e1.clone()], &[1.0, 1.0]).unwrap(),
            e1
        );
        let mid = average_direction(&[e1.clone(), e2], &[1.0, 1.0]).unwrap();
        let h = 0.5f64.sqrt();
        assert!((mid[0] - h).abs() < 1e-15 && (mid[1] - h).abs() < 1e-15);
        let neg = vec![-1.0, 0.0, 0.0];
        assert!(matches!(
            average_direction(&[e1.clone(), neg], &[1.0, 1.0]),
            Err(Error::DegenerateDirection { .. })
        ));
        assert!(average_direction(&[e1], &[0.0]).is_err());
    }

    #[test]
    fn circular_statistics() {
        assert!((mean_resultant_length(&[0.3, 0.3, 0.3]) - 1.0).abs() < 1e-15);
        assert!(mean_resultant_length(&[0.0, PI]) < 1e-15);
        assert!(circular_mean(&[0.0, PI]).is_none());
        let m = circular_mean(&[PI - 0.1, -PI + 0.1]).unwrap();
        assert!((m - PI).abs() < 1e-12);
        assert!((circular_variance(&[1.0, 1.0]) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_delay_and_normalization() {
        let k = FilterKernel::normalized(vec![1.0, 2.0, 3.0, 2.0, 1.0]).unwrap();
        assert!((k.delay() - 2.0).abs() < 1e-15);
        assert!((k.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(k.is_normalized());
        assert!(FilterKernel::new(vec![1.0, -1.0]).is_err());
        assert!(FilterKernel::new(vec![]).is_err());
        assert_eq!(FilterKernel::new(vec![3.0]).unwrap().delay(), 0.0);
    }

    fn series_of(bases: Vec<Matrix>, eigenvalues: Vec<Vec<f64>>) -> EigenSeries {
        let systems = bases
            .into_iter()
            .zip(eigenvalues)
            .map(|(b, e)| EigenSystem::new(b, e).unwrap())
            .collect::<Vec<_>>();
        let ts = (0..systems.len() as i64).collect();
        RawSeries::new(systems, ts)
            .unwrap()
            .orient(Method::Arctan2, false, Execution::Sequential)
            .unwrap()
    }

    #[test]
    fn filter_eigenvalues_examples() {
        let r = compose_cascade(2, 0, &[0.2]).unwrap();
        let s = series_of(vec![r.clone(), r], vec![vec![4.0, 1.0], vec![2.0, 1.0]]);
        let k = FilterKernel::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(filter_eigenvalues(&s, &k).unwrap(), vec![vec![3.0, 1.0]]);
        let unit = FilterKernel::new(vec![1.0]).unwrap();
        assert_eq!(
            filter_eigenvalues(&s, &unit).unwrap(),
            vec![vec![4.0, 1.0], vec![2.0, 1.0]]
        );
    }

    #[test]
    fn constant_series_is_fixed_point() {
        let mut rng = SeededRng::new(4);
        let basis = rotation_from_angles(&random_angle_matrix(5, &mut rng));
        let ev = vec![5.0, 4.0, 3.0, 2.0, 1.0];
        let s = series_of(vec![basis.clone(); 8], vec![ev.clone(); 8]);
        let k = FilterKernel::normalized(vec![1.0, 2.0, 3.0, 2.0, 1.0]).unwrap();
        let out = filter_eigenbases(&s, &k).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out.timestamps, vec![4, 5, 6, 7]);
        assert!((out.delay - 2.0).abs() < 1e-15);
        for (b, e) in out.bases.iter().zip(&out.eigenvalues) {
            assert!(b.max_abs_diff(&basis) < 1e-9);
            for (x, y) in e.iter().zip(&ev) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_kernel_is_identity_on_bases() {
        let spec = WobbleSpec::standard(6, 3, 0.3, 12, 8);
        let s = wobble_series(&spec)
            .unwrap()
            .orient(Method::Arcsin, false, Execution::Sequential)
            .unwrap();
        let out = filter_eigenbases(&s, &FilterKernel::new(vec![1.0]).unwrap()).unwrap();
        for (b, snap) in out.bases.iter().zip(s.snapshots()) {
            assert!(b.max_abs_diff(&snap.oriented_basis) < 1e-9);
        }
    }

    #[test]
    fn filtered_bases_are_rotations() {
        let spec = WobbleSpec::standard(7, 3, 0.4, 20, 13);
        let s = wobble_series(&spec)
            .unwrap()
            .orient(Method::Arctan2, false, Execution::Sequential)
            .unwrap();
        let k = FilterKernel::new(vec![0.3, 1.7, 0.9]).unwrap();
        let out = filter_eigenbases(&s, &k).unwrap();
        assert_eq!(out.len(), 18);
        for b in &out.bases {
            assert!(orthonormality_error(b) < 1e-9);
            assert!((det(b).unwrap() - 1.0).abs() < 1e-9);
        }
        let seq = filter_eigenbases_with(&s, &k, Method::Arctan2, Execution::Sequential).unwrap();
        assert_eq!(seq, out);
    }

    #[test]
    fn filtering_reduces_wobble() {
        let spec = WobbleSpec::standard(7, 3, 0.2, 40, 21);
        let s = wobble_series(&spec)
            .unwrap()
            .orient(Method::Arctan2, false, Execution::Sequential)
            .unwrap();
        let k = FilterKernel::normalized(vec![1.0, 2.0, 3.0, 2.0, 1.0]).unwrap();
        let out = filter_eigenbases(&s, &k).unwrap();
        let raw = circular_variance(&s.angle_series(0, 1));
        let filtered = circular_variance(&out.angle_series(0, 1));
        assert!(filtered < raw, "filtered {filtered} raw {raw}");
    }

    #[test]
    fn short_series_is_rejected() {
        let s = series_of(vec![Matrix::identity(2)], vec![vec![2.0, 1.0]]);
        let k = FilterKernel::new(vec![1.0, 1.0]).unwrap();
        assert!(filter_eigenbases(&s, &k).is_err());
        assert!(filter_eigenvalues(&s, &k).is_err());
    }

    #[test]
    fn static_stabilize_zero_pattern() {
        let mut rng = SeededRng::new(9);
        let a = random_angle_matrix(7, &mut rng);
        let s = static_stabilize(&a, 3).unwrap();
        for k in 0..6 {
            for j in (k + 1)..7 {
                if k < 3 {
                    assert_eq!(s.get(k, j), a.get(k, j));
                } else {
                    assert_eq!(s.get(k, j), 0.0);
                }
            }
        }
        assert_eq!(static_stabilize(&a, 6).unwrap(), a);
        let zero = static_stabilize(&a, 0).unwrap();
        assert_eq!(zero, AngleMatrix::zeros(7));
        assert_eq!(rotation_from_angles(&zero), Matrix::identity(7));
        assert!(static_stabilize(&a, 7).is_err());
        // R₁ R₂ R₃ I
        let regen = rotation_from_angles(&s);
        let mut expected = Matrix::identity(7);
        for k in (0..3).rev() {
            expected = &compose_cascade(7, k, a.row(k)).unwrap() * &expected;
        }
        assert!(regen.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn timestamps_must_increase() {
        let sys = EigenSystem::new(Matrix::identity(2), vec![2.0, 1.0]).unwrap();
        assert!(RawSeries::new(vec![sys.clone(), sys.clone()], vec![1, 1]).is_err());
        assert!(RawSeries::new(vec![sys.clone(), sys], vec![1, 2]).is_ok());
    }
}
