//! Consistent orientation of eigenvector matrices.
//!
//! An orthonormal eigenvector matrix `V` is factored as `Rᵀ V S = I`, where
//! `R = R₁ R₂ ⋯ R_{N-1}` is a product of Givens cascades (one per reducible
//! subspace) and `S = diag(s)` holds the reflections. The oriented basis
//! `𝒱 = V S = R` is then a pure rotation away from the identity, and the
//! `N(N-1)/2` cascade angles describe where every eigenvector points.
//!
//! Two solvers are provided for the cascade angles:
//!
//! * [`Method::Arcsin`] reflects each eigenvector into the front hemisphere of
//!   its constituent axis before rotating, so every angle is minor
//!   (`[-π/2, π/2]`) and reflections may appear in any subspace.
//! * [`Method::Arctan2`] lets the first rotation of each subspace sweep the
//!   full circle (`(-π, π]`), which absorbs the reflection. Only the last,
//!   irreducible subspace can then carry a reflection.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::matcore::{apply_cascade, apply_cascade_transposed, orthonormality_error, Matrix};

/// Orthonormality tolerance for [`EigenSystem::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-8;
/// An entry is a structural zero when `|a_k| <= ZERO_REL_TOL * ‖a‖`.
pub const ZERO_REL_TOL: f64 = 1e-13;

/// Angle solver used while orienting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Arcsin,
    #[default]
    Arctan2,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Arcsin => "arcsin",
            Method::Arctan2 => "arctan2",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arcsin" => Ok(Method::Arcsin),
            "arctan2" => Ok(Method::Arctan2),
            other => argument(format!(
                "unknown method '{other}' (expected arcsin or arctan2)"
            )),
        }
    }
}

/// Orthonormal eigenvector matrix (eigenvectors in columns) plus eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    basis: Matrix,
    eigenvalues: Vec<f64>,
}

impl EigenSystem {
    pub fn new(basis: Matrix, eigenvalues: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(basis, eigenvalues, ORTHONORMAL_TOL)
    }

    pub fn with_tolerance(basis: Matrix, eigenvalues: Vec<f64>, tol: f64) -> Result<Self> {
        if !basis.is_square() || basis.rows() == 0 {
            return argument(format!(
                "eigenvector matrix must be square and nonempty, got {}x{}",
                basis.rows(),
                basis.cols()
            ));
        }
        if eigenvalues.len() != basis.rows() {
            return argument(format!(
                "{} eigenvalues supplied for a {}-dimensional basis",
                eigenvalues.len(),
                basis.rows()
            ));
        }
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return argument("eigenvalues must be finite");
        }
        let err = orthonormality_error(&basis);
        if err > tol {
            return argument(format!(
                "eigenvector matrix is not orthonormal (max |VᵀV - I| = {err:e}, tolerance {tol:e})"
            ));
        }
        Ok(Self { basis, eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn into_parts(self) -> (Matrix, Vec<f64>) {
        (self.basis, self.eigenvalues)
    }
}

/// Strictly upper-triangular matrix of embedded Givens angles.
///
/// Entry `(k, j)` with `k < j` is the angle of plane `(k, j)` in the cascade
/// of subspace `k`. Row `k` therefore describes mode `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMatrix {
    theta: Matrix,
}

impl AngleMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            theta: Matrix::zeros(dim, dim),
        }
    }

    /// Accepts a dense square matrix that is zero on and below the diagonal.
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return argument("angle matrix must be square");
        }
        for i in 0..m.rows() {
            for j in 0..=i {
                if m[(i, j)] != 0.0 {
                    return argument(format!(
                        "angle matrix has a nonzero entry at ({i}, {j}) on or below the diagonal"
                    ));
                }
            }
        }
        Ok(Self { theta: m })
    }

    pub fn dim(&self) -> usize {
        self.theta.rows()
    }

    /// Number of meaningful entries, `N(N-1)/2`.
    pub fn entry_count(&self) -> usize {
        let n = self.dim();
        n * n.saturating_sub(1) / 2
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        assert!(k < j, "angle index must be strictly upper triangular");
        self.theta[(k, j)]
    }

    pub fn set(&mut self, k: usize, j: usize, value: f64) {
        assert!(k < j, "angle index must be strictly upper triangular");
        self.theta[(k, j)] = value;
    }

    /// Angles of subspace `k`: planes `(k, k+1), …, (k, N-1)`.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.theta.row(k)[k + 1..]
    }

    pub fn set_row(&mut self, k: usize, angles: &[f64]) {
        let n = self.dim();
        assert_eq!(angles.len(), n - k - 1, "row length mismatch");
        for (offset, &a) in angles.iter().enumerate() {
            self.theta[(k, k + 1 + offset)] = a;
        }
    }

    /// First (possibly major) angle of each reducible subspace.
    pub fn first_angles(&self) -> Vec<f64> {
        (0..self.dim().saturating_sub(1))
            .map(|k| self.theta[(k, k + 1)])
            .collect()
    }

    /// Dense representation, zeros on and below the diagonal.
    pub fn as_matrix(&self) -> &Matrix {
        &self.theta
    }

    /// Checks the per-position range law of the given method.
    pub fn within_ranges(&self, method: Method) -> bool {
        let half = PI / 2.0;
        let n = self.dim();
        (0..n).all(|k| {
            ((k + 1)..n).all(|j| {
                let a = self.theta[(k, j)];
                if a.is_nan() {
                    return false;
                }
                if method == Method::Arctan2 && j == k + 1 {
                    a > -PI && a <= PI
                } else {
                    (-half..=half).contains(&a)
                }
            })
        })
    }
}

/// Diagonal of the reflection matrix `S`, entries ±1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct ReflectionVec(Vec<i8>);

impl ReflectionVec {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(bad) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return argument(format!("reflection entries must be +1 or -1, got {bad}"));
        }
        Ok(Self(signs))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&s| f64::from(s)).collect()
    }

    pub fn product(&self) -> i8 {
        self.0.iter().product()
    }

    pub fn negative_count(&self) -> usize {
        self.0.iter().filter(|&&s| s < 0).count()
    }
}

impl TryFrom<Vec<i8>> for ReflectionVec {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ReflectionVec> for Vec<i8> {
    fn from(r: ReflectionVec) -> Self {
        r.0
    }
}

/// Everything produced by [`orient_eigenvectors`].
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationResult {
    /// `𝒱 = V_sorted · diag(reflections)`.
    pub oriented_basis: Matrix,
    pub sorted_eigenvalues: Vec<f64>,
    pub angles: AngleMatrix,
    pub reflections: ReflectionVec,
    /// `sort_indices[k]` is the input column that became column `k`.
    pub sort_indices: Vec<usize>,
    pub method: Method,
}

impl OrientationResult {
    pub fn dim(&self) -> usize {
        self.oriented_basis.rows()
    }

    /// Rebuilds `𝒱` from the angles alone.
    pub fn regenerate(&self) -> Result<Matrix> {
        generate_oriented_eigenvectors(&self.angles, &self.reflections)
    }

    /// Rebuilds the sorted input basis, `𝒱 · diag(S)` (since `S² = I`).
    pub fn sorted_basis(&self) -> Matrix {
        let mut v = self.oriented_basis.clone();
        for (j, &s) in self.reflections.signs().iter().enumerate() {
            if s < 0 {
                v.scale_column(j, -1.0);
            }
        }
        v
    }
}

/// Column order that sorts eigenvalues by descending magnitude, ties by original index.
pub fn sort_order(eigenvalues: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eigenvalues[b]
            .abs()
            .partial_cmp(&eigenvalues[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// Permutes columns so `|λ|` is non-increasing. Returns the permutation too.
pub fn sort_eigenvectors(sys: &EigenSystem) -> (EigenSystem, Vec<usize>) {
    let order = sort_order(&sys.eigenvalues);
    let sorted = EigenSystem {
        basis: sys.basis.select_columns(&order),
        eigenvalues: order.iter().map(|&i| sys.eigenvalues[i]).collect(),
    };
    (sorted, order)
}

/// Copies `col[pivot..]` scaled to unit norm, flushing structural zeros to `+0.0`.
fn unit_segment(col: &[f64], pivot: usize) -> Result<Vec<f64>> {
    if pivot >= col.len() {
        return argument(format!(
            "pivot {pivot} out of range for length {}",
            col.len()
        ));
    }
    let seg = &col[pivot..];
    if seg.iter().any(|x| !x.is_finite()) {
        return argument("column contains non-finite entries");
    }
    let norm = seg.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_normal() {
        return argument("cannot solve angles for a zero column");
    }
    Ok(seg
        .iter()
        .map(|&x| {
            let v = x / norm;
            if v.abs() <= ZERO_REL_TOL {
                0.0
            } else {
                v
            }
        })
        .collect())
}

/// Arcsin solution of the cascade angles for `col[pivot..]`, solved pairwise
/// from the bottom up. All angles are minor.
///
/// The recurrence `θ_m = asin(a_m / ∏_{i>m} cos θ_i)` is evaluated as
/// `atan2(a_m, ‖a_0..a_{m-1}‖)`: the cosine product equals the norm of the
/// entries above `a_m`, and the two-argument form stays accurate when the
/// ratio is near ±1.
///
/// The pivot entry must already be nonnegative; the caller applies any reflection.
/// `angles[m]` belongs to plane `(pivot, pivot + 1 + m)`.
pub fn solve_angles_arcsin(col: &[f64], pivot: usize) -> Result<Vec<f64>> {
    let a = unit_segment(col, pivot)?;
    if a[0] < 0.0 {
        return argument("arcsin solver needs a nonnegative pivot entry; reflect first");
    }
    // above[m] = ‖a_0..a_{m-1}‖
    let mut above = Vec::with_capacity(a.len());
    let mut acc = 0.0f64;
    for &x in &a {
        above.push(acc);
        acc = acc.hypot(x);
    }
    Ok((1..a.len()).map(|m| a[m].atan2(above[m])).collect())
}

/// Modified arctan2 solution of the cascade angles for `col[pivot..]`.
///
/// The first angle spans `(-π, π]`; later angles are minor. Structural zeros
/// skip their plane, and the next nonzero entry is solved against the last
/// nonzero entry before it (or against `|a₁|` when none exists).
pub fn solve_angles_arctan2(col: &[f64], pivot: usize) -> Result<Vec<f64>> {
    let a = unit_segment(col, pivot)?;
    let mut angles = vec![0.0; a.len() - 1];
    if a.len() < 2 {
        return Ok(angles);
    }
    let mut first = a[1].atan2(a[0]);
    if first == -PI {
        first = PI;
    }
    angles[0] = first;
    // Index of the last nonzero entry after the pivot, if any.
    let mut prev = (a[1] != 0.0).then_some(1);
    for k in 2..a.len() {
        if a[k] == 0.0 {
            continue;
        }
        angles[k - 1] = match prev {
            Some(p) => (a[k] * angles[p - 1].sin().abs()).atan2(a[p].abs()),
            None => a[k].atan2(a[0].abs()),
        };
        prev = Some(k);
    }
    Ok(angles)
}

/// Orients column `pivot` of `work` in place. Returns the cascade angles and the
/// sign recorded for this subspace.
fn reduce_in_place(work: &mut Matrix, pivot: usize, method: Method) -> Result<(Vec<f64>, i8)> {
    let mut sign = 1i8;
    if method == Method::Arcsin && work[(pivot, pivot)] < 0.0 {
        work.scale_column(pivot, -1.0);
        sign = -1;
    }
    let col = work.column(pivot);
    let angles = match method {
        Method::Arcsin => solve_angles_arcsin(&col, pivot)?,
        Method::Arctan2 => solve_angles_arctan2(&col, pivot)?,
    };
    apply_cascade_transposed(work, pivot, &angles);
    Ok((angles, sign))
}

/// One subspace step: optionally reflect, solve the cascade angles for column
/// `pivot`, and apply the transposed cascade to the whole working matrix.
///
/// Columns before `pivot` must already be aligned with their constituent axes.
pub fn reduce_dimension_by_one(
    work: &Matrix,
    pivot: usize,
    method: Method,
) -> Result<(Matrix, Vec<f64>, i8)> {
    if !work.is_square() || pivot + 1 >= work.rows() {
        return argument(format!(
            "pivot {pivot} has no reducible subspace in a {}x{} matrix",
            work.rows(),
            work.cols()
        ));
    }
    let mut out = work.clone();
    let (angles, sign) = reduce_in_place(&mut out, pivot, method)?;
    Ok((out, angles, sign))
}

/// Orients an eigensystem: sorts by `|λ|` descending, optionally forces the
/// first eigenvector into the first orthant, then reduces every subspace.
///
/// The result satisfies `Rᵀ V_sorted S = I` with `R` rebuilt by
/// [`generate_oriented_eigenvectors`].
pub fn orient_eigenvectors(
    sys: &EigenSystem,
    method: Method,
    orient_to_first_orthant: bool,
) -> Result<OrientationResult> {
    orient_columns(
        &sys.basis,
        &sys.eigenvalues,
        method,
        orient_to_first_orthant,
    )
}

/// Orientation without the orthonormality precondition. Used to
/// re-orthogonalize filtered (near-orthonormal) bases.
pub(crate) fn orient_columns(
    basis: &Matrix,
    eigenvalues: &[f64],
    method: Method,
    orient_to_first_orthant: bool,
) -> Result<OrientationResult> {
    let n = basis.rows();
    if !basis.is_square() || n == 0 || eigenvalues.len() != n {
        return argument("basis must be square and match the eigenvalue count");
    }
    let order = sort_order(eigenvalues);
    let sorted = basis.select_columns(&order);
    let sorted_eigenvalues: Vec<f64> = order.iter().map(|&i| eigenvalues[i]).collect();

    let mut work = sorted.clone();
    let mut signs = vec![1i8; n];
    if orient_to_first_orthant && work[(0, 0)] < 0.0 {
        signs[0] = -1;
        work.scale_column(0, -1.0);
    }

    let mut angles = AngleMatrix::zeros(n);
    #[allow(clippy::needless_range_loop)]
    for pivot in 0..n.saturating_sub(1) {
        let (row, sign) = reduce_in_place(&mut work, pivot, method)?;
        signs[pivot] *= sign;
        angles.set_row(pivot, &row);
    }
    if work[(n - 1, n - 1)] < 0.0 {
        signs[n - 1] = -1;
    }

    let mut oriented_basis = sorted;
    for (j, &s) in signs.iter().enumerate() {
        if s < 0 {
            oriented_basis.scale_column(j, -1.0);
        }
    }
    Ok(OrientationResult {
        oriented_basis,
        sorted_eigenvalues,
        angles,
        reflections: ReflectionVec(signs),
        sort_indices: order,
        method,
    })
}

/// Rebuilds the oriented basis `𝒱 = R₁ R₂ ⋯ R_{N-1}` from its embedded angles.
///
/// `reflections` is only checked for a matching length: `𝒱` carries no
/// reflections by construction. Multiply by `diag(reflections)` to recover
/// the sorted input basis.
pub fn generate_oriented_eigenvectors(
    angles: &AngleMatrix,
    reflections: &ReflectionVec,
) -> Result<Matrix> {
    let n = angles.dim();
    if reflections.len() != n {
        return argument(format!(
            "{} reflections supplied for a {n}-dimensional angle matrix",
            reflections.len()
        ));
    }
    Ok(rotation_from_angles(angles))
}

pub(crate) fn rotation_from_angles(angles: &AngleMatrix) -> Matrix {
    let n = angles.dim();
    let mut r = Matrix::identity(n);
    for k in (0..n.saturating_sub(1)).rev() {
        apply_cascade(&mut r, k, angles.row(k));
    }
    r
}

/// Converts an arcsin-style reflection vector to the arctan2 pattern.
///
/// Walking the reducible subspaces in order, every `-1` is traded for a
/// major-angle rotation, which flips the sign at that subspace and the next.
/// Returns the untwisted vector and, per subspace, whether a major rotation
/// was recorded.
pub fn untwist_reflections(s_sin: &ReflectionVec) -> (ReflectionVec, Vec<bool>) {
    let mut signs = s_sin.0.clone();
    let n = signs.len();
    let mut major = vec![false; n.saturating_sub(1)];
    for k in 0..n.saturating_sub(1) {
        if signs[k] < 0 {
            major[k] = true;
            signs[k] = -signs[k];
            signs[k + 1] = -signs[k + 1];
        }
    }
    (ReflectionVec(signs), major)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{compose_cascade, det, is_orthonormal};

    fn apply_transposed_cascade(col: &[f64], pivot: usize, angles: &[f64]) -> Vec<f64> {
        let r = compose_cascade(col.len(), pivot, angles).unwrap();
        let v = Matrix::from_columns(&[col.to_vec()]).unwrap();
        (&r.transpose() * &v).column(0)
    }

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    fn assert_is_e(v: &[f64], k: usize, tol: f64) {
        for (i, &x) in v.iter().enumerate() {
            let target = if i == k { 1.0 } else { 0.0 };
            assert!((x - target).abs() < tol, "entry {i} = {x}, vector {v:?}");
        }
    }

    fn system(rows: &[Vec<f64>], eigenvalues: &[f64]) -> EigenSystem {
        EigenSystem::new(Matrix::from_rows(rows).unwrap(), eigenvalues.to_vec()).unwrap()
    }

    #[test]
    fn sort_descending() {
        let sys = EigenSystem::new(Matrix::identity(3), vec![1.0, 2.0, 3.0]).unwrap();
        let (sorted, perm) = sort_eigenvectors(&sys);
        assert_eq!(sorted.eigenvalues(), &[3.0, 2.0, 1.0]);
        assert_eq!(perm, vec![2, 1, 0]);
        assert_eq!(sorted.basis().column(0), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn sort_already_sorted_is_identity() {
        let sys = EigenSystem::new(Matrix::identity(3), vec![3.0, 2.0, 1.0]).unwrap();
        assert_eq!(sort_eigenvectors(&sys).1, vec![0, 1, 2]);
    }

    #[test]
    fn sort_uses_magnitude() {
        let sys = EigenSystem::new(Matrix::identity(3), vec![2.0, -3.0, 1.0]).unwrap();
        let (sorted, perm) = sort_eigenvectors(&sys);
        assert_eq!(sorted.eigenvalues(), &[-3.0, 2.0, 1.0]);
        assert_eq!(perm, vec![1, 0, 2]);
    }

    #[test]
    fn sort_ties_keep_original_order() {
        assert_eq!(sort_order(&[1.0, 2.0, -2.0, 1.0]), vec![1, 2, 0, 3]);
    }

    #[test]
    fn arcsin_trivial_columns() {
        assert_eq!(
            solve_angles_arcsin(&[1.0, 0.0, 0.0, 0.0], 0).unwrap(),
            vec![0.0, 0.0, 0.0]
        );
        let a = solve_angles_arcsin(&[0.0, 0.0, 0.0, 1.0], 0).unwrap();
        assert_eq!(a[0], 0.0);
        assert_eq!(a[1], 0.0);
        assert!((a[2] - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn arcsin_annihilates_fixed_vector() {
        let col = unit(&[0.3, -0.5, 0.2, 0.7, -0.35]);
        let angles = solve_angles_arcsin(&col, 0).unwrap();
        assert!(angles.iter().all(|a| a.abs() <= PI / 2.0));
        assert_is_e(&apply_transposed_cascade(&col, 0, &angles), 0, 1e-10);
    }

    #[test]
    fn arcsin_rejects_negative_pivot() {
        assert!(solve_angles_arcsin(&[-0.6, 0.8], 0).is_err());
    }

    #[test]
    fn arctan2_trivial_columns() {
        assert_eq!(
            solve_angles_arctan2(&[1.0, 0.0, 0.0], 0).unwrap(),
            vec![0.0, 0.0]
        );
        let a = solve_angles_arctan2(&[-1.0, 0.0, 0.0, 0.0], 0).unwrap();
        assert_eq!(a, vec![PI, 0.0, 0.0]);
        // Signed zero must not produce -π.
        let a = solve_angles_arctan2(&[-1.0, -0.0, 0.0], 0).unwrap();
        assert_eq!(a[0], PI);
    }

    #[test]
    fn arctan2_sparse_back_reference() {
        let col = [0.6, 0.64, 0.0, 0.48];
        let angles = solve_angles_arctan2(&col, 0).unwrap();
        assert_eq!(angles[1], 0.0);
        let expected_last = (0.48 * angles[0].sin().abs()).atan2(0.64);
        assert!((angles[2] - expected_last).abs() < 1e-15);
        assert_is_e(&apply_transposed_cascade(&col, 0, &angles), 0, 1e-10);
    }

    #[test]
    fn arctan2_sparse_second_entry() {
        for col in [
            unit(&[0.5, 0.0, 0.0, -0.4, 0.3]),
            unit(&[-0.5, 0.0, 0.7, 0.0, 0.3]),
            unit(&[0.0, 0.0, 0.7, 0.0, -0.3]),
            vec![0.0, 0.0, 0.0, 0.0, -1.0],
        ] {
            let angles = solve_angles_arctan2(&col, 0).unwrap();
            assert!(angles.iter().all(|a| !a.is_nan()));
            assert_is_e(&apply_transposed_cascade(&col, 0, &angles), 0, 1e-12);
        }
    }

    #[test]
    fn arctan2_matches_csc_form_on_dense_input() {
        let col = unit(&[-0.3, 0.5, -0.2, 0.7, 0.35]);
        let angles = solve_angles_arctan2(&col, 0).unwrap();
        // θ_k = atan2(a_k, |a_{k-1} csc θ_{k-1}|)
        for k in 2..col.len() {
            let csc = 1.0 / angles[k - 2].sin();
            let expected = col[k].atan2((col[k - 1] * csc).abs());
            assert!((angles[k - 1] - expected).abs() < 1e-13);
        }
        assert!(angles[0].abs() > PI / 2.0);
        assert_is_e(&apply_transposed_cascade(&col, 0, &angles), 0, 1e-12);
    }

    #[test]
    fn solvers_respect_pivot_offset() {
        let col = vec![0.123, 0.0, 0.6, -0.8];
        let angles = solve_angles_arctan2(&col, 2).unwrap();
        assert_eq!(angles.len(), 1);
        assert!((angles[0] - (-0.8f64).atan2(0.6)).abs() < 1e-15);
    }

    #[test]
    fn solvers_reject_zero_vectors() {
        assert!(solve_angles_arctan2(&[0.0, 0.0, 0.0], 0).is_err());
        assert!(solve_angles_arcsin(&[0.0, 0.0], 0).is_err());
    }

    #[test]
    fn reduce_identity_is_noop() {
        for method in [Method::Arcsin, Method::Arctan2] {
            let (out, angles, s) =
                reduce_dimension_by_one(&Matrix::identity(4), 0, method).unwrap();
            assert_eq!(out, Matrix::identity(4));
            assert!(angles.iter().all(|&a| a == 0.0));
            assert_eq!(s, 1);
        }
    }

    fn left_handed_3d() -> Matrix {
        // v1 in the front hemisphere of π1; after R1ᵀ, v2 points away from π2.
        let r = crate::matcore::compose_cascade(3, 0, &[0.4, 0.3]).unwrap();
        let r2 = crate::matcore::compose_cascade(3, 1, &[0.5]).unwrap();
        let mut v = &r * &r2;
        v.scale_column(1, -1.0);
        v
    }

    #[test]
    fn reduce_records_embedded_reflection_with_arcsin() {
        let v = left_handed_3d();
        assert!(det(&v).unwrap() < 0.0);
        let (v1, _, s1) = reduce_dimension_by_one(&v, 0, Method::Arcsin).unwrap();
        assert_eq!(s1, 1);
        assert!(v1[(1, 1)] < 0.0);
        let (v2, _, s2) = reduce_dimension_by_one(&v1, 1, Method::Arcsin).unwrap();
        assert_eq!(s2, -1);
        assert!((v2[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(v2[(2, 2)] > 0.0);
    }

    #[test]
    fn orient_identity() {
        for method in [Method::Arcsin, Method::Arctan2] {
            let sys = EigenSystem::new(Matrix::identity(5), vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
            let res = orient_eigenvectors(&sys, method, false).unwrap();
            assert_eq!(res.angles, AngleMatrix::zeros(5));
            assert_eq!(res.reflections, ReflectionVec::ones(5));
        }
    }

    #[test]
    fn orient_pure_reflection() {
        let sys = system(
            &[
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, -1.0],
            ],
            &[3.0, 2.0, 1.0],
        );
        let res = orient_eigenvectors(&sys, Method::Arctan2, false).unwrap();
        assert_eq!(res.angles, AngleMatrix::zeros(3));
        assert_eq!(res.reflections.signs(), &[1, 1, -1]);
    }

    #[test]
    fn orient_left_handed_basis_both_methods() {
        let v = left_handed_3d();
        let sys = EigenSystem::new(v.clone(), vec![3.0, 2.0, 1.0]).unwrap();
        let sin = orient_eigenvectors(&sys, Method::Arcsin, false).unwrap();
        let tan = orient_eigenvectors(&sys, Method::Arctan2, false).unwrap();
        assert_eq!(sin.reflections.signs(), &[1, -1, 1]);
        assert_eq!(sin.reflections.negative_count() % 2, 1);
        assert_eq!(tan.reflections.signs(), &[1, 1, -1]);
        for res in [&sin, &tan] {
            assert!((det(&res.oriented_basis).unwrap() - 1.0).abs() < 1e-9);
            let regen = res.regenerate().unwrap();
            assert!(regen.max_abs_diff(&res.oriented_basis) < 1e-12);
            assert!(res.angles.within_ranges(res.method));
        }
        // The untwisted arcsin pattern is the arctan2 pattern.
        assert_eq!(untwist_reflections(&sin.reflections).0, tan.reflections);
    }

    #[test]
    fn orient_rejects_non_orthonormal() {
        let mut m = Matrix::identity(3);
        m.scale_column(0, 1.01);
        assert!(EigenSystem::new(m, vec![1.0; 3]).is_err());
    }

    #[test]
    fn orient_applies_sort_before_reduction() {
        let r = crate::matcore::compose_cascade(4, 0, &[0.2, -0.4, 0.9]).unwrap();
        let sys = EigenSystem::new(r.clone(), vec![1.0, 4.0, 2.0, 3.0]).unwrap();
        let res = orient_eigenvectors(&sys, Method::Arctan2, false).unwrap();
        assert_eq!(res.sort_indices, vec![1, 3, 2, 0]);
        assert_eq!(res.sorted_eigenvalues, vec![4.0, 3.0, 2.0, 1.0]);
        let sorted = r.select_columns(&res.sort_indices);
        assert!(res.sorted_basis().max_abs_diff(&sorted) < 1e-15);
        assert!(res.regenerate().unwrap().max_abs_diff(&res.oriented_basis) < 1e-12);
    }

    #[test]
    fn first_orthant_flag() {
        let r = crate::matcore::compose_cascade(3, 0, &[0.3, 0.2]).unwrap();
        let mut v = r.clone();
        v.scale_column(0, -1.0);
        let sys = EigenSystem::new(v, vec![3.0, 2.0, 1.0]).unwrap();
        let without = orient_eigenvectors(&sys, Method::Arctan2, false).unwrap();
        assert_eq!(without.reflections.signs()[0], 1);
        assert!(without.angles.get(0, 1).abs() > PI / 2.0);
        let with = orient_eigenvectors(&sys, Method::Arctan2, true).unwrap();
        assert_eq!(with.reflections.signs(), &[-1, 1, 1]);
        assert!(with.angles.get(0, 1).abs() <= PI / 2.0);
        assert!(with.oriented_basis[(0, 0)] >= 0.0);
    }

    #[test]
    fn generate_examples() {
        let z = AngleMatrix::zeros(4);
        assert_eq!(
            generate_oriented_eigenvectors(&z, &ReflectionVec::ones(4)).unwrap(),
            Matrix::identity(4)
        );
        let mut a = AngleMatrix::zeros(3);
        a.set(0, 1, PI);
        let g = generate_oriented_eigenvectors(&a, &ReflectionVec::ones(3)).unwrap();
        let expected = Matrix::from_diag(&[-1.0, -1.0, 1.0]);
        assert!(g.max_abs_diff(&expected) < 1e-15);
        assert!(generate_oriented_eigenvectors(&a, &ReflectionVec::ones(2)).is_err());
    }

    #[test]
    fn generated_bases_are_rotations() {
        let mut a = AngleMatrix::zeros(5);
        let mut x = 0.37;
        for k in 0..4 {
            for j in (k + 1)..5 {
                x = (x * 7.3 + 0.11) % 3.0 - 1.5;
                a.set(k, j, x);
            }
        }
        let g = generate_oriented_eigenvectors(&a, &ReflectionVec::ones(5)).unwrap();
        assert!(is_orthonormal(&g, 1e-12));
        assert!((det(&g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn angle_matrix_rejects_malformed_triangle() {
        let mut m = Matrix::zeros(3, 3);
        m[(2, 0)] = 0.1;
        assert!(AngleMatrix::from_matrix(m).is_err());
        let mut m = Matrix::zeros(3, 3);
        m[(1, 1)] = 0.1;
        assert!(AngleMatrix::from_matrix(m).is_err());
        assert!(AngleMatrix::from_matrix(Matrix::zeros(2, 3)).is_err());
        assert_eq!(AngleMatrix::zeros(7).entry_count(), 21);
    }

    #[test]
    fn untwist_fixtures() {
        let (t, major) = untwist_reflections(&ReflectionVec::new(vec![1, -1, 1]).unwrap());
        assert_eq!(t.signs(), &[1, 1, -1]);
        assert_eq!(major, vec![false, true]);
        let (t, major) = untwist_reflections(&ReflectionVec::new(vec![-1, -1, -1, 1]).unwrap());
        assert_eq!(t.signs(), &[1, 1, 1, -1]);
        assert_eq!(major, vec![true, false, true]);
        let (t, major) = untwist_reflections(&ReflectionVec::ones(4));
        assert_eq!(t, ReflectionVec::ones(4));
        assert!(major.iter().all(|m| !m));
    }

    #[test]
    fn reflection_vec_validation_and_serde_shape() {
        assert!(ReflectionVec::new(vec![1, 0, -1]).is_err());
        assert!(ReflectionVec::try_from(vec![1, -1]).is_ok());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("arcsin".parse::<Method>().unwrap(), Method::Arcsin);
        assert_eq!("arctan2".parse::<Method>().unwrap(), Method::Arctan2);
        assert!("atan".parse::<Method>().is_err());
        assert_eq!(Method::default(), Method::Arctan2);
    }
}
