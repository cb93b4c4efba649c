//! Orthogonal rotation isolating one coefficient.
//!
//! For a chosen column `x_j`, the data are re-expressed in an orthonormal
//! basis whose first direction is `q1 = x_j / ||x_j||`. The response splits
//! into the scalar `z = q1' y` (the only part that carries information
//! about `beta_j` beyond the nuisance fit) and the reduced response
//! `y_tilde = Q2' y` living in the orthogonal complement. The nuisance
//! design is rotated alike. Downstream code approximates the predictive
//! distribution of the held-out projection and recombines analytically.

use ndarray::{Array1, Array2};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Rotated view of a dataset for a single coefficient index.
#[derive(Debug, Clone)]
pub struct RotatedProblem {
    /// The isolated column index j.
    pub index_j: usize,
    /// Norm of the isolated column, `a = ||x_j||`.
    pub a: f64,
    /// Projection of the response on the isolated direction, `z = q1' y`.
    pub z: f64,
    /// Response in the orthogonal complement, length n - 1.
    pub y_tilde: Array1<f64>,
    /// Nuisance design in the orthogonal complement, (n-1) x (p-1).
    pub x_tilde: Array2<f64>,
    /// Nuisance design projected on the isolated direction, length p - 1.
    pub x_tilde_new: Array1<f64>,
}

impl RotatedProblem {
    pub fn n_reduced(&self) -> usize {
        self.y_tilde.len()
    }

    pub fn p_reduced(&self) -> usize {
        self.x_tilde_new.len()
    }
}

/// Householder reflection with first column `q1`.
///
/// Returns the reflection vector `v`, its squared norm, and the sign `s`
/// chosen so the construction never cancels: `v = q1 + s e1` with
/// `s = sign(q1[0])` (treating 0 as positive). The orthogonal completion
/// used throughout is `Q = H * diag(-s, 1, ..., 1)` where
/// `H = I - 2 v v' / ||v||^2`; its first column is exactly `q1` and its
/// remaining columns are the Householder images of `e_2 .. e_n`.
struct Reflector {
    v: Array1<f64>,
    v_norm2: f64,
}

impl Reflector {
    fn for_direction(q1: &Array1<f64>) -> Self {
        let s = if q1[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = q1.clone();
        v[0] += s;
        let v_norm2 = 2.0 * (1.0 + s * q1[0]);
        Self { v, v_norm2 }
    }

    /// Apply H to `u` and return the components 2..n, i.e. `Q2' u`.
    fn complement_projection(&self, u: &Array1<f64>) -> Array1<f64> {
        let scale = 2.0 * self.v.dot(u) / self.v_norm2;
        Array1::from_shape_fn(u.len() - 1, |i| u[i + 1] - scale * self.v[i + 1])
    }
}

/// Rotate the data around column `j`.
///
/// The completion is the deterministic Householder construction above; the
/// `seed` argument is reserved for future randomized completions and is
/// currently unused (any completion yields the same downstream answers).
pub fn rotate_for_index(data: &Dataset, j: usize, _seed: u64) -> Result<RotatedProblem> {
    let n = data.n();
    let p = data.p();
    if j >= p {
        return Err(Error::IndexOutOfRange { index: j, p });
    }
    let xj = data.x.column(j).to_owned();
    let a = xj.dot(&xj).sqrt();
    if a <= 0.0 {
        return Err(Error::ZeroNormColumn { index: j });
    }
    let q1 = xj.mapv(|v| v / a);
    let reflector = Reflector::for_direction(&q1);

    let z = q1.dot(&data.y);
    let y_tilde = reflector.complement_projection(&data.y);

    let mut x_tilde = Array2::<f64>::zeros((n - 1, p - 1));
    let mut x_tilde_new = Array1::<f64>::zeros(p - 1);
    let mut out_col = 0;
    for c in 0..p {
        if c == j {
            continue;
        }
        let col = data.x.column(c).to_owned();
        x_tilde_new[out_col] = q1.dot(&col);
        let reduced = reflector.complement_projection(&col);
        x_tilde.column_mut(out_col).assign(&reduced);
        out_col += 1;
    }

    Ok(RotatedProblem {
        index_j: j,
        a,
        z,
        y_tilde,
        x_tilde,
        x_tilde_new,
    })
}

/// Reconstruct the full orthogonal matrix `Q = [q1 | Q2]` for a given
/// column. Used by tests to verify orthogonality explicitly; O(n^2).
pub fn reconstruct_q(data: &Dataset, j: usize) -> Result<Array2<f64>> {
    let n = data.n();
    let xj = data.x.column(j).to_owned();
    let a = xj.dot(&xj).sqrt();
    if a <= 0.0 {
        return Err(Error::ZeroNormColumn { index: j });
    }
    let q1 = xj.mapv(|v| v / a);
    let reflector = Reflector::for_direction(&q1);
    let mut q = Array2::<f64>::zeros((n, n));
    q.column_mut(0).assign(&q1);
    for k in 1..n {
        // Column k of Q is H e_k.
        let scale = 2.0 * reflector.v[k] / reflector.v_norm2;
        for i in 0..n {
            let e = if i == k { 1.0 } else { 0.0 };
            q[[i, k]] = e - scale * reflector.v[i];
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use ndarray::{arr1, arr2};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian_dataset(seed: u64, n: usize, p: usize) -> Dataset {
        let mut rng = substream(seed, &[11]);
        let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
        let y = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
        Dataset::new(y, x).unwrap()
    }

    #[test]
    fn identity_aligned_column_keeps_remaining_coordinates() {
        // x_j = e1 gives a = 1, z = y_1 and y_tilde = (y_2, ..., y_n).
        let x = arr2(&[[1.0, 0.3], [0.0, -0.7], [0.0, 2.2]]);
        let y = arr1(&[5.0, 6.0, 7.0]);
        let d = Dataset::new(y, x).unwrap();
        let rot = rotate_for_index(&d, 0, 0).unwrap();
        assert!((rot.a - 1.0).abs() < 1e-15);
        assert!((rot.z - 5.0).abs() < 1e-15);
        assert!((rot.y_tilde[0] - 6.0).abs() < 1e-15);
        assert!((rot.y_tilde[1] - 7.0).abs() < 1e-15);
        // The nuisance column is passed through unchanged below row 1.
        assert!((rot.x_tilde_new[0] - 0.3).abs() < 1e-15);
        assert!((rot.x_tilde[[0, 0]] + 0.7).abs() < 1e-15);
        assert!((rot.x_tilde[[1, 0]] - 2.2).abs() < 1e-15);
    }

    #[test]
    fn rotation_preserves_norm() {
        for seed in 0..20u64 {
            let d = gaussian_dataset(seed, 12, 5);
            for j in 0..d.p() {
                let rot = rotate_for_index(&d, j, 0).unwrap();
                let total = rot.z * rot.z + rot.y_tilde.dot(&rot.y_tilde);
                let norm2 = d.y.dot(&d.y);
                assert!(
                    (total - norm2).abs() / norm2 < 1e-12,
                    "seed {seed} j {j}: {total} vs {norm2}"
                );
            }
        }
    }

    #[test]
    fn reconstructed_q_is_orthogonal_and_annihilates_x_j() {
        let d = gaussian_dataset(99, 6, 4);
        let j = 2;
        let q = reconstruct_q(&d, j).unwrap();
        let qtq = q.t().dot(&q);
        for i in 0..6 {
            for k in 0..6 {
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!(
                    (qtq[[i, k]] - expect).abs() < 1e-10,
                    "Q'Q deviates at ({i},{k})"
                );
            }
        }
        // Columns 2..n of Q are orthogonal to x_j.
        let xj = d.x.column(j);
        for k in 1..6 {
            let dot = q.column(k).dot(&xj);
            assert!(dot.abs() < 1e-10, "Q2' x_j nonzero in column {k}: {dot}");
        }
        // And the rotation's own pieces match projections through Q.
        let rot = rotate_for_index(&d, j, 0).unwrap();
        let z_direct = q.column(0).dot(&d.y);
        assert!((rot.z - z_direct).abs() < 1e-12);
        for k in 1..6 {
            let v = q.column(k).dot(&d.y);
            assert!((rot.y_tilde[k - 1] - v).abs() < 1e-10);
        }
    }

    #[test]
    fn negative_leading_direction_is_stable() {
        // Force q1[0] < 0 to exercise the other reflector sign.
        let x = arr2(&[[-3.0, 1.0], [4.0, 0.0], [0.0, 1.0]]);
        let y = arr1(&[1.0, 2.0, 3.0]);
        let d = Dataset::new(y, x).unwrap();
        let rot = rotate_for_index(&d, 0, 0).unwrap();
        assert!((rot.a - 5.0).abs() < 1e-12);
        let total = rot.z * rot.z + rot.y_tilde.dot(&rot.y_tilde);
        let norm2 = d.y.dot(&d.y);
        assert!((total - norm2).abs() / norm2 < 1e-12);
        let q = reconstruct_q(&d, 0).unwrap();
        let qtq = q.t().dot(&q);
        for i in 0..3 {
            for k in 0..3 {
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!((qtq[[i, k]] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_column_and_bad_index_are_rejected() {
        let x = arr2(&[[0.0, 1.0], [0.0, 2.0]]);
        let y = arr1(&[1.0, 2.0]);
        let d = Dataset::new(y, x).unwrap();
        match rotate_for_index(&d, 0, 0) {
            Err(Error::ZeroNormColumn { index }) => assert_eq!(index, 0),
            other => panic!("expected zero-norm error, got {other:?}"),
        }
        match rotate_for_index(&d, 5, 0) {
            Err(Error::IndexOutOfRange { index, p }) => {
                assert_eq!(index, 5);
                assert_eq!(p, 2);
            }
            other => panic!("expected index error, got {other:?}"),
        }
    }

    #[test]
    fn rotation_is_deterministic() {
        let d = gaussian_dataset(3, 10, 4);
        let r1 = rotate_for_index(&d, 1, 0).unwrap();
        let r2 = rotate_for_index(&d, 1, 123).unwrap();
        assert_eq!(r1.z, r2.z);
        assert_eq!(r1.a, r2.a);
        for (a, b) in r1.x_tilde.iter().zip(r2.x_tilde.iter()) {
            assert_eq!(a, b);
        }
    }
}
