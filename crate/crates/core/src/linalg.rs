use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix with eigenvalues in descending
/// order. Each eigenvector is signed so its first entry that is not
/// numerically zero is positive.
pub fn eigen_descending(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v = -v;
            }
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Same orthonormal frame, with the last column negated when needed so that
/// the determinant is +1.
pub fn to_rotation(q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut r = q.clone();
    if q.determinant() < 0.0 {
        let d = q.ncols();
        let last = -r.column(d - 1);
        r.set_column(d - 1, &last);
    }
    r
}

/// Cayley coordinates of a rotation: the skew matrix `(I - Q)(I + Q)⁻¹`.
pub fn cayley_skew(rotation: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = rotation.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let lhs = (&id + rotation).transpose();
    let rhs = (&id - rotation).transpose();
    // S = (I - Q)(I + Q)⁻¹  <=>  (I + Q)ᵀ Sᵀ = (I - Q)ᵀ
    let st = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::domain("orientation has an eigenvalue of -1; cayley chart undefined"))?;
    Ok(st.transpose())
}

/// `log det(I + S)` for a skew matrix `S`; always finite and non-negative.
pub fn log_det_identity_plus(skew: &DMatrix<f64>) -> f64 {
    let d = skew.nrows();
    (DMatrix::<f64>::identity(d, d) + skew).determinant().abs().ln()
}

/// Strict lower triangle, row by row.
pub fn strict_lower(m: &DMatrix<f64>) -> impl Iterator<Item = f64> + '_ {
    let d = m.nrows();
    (1..d).flat_map(move |i| (0..i).map(move |j| m[(i, j)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigen_order_and_signs() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let (vals, vecs) = eigen_descending(&m);
        assert_abs_diff_eq!(vals[0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vecs[(1, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vecs[(0, 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cayley_two_dimensional_angle() {
        let phi: f64 = 0.7;
        let q = DMatrix::from_row_slice(2, 2, &[phi.cos(), -phi.sin(), phi.sin(), phi.cos()]);
        let s = cayley_skew(&q).unwrap();
        // for a plane rotation the Cayley parameter is tan(φ/2)
        assert_abs_diff_eq!(s[(1, 0)].abs(), (phi / 2.0).tan(), epsilon = 1e-12);
        assert_abs_diff_eq!(s[(0, 1)], -s[(1, 0)], epsilon = 1e-12);
        assert_abs_diff_eq!(log_det_identity_plus(&s), (1.0 + (phi / 2.0).tan().powi(2)).ln(), epsilon = 1e-12);
    }

    #[test]
    fn rotation_fix_has_unit_determinant() {
        let q = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_abs_diff_eq!(to_rotation(&q).determinant(), 1.0, epsilon = 1e-12);
    }
}
