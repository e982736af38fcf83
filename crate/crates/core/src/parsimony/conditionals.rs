//! Parameters of the full-conditional distributions, separated from the
//! draws so they can be checked directly.

use nalgebra::{DMatrix, DVector};

use super::{Hyperparams, SufficientStats};
use crate::error::Result;
use crate::random::{sample_inverse_gamma, sample_inverse_wishart, sample_mvn, RngHandle, SpdMatrix};

/// `IG(shape, scale)` with density ∝ x^-(shape+1) exp(-scale/x).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvGammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaParams {
    pub fn sample(&self, rng: &mut RngHandle) -> Result<f64> {
        sample_inverse_gamma(self.shape, self.scale, rng)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvWishartParams {
    pub dof: f64,
    pub scale: SpdMatrix,
}

impl InvWishartParams {
    pub fn sample(&self, rng: &mut RngHandle) -> Result<SpdMatrix> {
        sample_inverse_wishart(self.dof, &self.scale, rng)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalParams {
    pub mean: DVector<f64>,
    pub cov: SpdMatrix,
}

impl NormalParams {
    pub fn sample(&self, rng: &mut RngHandle) -> Result<DVector<f64>> {
        sample_mvn(&self.mean, &self.cov, rng)
    }
}

fn total(stats: &[SufficientStats]) -> f64 {
    stats.iter().map(|s| s.n as f64).sum()
}

/// Diagonal of `Rᵀ M R`, or of `M` itself when there is no rotation.
fn rotated_diagonal(m: &DMatrix<f64>, rotation: Option<&DMatrix<f64>>) -> DVector<f64> {
    match rotation {
        None => m.diagonal(),
        Some(r) => DVector::from_iterator(m.nrows(), r.column_iter().map(|c| (c.transpose() * m * c)[(0, 0)])),
    }
}

fn scatter_plus_prior(stat: &SufficientStats, h: &Hyperparams) -> DMatrix<f64> {
    stat.prior_scatter(h) + h.lambda0.matrix()
}

/// Shared volume of `λI`.
pub fn spherical_equal_volume(stats: &[SufficientStats], h: &Hyperparams) -> InvGammaParams {
    let d = h.dim() as f64;
    let trace: f64 = stats.iter().map(|s| s.prior_scatter(h).trace()).sum();
    InvGammaParams {
        shape: (h.nu0 + total(stats) * d) / 2.0,
        scale: (h.s0_sq + trace) / 2.0,
    }
}

/// Per-component volume of `λ_k I`.
pub fn spherical_volume(stat: &SufficientStats, h: &Hyperparams) -> InvGammaParams {
    let d = h.dim() as f64;
    InvGammaParams {
        shape: (h.nu0 + d * stat.n as f64) / 2.0,
        scale: (h.s0_sq + stat.prior_scatter(h).trace()) / 2.0,
    }
}

/// Diagonal elements `a_j` shared by all components (`λA`, and `λD_kAD_kᵀ`
/// when orientations are given).
pub fn equal_shape(
    stats: &[SufficientStats],
    h: &Hyperparams,
    orientations: Option<&[DMatrix<f64>]>,
) -> Vec<InvGammaParams> {
    let d = h.dim();
    let k = stats.len() as f64;
    let shape = (total(stats) + h.nu0 + k * (d as f64 + 1.0) - 2.0) / 2.0;
    let mut sums = DVector::zeros(d);
    for (idx, stat) in stats.iter().enumerate() {
        sums += rotated_diagonal(&scatter_plus_prior(stat, h), orientations.map(|o| &o[idx]));
    }
    sums.iter().map(|&s| InvGammaParams { shape, scale: s / 2.0 }).collect()
}

/// Diagonal elements `a_j` given per-component volumes (`λ_kA`, and
/// `λ_kD_kAD_kᵀ` when orientations are given).
pub fn scaled_shape(
    stats: &[SufficientStats],
    h: &Hyperparams,
    volumes: &[f64],
    orientations: Option<&[DMatrix<f64>]>,
) -> Vec<InvGammaParams> {
    let d = h.dim();
    let k = stats.len() as f64;
    let shape = (total(stats) + h.nu0 + k * d as f64 + 1.0) / 2.0;
    let mut sums = DVector::zeros(d);
    for (idx, stat) in stats.iter().enumerate() {
        let diag = rotated_diagonal(&scatter_plus_prior(stat, h), orientations.map(|o| &o[idx]));
        sums += diag / volumes[idx];
    }
    sums.iter().map(|&s| InvGammaParams { shape, scale: s / 2.0 }).collect()
}

/// Volume `λ_k` given the shared diagonal `a` (and the component
/// orientation, if any).
pub fn shape_volume(
    stat: &SufficientStats,
    h: &Hyperparams,
    shape: &DVector<f64>,
    orientation: Option<&DMatrix<f64>>,
) -> InvGammaParams {
    let d = h.dim() as f64;
    let diag = rotated_diagonal(&scatter_plus_prior(stat, h), orientation);
    let weighted: f64 = diag.iter().zip(shape.iter()).map(|(m, a)| m / a).sum();
    InvGammaParams {
        shape: (h.nu0 + stat.n as f64 * d) / 2.0,
        scale: (h.s0_sq + weighted) / 2.0,
    }
}

/// Shared covariance `Σ` (`λDADᵀ`), or `Σ₀` of `λ_k DADᵀ` when the
/// component volumes are given.
pub fn shared_covariance(
    stats: &[SufficientStats],
    h: &Hyperparams,
    volumes: Option<&[f64]>,
) -> Result<InvWishartParams> {
    let mut scale = h.lambda0.matrix().clone();
    for (idx, stat) in stats.iter().enumerate() {
        let v = volumes.map_or(1.0, |v| v[idx]);
        scale += stat.prior_scatter(h) / v;
    }
    Ok(InvWishartParams {
        dof: h.nu0 + total(stats),
        scale: SpdMatrix::from_symmetrized(&scale, "shared covariance scale")?,
    })
}

/// Volume `λ_k` of `λ_k Σ₀`.
pub fn scaled_volume(stat: &SufficientStats, h: &Hyperparams, sigma0: &SpdMatrix) -> InvGammaParams {
    let d = h.dim() as f64;
    InvGammaParams {
        shape: (h.nu0 + stat.n as f64 * d) / 2.0,
        scale: (h.s0_sq + sigma0.trace_inv_product(&stat.prior_scatter(h))) / 2.0,
    }
}

/// Component covariance `Σ_k` of the unconstrained model; the orientation
/// blocks draw from the same distribution.
pub fn component_covariance(stat: &SufficientStats, h: &Hyperparams) -> Result<InvWishartParams> {
    Ok(InvWishartParams {
        dof: h.nu0 + stat.n as f64,
        scale: SpdMatrix::from_symmetrized(&scatter_plus_prior(stat, h), "component covariance scale")?,
    })
}

/// `μ_k | Σ_k ~ N(μ_n, Σ_k/(n_k + κ))`.
pub fn mean(stat: &SufficientStats, h: &Hyperparams, cov: &SpdMatrix) -> NormalParams {
    NormalParams {
        mean: stat.posterior_mean(h),
        cov: cov.scaled(1.0 / (stat.n as f64 + h.kappa)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hyper(d: usize) -> Hyperparams {
        Hyperparams {
            mu0: DVector::zeros(d),
            kappa: 2.0,
            nu0: d as f64 + 2.0,
            lambda0: SpdMatrix::identity(d),
            s0_sq: 1.0,
            alpha_a: 1.0,
            alpha_b: 1.0,
        }
    }

    fn scalar_stats(xs: &[f64]) -> SufficientStats {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let w = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>();
        SufficientStats {
            n: xs.len(),
            mean: DVector::from_vec(vec![m]),
            scatter: DMatrix::from_element(1, 1, w),
        }
    }

    #[test]
    fn scalar_normal_inverse_gamma_update() {
        // Hand-derived update for x_i ~ N(μ, λ), μ ~ N(0, λ/κ), λ ~ IG(ν₀/2, s₀²/2).
        let xs = [0.5, 1.5, -0.25, 2.0];
        let h = hyper(1);
        let stat = scalar_stats(&xs);
        let p = spherical_equal_volume(std::slice::from_ref(&stat), &h);
        let n = xs.len() as f64;
        let sum_sq: f64 = xs.iter().map(|x| x * x).sum();
        let mean_n = xs.iter().sum::<f64>() / (n + h.kappa);
        let scale = (h.s0_sq + sum_sq - (n + h.kappa) * mean_n * mean_n) / 2.0;
        assert_abs_diff_eq!(p.shape, (h.nu0 + n) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.scale, scale, epsilon = 1e-12);
    }

    #[test]
    fn one_dimensional_full_matches_spherical() {
        let h = hyper(1);
        let stat = scalar_stats(&[1.0, 2.0, 4.0]);
        let iw = component_covariance(&stat, &h).unwrap();
        let ig = spherical_volume(&stat, &h);
        assert_abs_diff_eq!(iw.dof / 2.0, ig.shape, epsilon = 1e-12);
        assert_abs_diff_eq!(iw.scale.matrix()[(0, 0)] / 2.0, ig.scale, epsilon = 1e-12);
    }

    #[test]
    fn empty_cluster_reduces_to_prior() {
        let h = hyper(2);
        let empty = SufficientStats::empty(2);
        let ig = spherical_volume(&empty, &h);
        assert_eq!((ig.shape, ig.scale), (h.nu0 / 2.0, h.s0_sq / 2.0));
        let iw = component_covariance(&empty, &h).unwrap();
        assert_eq!(iw.dof, h.nu0);
        assert_eq!(iw.scale.matrix(), h.lambda0.matrix());
        let normal = mean(&empty, &h, &SpdMatrix::identity(2));
        assert_eq!(normal.mean, h.mu0);
        assert_abs_diff_eq!(normal.cov.matrix()[(0, 0)], 1.0 / h.kappa, epsilon = 1e-15);
    }

    #[test]
    fn rotated_diagonal_identity_rotation() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let id = DMatrix::identity(2, 2);
        assert_eq!(rotated_diagonal(&m, Some(&id)), m.diagonal());
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(rotated_diagonal(&m, Some(&swap)), DVector::from_vec(vec![3.0, 2.0]));
    }

    #[test]
    fn shared_scale_weights_by_volume() {
        let h = hyper(1);
        let stats = vec![scalar_stats(&[0.0, 2.0]), scalar_stats(&[1.0, 5.0])];
        let plain = shared_covariance(&stats, &h, None).unwrap();
        let scaled = shared_covariance(&stats, &h, Some(&[1.0, 2.0])).unwrap();
        let s1 = stats[1].prior_scatter(&h)[(0, 0)];
        assert_abs_diff_eq!(
            plain.scale.matrix()[(0, 0)] - scaled.scale.matrix()[(0, 0)],
            s1 / 2.0,
            epsilon = 1e-12
        );
        assert_eq!(plain.dof, h.nu0 + 4.0);
    }
}
