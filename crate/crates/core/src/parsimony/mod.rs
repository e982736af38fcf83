//! Eigenvalue-decomposed covariance structures `Σ_k = λ_k D_k A_k D_kᵀ`,
//! their conjugate priors and full-conditional samplers.

pub mod conditionals;
mod params;
mod sampling;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::eigen_descending;
use crate::random::SpdMatrix;

pub use params::{ComponentDraw, CovarianceParams, Decomposition, LocalParams, MixtureParams};
pub use sampling::{
    log_orientation_density, log_prior_density, sample_posterior, sample_prior, sample_prior_component,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelFamily {
    /// λI
    SphericalEqual,
    /// λ_k I
    SphericalFree,
    /// λA
    DiagonalEqual,
    /// λ_k A
    DiagonalFree,
    /// λDADᵀ
    GeneralEqual,
    /// λ_k DADᵀ
    GeneralScaleFree,
    /// λD_k A D_kᵀ
    GeneralOrientFree,
    /// λ_k D_k A D_kᵀ
    GeneralOrientScaleFree,
    /// λ_k D_k A_k D_kᵀ
    GeneralFull,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceType {
    Spherical,
    Diagonal,
    General,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 9] = [
        ModelFamily::SphericalEqual,
        ModelFamily::SphericalFree,
        ModelFamily::DiagonalEqual,
        ModelFamily::DiagonalFree,
        ModelFamily::GeneralEqual,
        ModelFamily::GeneralScaleFree,
        ModelFamily::GeneralOrientFree,
        ModelFamily::GeneralOrientScaleFree,
        ModelFamily::GeneralFull,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ModelFamily::SphericalEqual => "lI",
            ModelFamily::SphericalFree => "lkI",
            ModelFamily::DiagonalEqual => "lA",
            ModelFamily::DiagonalFree => "lkA",
            ModelFamily::GeneralEqual => "lDADt",
            ModelFamily::GeneralScaleFree => "lkDADt",
            ModelFamily::GeneralOrientFree => "lDkADkt",
            ModelFamily::GeneralOrientScaleFree => "lkDkADkt",
            ModelFamily::GeneralFull => "lkDkAkDkt",
        }
    }

    pub fn covariance_type(self) -> CovarianceType {
        match self {
            ModelFamily::SphericalEqual | ModelFamily::SphericalFree => CovarianceType::Spherical,
            ModelFamily::DiagonalEqual | ModelFamily::DiagonalFree => CovarianceType::Diagonal,
            _ => CovarianceType::General,
        }
    }

    /// Models whose first component volume is pinned to 1 so that the shared
    /// block and the volumes are identifiable.
    pub fn has_reference_volume(self) -> bool {
        matches!(
            self,
            ModelFamily::DiagonalFree | ModelFamily::GeneralScaleFree | ModelFamily::GeneralOrientScaleFree
        )
    }

    /// Free-parameter count with `υ = (K-1) + Kd` and `ω = d(d+1)/2`.
    pub fn free_parameter_count(self, k: usize, d: usize) -> usize {
        let upsilon = (k - 1) + k * d;
        let omega = d * (d + 1) / 2;
        match self {
            ModelFamily::SphericalEqual => upsilon + 1,
            ModelFamily::SphericalFree => upsilon + d,
            ModelFamily::DiagonalEqual => upsilon + d,
            ModelFamily::DiagonalFree => upsilon + d + k - 1,
            ModelFamily::GeneralEqual => upsilon + omega,
            ModelFamily::GeneralScaleFree => upsilon + omega + k - 1,
            ModelFamily::GeneralOrientFree => upsilon + k * omega - (k - 1) * d,
            ModelFamily::GeneralOrientScaleFree => upsilon + k * omega - (k - 1) * (d - 1),
            ModelFamily::GeneralFull => upsilon + k * omega,
        }
    }

    /// Number of coordinates in the parameter vector actually sampled. Equal
    /// to [`free_parameter_count`](Self::free_parameter_count) except for
    /// `lkI`, which carries one volume per component.
    pub fn chart_dimension(self, k: usize, d: usize) -> usize {
        match self {
            ModelFamily::SphericalFree => (k - 1) + k * d + k,
            other => other.free_parameter_count(k, d),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .iter()
            .copied()
            .find(|m| m.code() == s.trim())
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

/// Prior hyperparameters `(μ₀, κ, ν₀, Λ₀, s₀², a, b)`; `(a, b)` are the
/// shape and rate of the Gamma prior on the concentration α.
#[derive(Clone, Debug)]
pub struct Hyperparams {
    pub mu0: DVector<f64>,
    pub kappa: f64,
    pub nu0: f64,
    pub lambda0: SpdMatrix,
    pub s0_sq: f64,
    pub alpha_a: f64,
    pub alpha_b: f64,
}

impl Hyperparams {
    pub const DEFAULT_KAPPA: f64 = 5.0;
    pub const APPENDIX_KAPPA: f64 = 0.1;

    /// Empirical defaults: data mean, κ = 5, ν₀ = d + 2, Λ₀ = data
    /// covariance, s₀² = largest eigenvalue of Λ₀, a = b = 1.
    pub fn from_data(data: &DataMatrix) -> Result<Self> {
        if data.n() < 2 {
            return Err(Error::domain("empirical hyperparameters need at least 2 observations"));
        }
        let cov = data.covariance();
        let lambda0 = SpdMatrix::from_symmetrized(&cov, "lambda0")?;
        let (eig, _) = eigen_descending(&cov);
        let h = Self {
            mu0: data.mean(),
            kappa: Self::DEFAULT_KAPPA,
            nu0: data.d() as f64 + 2.0,
            lambda0,
            s0_sq: eig[0],
            alpha_a: 1.0,
            alpha_b: 1.0,
        };
        h.validate(data.d())?;
        Ok(h)
    }

    /// Same as [`from_data`](Self::from_data) with the weak shrinkage κ = 0.1.
    pub fn appendix_preset(data: &DataMatrix) -> Result<Self> {
        let mut h = Self::from_data(data)?;
        h.kappa = Self::APPENDIX_KAPPA;
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.mu0.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.mu0.len(),
            });
        }
        if self.lambda0.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.lambda0.dim(),
            });
        }
        if self.mu0.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("mu0 must be finite"));
        }
        let positive = [
            ("kappa", self.kappa),
            ("s0_sq", self.s0_sq),
            ("alpha_a", self.alpha_a),
            ("alpha_b", self.alpha_b),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.nu0 > d as f64 - 1.0) || !self.nu0.is_finite() {
            return Err(Error::domain(format!("nu0 must exceed d - 1 = {}, got {}", d as f64 - 1.0, self.nu0)));
        }
        Ok(())
    }
}

/// Count, mean and scatter of one cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct SufficientStats {
    pub n: usize,
    pub mean: DVector<f64>,
    pub scatter: DMatrix<f64>,
}

impl SufficientStats {
    pub fn empty(d: usize) -> Self {
        Self {
            n: 0,
            mean: DVector::zeros(d),
            scatter: DMatrix::zeros(d, d),
        }
    }

    pub fn compute(data: &DataMatrix, labels: &[usize], k: usize) -> Self {
        let rows: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == k).collect();
        Self::from_rows(data, &rows)
    }

    fn from_rows(data: &DataMatrix, rows: &[usize]) -> Self {
        let d = data.d();
        if rows.is_empty() {
            return Self::empty(d);
        }
        let x = data.values();
        let mut mean = DVector::zeros(d);
        for &i in rows {
            mean += x.row(i).transpose();
        }
        mean /= rows.len() as f64;
        let mut scatter = DMatrix::zeros(d, d);
        for &i in rows {
            let c = x.row(i).transpose() - &mean;
            scatter.ger(1.0, &c, &c, 1.0);
        }
        Self {
            n: rows.len(),
            mean,
            scatter,
        }
    }

    /// Statistics for clusters `0..k`; labels must be below `k`.
    pub fn for_all(data: &DataMatrix, labels: &[usize], k: usize) -> Result<Vec<Self>> {
        if labels.len() != data.n() {
            return Err(Error::DimensionMismatch {
                expected: data.n(),
                found: labels.len(),
            });
        }
        let mut members = vec![Vec::new(); k];
        for (i, &z) in labels.iter().enumerate() {
            if z >= k {
                return Err(Error::Labels(format!("label {z} at row {i} out of range for {k} clusters")));
            }
            members[z].push(i);
        }
        Ok(members.iter().map(|rows| Self::from_rows(data, rows)).collect())
    }

    /// `n κ / (n + κ)`
    pub fn shrinkage(&self, h: &Hyperparams) -> f64 {
        let n = self.n as f64;
        n * h.kappa / (n + h.kappa)
    }

    /// `W + nκ/(n+κ) (x̄ - μ₀)(x̄ - μ₀)ᵀ`; zero for an empty cluster.
    pub fn prior_scatter(&self, h: &Hyperparams) -> DMatrix<f64> {
        if self.n == 0 {
            return DMatrix::zeros(self.scatter.nrows(), self.scatter.ncols());
        }
        let diff = &self.mean - &h.mu0;
        let mut s = self.scatter.clone();
        s.ger(self.shrinkage(h), &diff, &diff, 1.0);
        s
    }

    /// `(n x̄ + κ μ₀)/(n + κ)`
    pub fn posterior_mean(&self, h: &Hyperparams) -> DVector<f64> {
        if self.n == 0 {
            return h.mu0.clone();
        }
        let n = self.n as f64;
        (&self.mean * n + &h.mu0 * h.kappa) / (n + h.kappa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn data(rows: &[[f64; 2]]) -> DataMatrix {
        DataMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn codes_round_trip() {
        for m in ModelFamily::ALL {
            assert_eq!(m.code().parse::<ModelFamily>().unwrap(), m);
        }
        assert!("lkX".parse::<ModelFamily>().is_err());
    }

    #[test]
    fn type_column() {
        use CovarianceType::*;
        let types: Vec<_> = ModelFamily::ALL.iter().map(|m| m.covariance_type()).collect();
        assert_eq!(
            types,
            vec![Spherical, Spherical, Diagonal, Diagonal, General, General, General, General, General]
        );
    }

    #[test]
    fn parameter_count_examples() {
        assert_eq!(ModelFamily::SphericalEqual.free_parameter_count(2, 2), 6);
        assert_eq!(ModelFamily::GeneralFull.free_parameter_count(2, 2), 11);
        assert_eq!(ModelFamily::GeneralEqual.free_parameter_count(1, 3), 9);
    }

    #[test]
    fn chart_matches_count_except_spherical_free() {
        for m in ModelFamily::ALL {
            for k in 1..6 {
                for d in 1..6 {
                    if m != ModelFamily::SphericalFree {
                        assert_eq!(m.chart_dimension(k, d), m.free_parameter_count(k, d));
                    }
                }
            }
        }
        assert_eq!(ModelFamily::SphericalFree.chart_dimension(3, 3), ModelFamily::SphericalFree.free_parameter_count(3, 3));
    }

    #[test]
    fn stats_single_member() {
        let x = data(&[[1.0, 2.0], [5.0, 5.0]]);
        let s = SufficientStats::compute(&x, &[0, 1], 0);
        assert_eq!(s.n, 1);
        assert_eq!(s.mean, DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(s.scatter, DMatrix::zeros(2, 2));
    }

    #[test]
    fn stats_pair_and_empty() {
        let x = data(&[[0.0, 0.0], [2.0, 0.0]]);
        let s = SufficientStats::compute(&x, &[0, 0], 0);
        assert_eq!(s.mean, DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(s.scatter, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        let e = SufficientStats::compute(&x, &[0, 0], 1);
        assert_eq!(e.n, 0);
        assert_eq!(e.scatter, DMatrix::zeros(2, 2));
        let all = SufficientStats::for_all(&x, &[0, 0], 2).unwrap();
        assert_eq!(all[1].n, 0);
        assert!(SufficientStats::for_all(&x, &[0, 2], 2).is_err());
    }

    #[test]
    fn posterior_mean_example() {
        let h = Hyperparams {
            mu0: DVector::zeros(2),
            kappa: 1.0,
            nu0: 4.0,
            lambda0: SpdMatrix::identity(2),
            s0_sq: 1.0,
            alpha_a: 1.0,
            alpha_b: 1.0,
        };
        let s = SufficientStats {
            n: 4,
            mean: DVector::from_vec(vec![2.0, 2.0]),
            scatter: DMatrix::zeros(2, 2),
        };
        let mu = s.posterior_mean(&h);
        assert_abs_diff_eq!(mu[0], 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[1], 1.6, epsilon = 1e-12);
        assert_eq!(SufficientStats::empty(2).posterior_mean(&h), h.mu0);
    }

    #[test]
    fn empirical_defaults() {
        let x = data(&[[0.0, 0.0], [2.0, 0.0], [0.0, 1.0], [2.0, 1.0]]);
        let h = Hyperparams::from_data(&x).unwrap();
        assert_eq!(h.kappa, 5.0);
        assert_eq!(h.nu0, 4.0);
        assert_abs_diff_eq!(h.mu0[0], 1.0);
        assert_abs_diff_eq!(h.lambda0.matrix()[(0, 0)], 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.s0_sq, 4.0 / 3.0, epsilon = 1e-12);
        assert_eq!(Hyperparams::appendix_preset(&x).unwrap().kappa, 0.1);
        let mut bad = h.clone();
        bad.nu0 = 1.0;
        assert!(bad.validate(2).is_err());
    }
}
