use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use super::conditionals::{self, InvGammaParams, InvWishartParams};
use super::{ComponentDraw, CovarianceParams, Hyperparams, LocalParams, MixtureParams, ModelFamily, SufficientStats};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::eigen_descending;
use crate::random::{
    logpdf_inverse_gamma, logpdf_inverse_wishart, logpdf_mvn, sample_mvn, RngHandle, SpdMatrix,
};

fn prior_volume(h: &Hyperparams) -> InvGammaParams {
    InvGammaParams {
        shape: h.nu0 / 2.0,
        scale: h.s0_sq / 2.0,
    }
}

fn prior_covariance(h: &Hyperparams) -> InvWishartParams {
    InvWishartParams {
        dof: h.nu0,
        scale: h.lambda0.clone(),
    }
}

fn prior_shape(h: &Hyperparams, rng: &mut RngHandle) -> Result<DVector<f64>> {
    let ig = prior_volume(h);
    let values = (0..h.dim()).map(|_| ig.sample(rng)).collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(values))
}

/// Eigenvectors (descending eigenvalues, sign-canonical) of an IW draw.
fn orientation_from(draw: &SpdMatrix) -> DMatrix<f64> {
    eigen_descending(draw.matrix()).1
}

/// Fresh per-component pieces and mean for a new cluster, given the shared
/// blocks of `params`. A first component of a reference-volume model gets
/// volume 1.
pub fn sample_prior_component(
    params: &MixtureParams,
    h: &Hyperparams,
    rng: &mut RngHandle,
) -> Result<ComponentDraw> {
    let model = params.model();
    let volume = |rng: &mut RngHandle| -> Result<f64> {
        if model.has_reference_volume() && params.k() == 0 {
            Ok(1.0)
        } else {
            prior_volume(h).sample(rng)
        }
    };
    let local = match model {
        ModelFamily::SphericalEqual | ModelFamily::DiagonalEqual | ModelFamily::GeneralEqual => LocalParams::None,
        ModelFamily::SphericalFree | ModelFamily::DiagonalFree | ModelFamily::GeneralScaleFree => {
            LocalParams::Volume(volume(rng)?)
        }
        ModelFamily::GeneralOrientFree => LocalParams::Orientation(orientation_from(&prior_covariance(h).sample(rng)?)),
        ModelFamily::GeneralOrientScaleFree => {
            let orientation = orientation_from(&prior_covariance(h).sample(rng)?);
            LocalParams::OrientedVolume {
                orientation,
                volume: volume(rng)?,
            }
        }
        ModelFamily::GeneralFull => LocalParams::Covariance(prior_covariance(h).sample(rng)?),
    };
    let cov = params.assemble(&local)?;
    let mean = sample_mvn(&h.mu0, &cov.scaled(1.0 / h.kappa), rng)?;
    Ok(ComponentDraw { mean, local })
}

/// Draws the shared blocks and `k` components from the prior.
pub fn sample_prior(model: ModelFamily, h: &Hyperparams, k: usize, rng: &mut RngHandle) -> Result<MixtureParams> {
    let d = h.dim();
    let covariance = match model {
        ModelFamily::SphericalEqual => CovarianceParams::SphericalEqual {
            volume: prior_volume(h).sample(rng)?,
        },
        ModelFamily::SphericalFree => CovarianceParams::SphericalFree { volumes: vec![] },
        ModelFamily::DiagonalEqual => CovarianceParams::DiagonalEqual {
            shape: prior_shape(h, rng)?,
        },
        ModelFamily::DiagonalFree => CovarianceParams::DiagonalFree {
            shape: prior_shape(h, rng)?,
            volumes: vec![],
        },
        ModelFamily::GeneralEqual => CovarianceParams::GeneralEqual {
            sigma: prior_covariance(h).sample(rng)?,
        },
        ModelFamily::GeneralScaleFree => CovarianceParams::GeneralScaleFree {
            sigma0: prior_covariance(h).sample(rng)?,
            volumes: vec![],
        },
        ModelFamily::GeneralOrientFree => CovarianceParams::GeneralOrientFree {
            shape: prior_shape(h, rng)?,
            orientations: vec![],
        },
        ModelFamily::GeneralOrientScaleFree => CovarianceParams::GeneralOrientScaleFree {
            shape: prior_shape(h, rng)?,
            orientations: vec![],
            volumes: vec![],
        },
        ModelFamily::GeneralFull => CovarianceParams::GeneralFull { sigmas: vec![] },
    };
    let mut params = MixtureParams::new(d, vec![], covariance)?;
    for _ in 0..k {
        let draw = sample_prior_component(&params, h, rng)?;
        params.push_component(draw)?;
    }
    Ok(params)
}

fn block<T>(model: ModelFamily, name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Sweep {
        model: model.code(),
        block: name,
        source: Box::new(e),
    })
}

fn sample_all(params: &[InvGammaParams], rng: &mut RngHandle) -> Result<Vec<f64>> {
    params.iter().map(|p| p.sample(rng)).collect()
}

fn orientations_given(
    stats: &[SufficientStats],
    h: &Hyperparams,
    rng: &mut RngHandle,
) -> Result<Vec<DMatrix<f64>>> {
    stats
        .iter()
        .map(|s| Ok(orientation_from(&conditionals::component_covariance(s, h)?.sample(rng)?)))
        .collect()
}

/// Volumes for components `1..K` from `conditional`; component 0 keeps the
/// reference volume 1.
fn reference_volumes(
    stats: &[SufficientStats],
    rng: &mut RngHandle,
    mut conditional: impl FnMut(usize, &SufficientStats) -> InvGammaParams,
) -> Result<Vec<f64>> {
    stats
        .iter()
        .enumerate()
        .map(|(k, s)| if k == 0 { Ok(1.0) } else { conditional(k, s).sample(rng) })
        .collect()
}

/// One Gibbs sweep over the covariance blocks (integrating out the means),
/// then the means given the new covariances. Labels must lie in
/// `0..current.k()`; empty clusters are drawn from their prior reduction.
pub fn sample_posterior(
    data: &DataMatrix,
    labels: &[usize],
    h: &Hyperparams,
    current: &MixtureParams,
    rng: &mut RngHandle,
) -> Result<MixtureParams> {
    let model = current.model();
    let d = data.d();
    let stats = block(model, "statistics", SufficientStats::for_all(data, labels, current.k()))?;

    let covariance = match current.covariance_params() {
        CovarianceParams::SphericalEqual { .. } => CovarianceParams::SphericalEqual {
            volume: block(model, "volume", conditionals::spherical_equal_volume(&stats, h).sample(rng))?,
        },
        CovarianceParams::SphericalFree { .. } => CovarianceParams::SphericalFree {
            volumes: block(
                model,
                "volume",
                stats.iter().map(|s| conditionals::spherical_volume(s, h).sample(rng)).collect(),
            )?,
        },
        CovarianceParams::DiagonalEqual { .. } => CovarianceParams::DiagonalEqual {
            shape: DVector::from_vec(block(
                model,
                "shape",
                sample_all(&conditionals::equal_shape(&stats, h, None), rng),
            )?),
        },
        CovarianceParams::DiagonalFree { volumes, .. } => {
            let shape = DVector::from_vec(block(
                model,
                "shape",
                sample_all(&conditionals::scaled_shape(&stats, h, volumes, None), rng),
            )?);
            let volumes = block(
                model,
                "volume",
                reference_volumes(&stats, rng, |_, s| conditionals::shape_volume(s, h, &shape, None)),
            )?;
            CovarianceParams::DiagonalFree { shape, volumes }
        }
        CovarianceParams::GeneralEqual { .. } => CovarianceParams::GeneralEqual {
            sigma: block(
                model,
                "covariance",
                conditionals::shared_covariance(&stats, h, None).and_then(|p| p.sample(rng)),
            )?,
        },
        CovarianceParams::GeneralScaleFree { volumes, .. } => {
            let sigma0 = block(
                model,
                "covariance",
                conditionals::shared_covariance(&stats, h, Some(volumes)).and_then(|p| p.sample(rng)),
            )?;
            let volumes = block(
                model,
                "volume",
                reference_volumes(&stats, rng, |_, s| conditionals::scaled_volume(s, h, &sigma0)),
            )?;
            CovarianceParams::GeneralScaleFree { sigma0, volumes }
        }
        CovarianceParams::GeneralOrientFree { .. } => {
            let orientations = block(model, "orientation", orientations_given(&stats, h, rng))?;
            let shape = DVector::from_vec(block(
                model,
                "shape",
                sample_all(&conditionals::equal_shape(&stats, h, Some(&orientations)), rng),
            )?);
            CovarianceParams::GeneralOrientFree { shape, orientations }
        }
        CovarianceParams::GeneralOrientScaleFree { volumes, .. } => {
            let orientations = block(model, "orientation", orientations_given(&stats, h, rng))?;
            let shape = DVector::from_vec(block(
                model,
                "shape",
                sample_all(&conditionals::scaled_shape(&stats, h, volumes, Some(&orientations)), rng),
            )?);
            let volumes = block(
                model,
                "volume",
                reference_volumes(&stats, rng, |k, s| {
                    conditionals::shape_volume(s, h, &shape, Some(&orientations[k]))
                }),
            )?;
            CovarianceParams::GeneralOrientScaleFree {
                shape,
                orientations,
                volumes,
            }
        }
        CovarianceParams::GeneralFull { .. } => CovarianceParams::GeneralFull {
            sigmas: block(
                model,
                "covariance",
                stats
                    .iter()
                    .map(|s| conditionals::component_covariance(s, h)?.sample(rng))
                    .collect(),
            )?,
        },
    };

    let mut next = block(
        model,
        "assemble",
        MixtureParams::new(d, current.means().to_vec(), covariance),
    )?;
    let means = block(
        model,
        "mean",
        stats
            .iter()
            .zip(next.covariances())
            .map(|(s, cov)| conditionals::mean(s, h, cov).sample(rng))
            .collect(),
    )?;
    next.set_means(means);
    Ok(next)
}

/// Log density of the orientation prior: uniform (Haar) over orthonormal
/// frames in sign-canonical form.
pub fn log_orientation_density(d: usize) -> f64 {
    let ln_pi = std::f64::consts::PI.ln();
    let ln_vol_so: f64 = (1..d)
        .map(|k| {
            let m = (k + 1) as f64;
            std::f64::consts::LN_2 + 0.5 * m * ln_pi - ln_gamma(0.5 * m)
        })
        .sum();
    (d as f64 - 1.0) * std::f64::consts::LN_2 - ln_vol_so
}

/// Sum of prior log densities over every block, including normalizing
/// constants; `-∞` outside the support.
pub fn log_prior_density(params: &MixtureParams, h: &Hyperparams) -> f64 {
    let d = params.dim();
    let ig = prior_volume(h);
    let lig = |v: f64| logpdf_inverse_gamma(v, ig.shape, ig.scale);
    let liw = |s: &SpdMatrix| logpdf_inverse_wishart(s, h.nu0, &h.lambda0);
    let shape_term = |a: &DVector<f64>| a.iter().map(|&v| lig(v)).sum::<f64>();
    let reference_terms = |volumes: &[f64]| volumes.iter().skip(1).map(|&v| lig(v)).sum::<f64>();

    let mut total: f64 = params
        .means()
        .iter()
        .zip(params.covariances())
        .map(|(mu, cov)| logpdf_mvn(mu, &h.mu0, &cov.scaled(1.0 / h.kappa)))
        .sum();
    total += match params.covariance_params() {
        CovarianceParams::SphericalEqual { volume } => lig(*volume),
        CovarianceParams::SphericalFree { volumes } => volumes.iter().map(|&v| lig(v)).sum(),
        CovarianceParams::DiagonalEqual { shape } => shape_term(shape),
        CovarianceParams::DiagonalFree { shape, volumes } => shape_term(shape) + reference_terms(volumes),
        CovarianceParams::GeneralEqual { sigma } => liw(sigma),
        CovarianceParams::GeneralScaleFree { sigma0, volumes } => liw(sigma0) + reference_terms(volumes),
        CovarianceParams::GeneralOrientFree { shape, orientations } => {
            shape_term(shape) + orientations.len() as f64 * log_orientation_density(d)
        }
        CovarianceParams::GeneralOrientScaleFree {
            shape,
            orientations,
            volumes,
        } => shape_term(shape) + reference_terms(volumes) + orientations.len() as f64 * log_orientation_density(d),
        CovarianceParams::GeneralFull { sigmas } => sigmas.iter().map(liw).sum(),
    };
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hyper(d: usize) -> Hyperparams {
        Hyperparams {
            mu0: DVector::zeros(d),
            kappa: 1.0,
            nu0: d as f64 + 4.0,
            lambda0: SpdMatrix::identity(d),
            s0_sq: 2.0,
            alpha_a: 1.0,
            alpha_b: 1.0,
        }
    }

    #[test]
    fn spherical_prior_structure() {
        let mut rng = RngHandle::new(1);
        let p = sample_prior(ModelFamily::SphericalEqual, &hyper(2), 3, &mut rng).unwrap();
        let v = p.covariance(0).matrix()[(0, 0)];
        assert!(v > 0.0);
        for s in p.covariances() {
            assert_eq!(s.matrix(), &(DMatrix::identity(2, 2) * v));
        }
    }

    #[test]
    fn reference_volume_is_one() {
        let mut rng = RngHandle::new(2);
        for model in [ModelFamily::GeneralScaleFree, ModelFamily::DiagonalFree, ModelFamily::GeneralOrientScaleFree] {
            let p = sample_prior(model, &hyper(2), 3, &mut rng).unwrap();
            assert_eq!(p.covariance_params().volumes().unwrap()[0], 1.0);
        }
    }

    #[test]
    fn full_prior_mean() {
        let h = hyper(2);
        let mut rng = RngHandle::new(3);
        let draws = 10_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..draws {
            acc += sample_prior(ModelFamily::GeneralFull, &h, 1, &mut rng).unwrap().covariance(0).matrix();
        }
        acc /= draws as f64;
        // E[Σ] = Λ₀/(ν₀ - d - 1) = I/3
        assert!((acc - DMatrix::identity(2, 2) / 3.0).amax() < 0.03);
    }

    #[test]
    fn sweep_output_is_spd_for_every_model() {
        let mut rng = RngHandle::new(4);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![rng.standard_normal() + (i % 2) as f64 * 4.0, rng.standard_normal()])
            .collect();
        let data = DataMatrix::from_rows(&rows).unwrap();
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let h = Hyperparams::from_data(&data).unwrap();
        for model in ModelFamily::ALL {
            let mut p = sample_prior(model, &h, 2, &mut rng).unwrap();
            for _ in 0..5 {
                p = sample_posterior(&data, &labels, &h, &p, &mut rng).unwrap();
            }
            assert_eq!(p.k(), 2);
            for s in p.covariances() {
                assert!(s.matrix().clone().cholesky().is_some());
            }
            if let CovarianceParams::GeneralOrientFree { orientations, .. }
            | CovarianceParams::GeneralOrientScaleFree { orientations, .. } = p.covariance_params()
            {
                for o in orientations {
                    assert!((o * o.transpose() - DMatrix::identity(2, 2)).amax() < 1e-8);
                }
            }
            assert!(log_prior_density(&p, &h).is_finite());
        }
    }

    #[test]
    fn sweep_recovers_cluster_means() {
        let mut rng = RngHandle::new(5);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|i| vec![rng.standard_normal() * 0.3 + if i < 200 { -3.0 } else { 3.0 }])
            .collect();
        let data = DataMatrix::from_rows(&rows).unwrap();
        let labels: Vec<usize> = (0..400).map(|i| usize::from(i >= 200)).collect();
        let h = Hyperparams::from_data(&data).unwrap();
        let mut p = sample_prior(ModelFamily::SphericalFree, &h, 2, &mut rng).unwrap();
        for _ in 0..20 {
            p = sample_posterior(&data, &labels, &h, &p, &mut rng).unwrap();
        }
        assert!((p.means()[0][0] + 3.0).abs() < 0.2);
        assert!((p.means()[1][0] - 3.0).abs() < 0.2);
    }

    #[test]
    fn spherical_log_prior_is_compositional() {
        let h = hyper(2);
        let lambda = h.s0_sq / 2.0 / (h.nu0 / 2.0 + 1.0);
        let p = MixtureParams::new(
            2,
            vec![h.mu0.clone(), h.mu0.clone()],
            CovarianceParams::SphericalEqual { volume: lambda },
        )
        .unwrap();
        let cov = SpdMatrix::scaled_identity(2, lambda / h.kappa);
        let expected = logpdf_inverse_gamma(lambda, h.nu0 / 2.0, h.s0_sq / 2.0) + 2.0 * logpdf_mvn(&h.mu0, &h.mu0, &cov);
        assert_abs_diff_eq!(log_prior_density(&p, &h), expected, epsilon = 1e-12);
    }

    #[test]
    fn volume_prior_integrates_to_one() {
        // d = 1, fixed mean; integrate over λ on a log grid.
        let h = hyper(1);
        let mu = DVector::from_vec(vec![0.3]);
        let (lo, hi, steps) = (-12.0_f64, 12.0_f64, 40_000);
        let du = (hi - lo) / steps as f64;
        let mut integral = 0.0;
        for i in 0..steps {
            let u = lo + (i as f64 + 0.5) * du;
            let lambda = u.exp();
            let p = MixtureParams::new(1, vec![mu.clone()], CovarianceParams::SphericalEqual { volume: lambda }).unwrap();
            let mean_term = logpdf_mvn(&mu, &h.mu0, &SpdMatrix::scaled_identity(1, lambda / h.kappa));
            integral += (log_prior_density(&p, &h) - mean_term + u).exp() * du;
        }
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn orientation_density_normalizes_in_two_dimensions() {
        // Sign-canonical 2-d frames cover an angle range of length π.
        assert_abs_diff_eq!(log_orientation_density(2), -std::f64::consts::PI.ln(), epsilon = 1e-12);
        assert_eq!(log_orientation_density(1), 0.0);
    }

    #[test]
    fn negative_volume_has_no_density() {
        let h = hyper(1);
        assert_eq!(logpdf_inverse_gamma(-1.0, h.nu0 / 2.0, h.s0_sq / 2.0), f64::NEG_INFINITY);
        assert!(MixtureParams::new(1, vec![DVector::zeros(1)], CovarianceParams::SphericalEqual { volume: -1.0 }).is_err());
    }
}
