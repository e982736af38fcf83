//! Laplace–Metropolis marginal likelihoods and Bayes-factor comparison.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::chain::{ChainResult, ChainSample, SamplerKind};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cayley_skew, log_det_identity_plus, strict_lower, to_rotation};
use crate::parsimony::{log_prior_density, CovarianceParams, Hyperparams, MixtureParams, ModelFamily};
use crate::random::{logpdf_dirichlet, SpdMatrix};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_2: f64 = std::f64::consts::LN_2;

fn safe_ln(w: f64) -> f64 {
    w.max(f64::MIN_POSITIVE).ln()
}

fn push_cholesky(out: &mut Vec<f64>, sigma: &SpdMatrix) {
    let l = sigma.cholesky_lower();
    for i in 0..l.nrows() {
        for j in 0..i {
            out.push(l[(i, j)]);
        }
        out.push(l[(i, i)].ln());
    }
}

fn cholesky_log_jacobian(sigma: &SpdMatrix) -> f64 {
    let l = sigma.cholesky_lower();
    let d = l.nrows();
    d as f64 * LN_2 + (0..d).map(|i| (d - i + 1) as f64 * l[(i, i)].ln()).sum::<f64>()
}

fn cayley(orientation: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cayley_skew(&to_rotation(orientation))
}

fn push_cayley(out: &mut Vec<f64>, orientation: &DMatrix<f64>) -> Result<()> {
    out.extend(strict_lower(&cayley(orientation)?));
    Ok(())
}

fn cayley_log_jacobian(orientation: &DMatrix<f64>) -> Result<f64> {
    let d = orientation.nrows() as f64;
    let s = cayley(orientation)?;
    Ok(d * (d - 1.0) / 2.0 * LN_2 - (d - 1.0) * log_det_identity_plus(&s))
}

/// Flattens mixing weights (log ratios to the last), means, then the
/// covariance blocks: logs of volumes and shape entries, Cholesky factors
/// with log diagonals, and Cayley coordinates of orientations. Reference
/// volumes are omitted.
pub fn vectorize_parameters(params: &MixtureParams, weights: &[f64]) -> Result<Vec<f64>> {
    let k = params.k();
    if weights.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: weights.len(),
        });
    }
    let mut out = Vec::with_capacity(params.model().chart_dimension(k.max(1), params.dim()));
    if k > 1 {
        let last = safe_ln(weights[k - 1]);
        out.extend(weights[..k - 1].iter().map(|&w| safe_ln(w) - last));
    }
    for m in params.means() {
        out.extend(m.iter().copied());
    }
    let logs = |out: &mut Vec<f64>, v: &mut dyn Iterator<Item = f64>| out.extend(v.map(f64::ln));
    match params.covariance_params() {
        CovarianceParams::SphericalEqual { volume } => out.push(volume.ln()),
        CovarianceParams::SphericalFree { volumes } => logs(&mut out, &mut volumes.iter().copied()),
        CovarianceParams::DiagonalEqual { shape } => logs(&mut out, &mut shape.iter().copied()),
        CovarianceParams::DiagonalFree { shape, volumes } => {
            logs(&mut out, &mut shape.iter().copied());
            logs(&mut out, &mut volumes.iter().skip(1).copied());
        }
        CovarianceParams::GeneralEqual { sigma } => push_cholesky(&mut out, sigma),
        CovarianceParams::GeneralScaleFree { sigma0, volumes } => {
            push_cholesky(&mut out, sigma0);
            logs(&mut out, &mut volumes.iter().skip(1).copied());
        }
        CovarianceParams::GeneralOrientFree { shape, orientations } => {
            logs(&mut out, &mut shape.iter().copied());
            for o in orientations {
                push_cayley(&mut out, o)?;
            }
        }
        CovarianceParams::GeneralOrientScaleFree {
            shape,
            orientations,
            volumes,
        } => {
            logs(&mut out, &mut shape.iter().copied());
            for o in orientations {
                push_cayley(&mut out, o)?;
            }
            logs(&mut out, &mut volumes.iter().skip(1).copied());
        }
        CovarianceParams::GeneralFull { sigmas } => {
            for s in sigmas {
                push_cholesky(&mut out, s);
            }
        }
    }
    Ok(out)
}

/// Log Jacobian of the map from the flattened coordinates back to the
/// covariance blocks (the weights are handled separately).
pub fn log_jacobian(params: &MixtureParams) -> Result<f64> {
    let sum_ln = |v: &mut dyn Iterator<Item = f64>| v.map(f64::ln).sum::<f64>();
    Ok(match params.covariance_params() {
        CovarianceParams::SphericalEqual { volume } => volume.ln(),
        CovarianceParams::SphericalFree { volumes } => sum_ln(&mut volumes.iter().copied()),
        CovarianceParams::DiagonalEqual { shape } => sum_ln(&mut shape.iter().copied()),
        CovarianceParams::DiagonalFree { shape, volumes } => {
            sum_ln(&mut shape.iter().copied()) + sum_ln(&mut volumes.iter().skip(1).copied())
        }
        CovarianceParams::GeneralEqual { sigma } => cholesky_log_jacobian(sigma),
        CovarianceParams::GeneralScaleFree { sigma0, volumes } => {
            cholesky_log_jacobian(sigma0) + sum_ln(&mut volumes.iter().skip(1).copied())
        }
        CovarianceParams::GeneralOrientFree { shape, orientations } => {
            let mut total = sum_ln(&mut shape.iter().copied());
            for o in orientations {
                total += cayley_log_jacobian(o)?;
            }
            total
        }
        CovarianceParams::GeneralOrientScaleFree {
            shape,
            orientations,
            volumes,
        } => {
            let mut total = sum_ln(&mut shape.iter().copied()) + sum_ln(&mut volumes.iter().skip(1).copied());
            for o in orientations {
                total += cayley_log_jacobian(o)?;
            }
            total
        }
        CovarianceParams::GeneralFull { sigmas } => sigmas.iter().map(cholesky_log_jacobian).sum(),
    })
}

/// Prior log density of the weights in log-ratio coordinates; zero for
/// Dirichlet process chains, whose weights carry no prior term.
fn weight_log_prior(sampler: SamplerKind, weights: &[f64]) -> f64 {
    match sampler {
        SamplerKind::DirichletProcess => 0.0,
        SamplerKind::Finite { concentration } => {
            let k = weights.len();
            if k < 2 {
                return 0.0;
            }
            let conc = vec![concentration / k as f64; k];
            logpdf_dirichlet(weights, &conc) + weights.iter().map(|&w| safe_ln(w)).sum::<f64>()
        }
    }
}

/// Log posterior kernel in flattened coordinates: likelihood, prior and
/// Jacobian.
pub fn log_posterior_kernel(sample: &ChainSample, sampler: SamplerKind, h: &Hyperparams) -> Result<f64> {
    Ok(sample.log_likelihood
        + log_prior_density(&sample.params, h)
        + weight_log_prior(sampler, &sample.weights)
        + log_jacobian(&sample.params)?)
}

/// Greedy matching of components to the reference means: repeatedly pairs
/// the closest remaining (reference, component) couple. Returns `order`
/// with new component `j` = old component `order[j]`.
pub fn align_to(reference: &[DVector<f64>], means: &[DVector<f64>]) -> Vec<usize> {
    let k = reference.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(k * k);
    for (r, a) in reference.iter().enumerate() {
        for (c, b) in means.iter().enumerate() {
            pairs.push(((a - b).norm_squared(), r, c));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut order = vec![usize::MAX; k];
    let mut taken = vec![false; k];
    for (_, r, c) in pairs {
        if order[r] == usize::MAX && !taken[c] {
            order[r] = c;
            taken[c] = true;
        }
    }
    order
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalLikelihoodEstimate {
    pub log_ml: f64,
    /// Free-parameter count of the model at the modal K.
    pub nu_m: usize,
    /// Dimension of the flattened parameter vector (equal to `nu_m` except
    /// for `lkI`).
    pub chart_dim: usize,
    pub k: usize,
    pub log_det_h: f64,
    pub theta_hat: Vec<f64>,
    /// Index into the chain's samples of the selected mode.
    pub theta_hat_index: usize,
    pub mode_samples: usize,
    /// Log likelihood, prior and Jacobian at the selected sample.
    pub log_kernel: f64,
}

/// `log p̂(X) = (ν/2) log 2π + ½ log|Ĥ| + log p(X|θ̂) + log p(θ̂)`, using the
/// samples at the modal K; `Ĥ` is their sample covariance after aligning
/// labels to `θ̂`, the sample with the largest posterior kernel.
pub fn laplace_marginal_loglik(chain: &ChainResult, h: &Hyperparams, data: &DataMatrix) -> Result<MarginalLikelihoodEstimate> {
    let k = chain.k_mode;
    let d = data.d();
    let chart_dim = chain.model.chart_dimension(k, d);
    let mode: Vec<usize> = (0..chain.samples.len()).filter(|&i| chain.samples[i].k() == k).collect();
    if mode.len() < chart_dim + 1 {
        return Err(Error::InsufficientSamples {
            have: mode.len(),
            need: chart_dim + 1,
        });
    }
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for &i in &mode {
        let score = log_posterior_kernel(&chain.samples[i], chain.sampler, h)?;
        if score > best.0 {
            best = (score, i);
        }
    }
    let (log_kernel, hat) = best;
    if !log_kernel.is_finite() {
        return Err(Error::domain("posterior kernel is not finite at any modal sample"));
    }
    let reference = chain.samples[hat].params.means().to_vec();

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(mode.len());
    let mut theta_hat = Vec::new();
    for &i in &mode {
        let s = &chain.samples[i];
        let v = if i == hat {
            let v = vectorize_parameters(&s.params, &s.weights)?;
            theta_hat = v.clone();
            v
        } else {
            let order = align_to(&reference, s.params.means());
            let params = s.params.permuted(&order)?;
            let weights: Vec<f64> = order.iter().map(|&j| s.weights[j]).collect();
            vectorize_parameters(&params, &weights)?
        };
        if v.len() != chart_dim {
            return Err(Error::DimensionMismatch {
                expected: chart_dim,
                found: v.len(),
            });
        }
        rows.push(v);
    }
    let log_det_h = log_det_sample_covariance(&rows)?;
    let log_ml = 0.5 * chart_dim as f64 * LN_2PI + 0.5 * log_det_h + log_kernel;
    Ok(MarginalLikelihoodEstimate {
        log_ml,
        nu_m: chain.model.free_parameter_count(k, d),
        chart_dim,
        k,
        log_det_h,
        theta_hat,
        theta_hat_index: hat,
        mode_samples: mode.len(),
        log_kernel,
    })
}

/// Log determinant of the sample covariance of `rows` with
/// `1e-10 · mean(diag)` added to the diagonal.
pub fn log_det_sample_covariance(rows: &[Vec<f64>]) -> Result<f64> {
    let m = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if p == 0 {
        return Ok(0.0);
    }
    if m < 2 {
        return Err(Error::InsufficientSamples { have: m, need: 2 });
    }
    let x = DMatrix::from_fn(m, p, |i, j| rows[i][j]);
    let mean = x.row_mean();
    let mut centered = x;
    for mut r in centered.row_iter_mut() {
        r -= &mean;
    }
    let mut cov = centered.transpose() * &centered / (m as f64 - 1.0);
    let ridge = 1e-10 * cov.diagonal().mean();
    for i in 0..p {
        cov[(i, i)] += ridge;
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularPosteriorCovariance);
    }
    match cov.cholesky() {
        Some(c) => Ok(2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()),
        None => Err(Error::SingularPosteriorCovariance),
    }
}

/// Evidence bands on `2 log BF`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Evidence {
    Negative,
    NotBad,
    Substantial,
    Strong,
    Decisive,
}

impl Evidence {
    /// `< 0`, `[0, 2)`, `[2, 5)`, `[5, 10)`, `≥ 10`.
    pub fn from_two_log_bf(v: f64) -> Self {
        if v < 0.0 {
            Evidence::Negative
        } else if v < 2.0 {
            Evidence::NotBad
        } else if v < 5.0 {
            Evidence::Substantial
        } else if v < 10.0 {
            Evidence::Strong
        } else {
            Evidence::Decisive
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Evidence::Negative => "Negative",
            Evidence::NotBad => "NotBad",
            Evidence::Substantial => "Substantial",
            Evidence::Strong => "Strong",
            Evidence::Decisive => "Decisive",
        }
    }
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BayesFactorReport {
    pub bf: f64,
    pub two_log_bf: f64,
    pub evidence: Evidence,
}

pub fn bayes_factor(logml_1: f64, logml_2: f64) -> BayesFactorReport {
    let diff = logml_1 - logml_2;
    let two_log_bf = 2.0 * diff;
    BayesFactorReport {
        bf: diff.exp(),
        two_log_bf,
        evidence: Evidence::from_two_log_bf(two_log_bf),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelScore {
    pub name: String,
    pub model: ModelFamily,
    pub k: usize,
    pub log_ml: f64,
    pub free_parameters: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub best: ModelScore,
    /// Sorted by decreasing log marginal likelihood.
    pub ranking: Vec<ModelScore>,
    /// Best against the runner-up, when there is one.
    pub versus_runner_up: Option<BayesFactorReport>,
}

/// Ranks by log marginal likelihood; ties go to fewer free parameters.
pub fn select_model(results: &[ModelScore]) -> Result<Selection> {
    if results.is_empty() {
        return Err(Error::Empty("no fitted models to compare"));
    }
    let mut ranking = results.to_vec();
    ranking.sort_by(|a, b| {
        b.log_ml
            .partial_cmp(&a.log_ml)
            .unwrap_or(Ordering::Equal)
            .then(a.free_parameters.cmp(&b.free_parameters))
    });
    let versus_runner_up = ranking.get(1).map(|r| bayes_factor(ranking[0].log_ml, r.log_ml));
    Ok(Selection {
        best: ranking[0].clone(),
        ranking,
        versus_runner_up,
    })
}
