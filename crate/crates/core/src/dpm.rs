//! Chinese-restaurant-process Gibbs sampler for Dirichlet process
//! parsimonious mixtures, with Escobar–West updates of the concentration.

use nalgebra::DVector;

use crate::chain::{complete_log_likelihood, mixture_log_likelihood, occupancy_weights, ChainResult, ChainSample, SamplerKind};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::parsimony::{sample_posterior, sample_prior, sample_prior_component, Hyperparams, MixtureParams, ModelFamily};
use crate::random::{logpdf_mvn, sample_beta, sample_categorical, sample_gamma, RngHandle, SpdMatrix};

/// Polya-urn predictive over the `K` occupied clusters followed by the new
/// cluster: `n_k/(α + total)` and `α/(α + total)`.
pub fn crp_predictive(counts: &[usize], alpha: f64, total: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("concentration must be positive, got {alpha}")));
    }
    if counts.iter().sum::<usize>() != total {
        return Err(Error::domain("cluster counts do not sum to the number of seated points"));
    }
    let denom = alpha + total as f64;
    let mut p: Vec<f64> = counts.iter().map(|&c| c as f64 / denom).collect();
    p.push(alpha / denom);
    Ok(p)
}

/// Log probability of a partition under the CRP, built by seating points in
/// order. Labels need not be contiguous.
pub fn crp_log_probability(labels: &[usize], alpha: f64) -> Result<f64> {
    let mut ids: Vec<usize> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut total = 0.0;
    for (i, &z) in labels.iter().enumerate() {
        let p = crp_predictive(&counts, alpha, i)?;
        match ids.iter().position(|&id| id == z) {
            Some(k) => {
                total += p[k].ln();
                counts[k] += 1;
            }
            None => {
                total += p[counts.len()].ln();
                ids.push(z);
                counts.push(1);
            }
        }
    }
    Ok(total)
}

/// Weight of the `Gamma(a + K, ·)` term in the conditional of α given the
/// auxiliary `η`: `(a+K-1)/(a+K-1 + n(b - ln η))`.
pub fn alpha_mixture_weight(a: f64, b: f64, k: usize, n: usize, eta: f64) -> f64 {
    let c = a + k as f64 - 1.0;
    c / (c + n as f64 * (b - eta.ln()))
}

/// Draw from `ϑ·Gamma(a+K, rate) + (1-ϑ)·Gamma(a+K-1, rate)` with rate
/// `b - ln η` and `ϑ` from [`alpha_mixture_weight`].
pub fn sample_alpha_given_eta(eta: f64, k: usize, n: usize, a: f64, b: f64, rng: &mut RngHandle) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && eta > 0.0 && eta <= 1.0) || k == 0 || n == 0 {
        return Err(Error::domain("alpha update needs positive a, b, K, n and eta in (0, 1]"));
    }
    let rate = b - eta.ln();
    let weight = alpha_mixture_weight(a, b, k, n, eta);
    let shape = if rng.uniform() < weight {
        a + k as f64
    } else {
        a + k as f64 - 1.0
    };
    let draw = sample_gamma(shape, 1.0 / rate, rng)?;
    Ok(draw.max(f64::MIN_POSITIVE))
}

/// Escobar–West update: `η ~ Beta(α+1, n)`, then α from the two-Gamma
/// mixture. `(a, b)` are the shape and rate of α's Gamma prior.
pub fn sample_alpha(alpha: f64, k: usize, n: usize, a: f64, b: f64, rng: &mut RngHandle) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::domain("alpha update needs positive alpha"));
    }
    let eta = sample_beta(alpha + 1.0, n as f64, rng)?;
    // η can underflow to 0 for tiny α and large n
    sample_alpha_given_eta(eta.max(f64::MIN_POSITIVE), k, n, a, b, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GibbsConfig {
    /// Total iterations, burn-in included.
    pub n_samples: usize,
    pub burn_in: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            burn_in: 100,
        }
    }
}

impl GibbsConfig {
    pub fn new(n_samples: usize, burn_in: usize) -> Result<Self> {
        if n_samples <= burn_in {
            return Err(Error::domain(format!(
                "samples ({n_samples}) must exceed burn-in ({burn_in})"
            )));
        }
        Ok(Self { n_samples, burn_in })
    }
}

/// Current labels (contiguous, 0-based), per-cluster counts, mixture
/// parameters and concentration.
#[derive(Clone, Debug)]
pub struct GibbsState {
    pub labels: Vec<usize>,
    pub counts: Vec<usize>,
    pub params: MixtureParams,
    pub alpha: f64,
}

impl GibbsState {
    /// One cluster holding every point, parameters and α from their priors.
    pub fn initial(n: usize, model: ModelFamily, h: &Hyperparams, rng: &mut RngHandle) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("no observations"));
        }
        let params = sample_prior(model, h, 1, rng)?;
        let alpha = sample_gamma(h.alpha_a, 1.0 / h.alpha_b, rng)?.max(f64::MIN_POSITIVE);
        Ok(Self {
            labels: vec![0; n],
            counts: vec![n],
            params,
            alpha,
        })
    }

    pub fn k(&self) -> usize {
        self.params.k()
    }

    /// Checks that every cluster is occupied and the counts agree with the
    /// labels.
    pub fn check(&self) -> Result<()> {
        if self.counts.len() != self.k() {
            return Err(Error::Labels(format!(
                "{} counts for {} components",
                self.counts.len(),
                self.k()
            )));
        }
        let mut seen = vec![0usize; self.k()];
        for &z in &self.labels {
            if z >= self.k() {
                return Err(Error::Labels(format!("label {z} out of range")));
            }
            seen[z] += 1;
        }
        if seen != self.counts || seen.contains(&0) {
            return Err(Error::Labels("counts disagree with labels or a cluster is empty".into()));
        }
        Ok(())
    }
}

/// Resamples the label of point `i` given everything else. `log_f(mean,
/// cov)` is the log likelihood of the point under a component. New clusters
/// are proposed with a single auxiliary component: a fresh prior draw, or
/// the point's own former component when it was a singleton.
pub fn resample_label_with<F>(
    i: usize,
    state: &mut GibbsState,
    h: &Hyperparams,
    rng: &mut RngHandle,
    mut log_f: F,
) -> Result<()>
where
    F: FnMut(&DVector<f64>, &SpdMatrix) -> f64,
{
    let current = state.labels[i];
    state.counts[current] -= 1;
    let aux = if state.counts[current] == 0 {
        state.counts.remove(current);
        for z in state.labels.iter_mut() {
            if *z > current {
                *z -= 1;
            }
        }
        state.params.remove_component(current)
    } else {
        sample_prior_component(&state.params, h, rng)?
    };
    let aux_cov = state.params.assemble(&aux.local)?;

    let k = state.k();
    let mut log_w = Vec::with_capacity(k + 1);
    for c in 0..k {
        log_w.push((state.counts[c] as f64).ln() + log_f(&state.params.means()[c], state.params.covariance(c)));
    }
    log_w.push(state.alpha.ln() + log_f(&aux.mean, &aux_cov));

    let choice = sample_categorical(&log_w, rng)?;
    if choice == k {
        state.params.push_component(aux)?;
        state.counts.push(1);
    } else {
        state.counts[choice] += 1;
    }
    state.labels[i] = choice;
    Ok(())
}

pub fn resample_label(
    i: usize,
    state: &mut GibbsState,
    data: &DataMatrix,
    h: &Hyperparams,
    rng: &mut RngHandle,
) -> Result<()> {
    let x = data.row(i);
    resample_label_with(i, state, h, rng, |mean, cov| logpdf_mvn(&x, mean, cov))
}

/// One full iteration: every label, then the parameter sweep, then α.
pub fn gibbs_iteration(state: &mut GibbsState, data: &DataMatrix, h: &Hyperparams, rng: &mut RngHandle) -> Result<()> {
    for i in 0..data.n() {
        resample_label(i, state, data, h, rng)?;
    }
    state.params = sample_posterior(data, &state.labels, h, &state.params, rng)?;
    state.alpha = sample_alpha(state.alpha, state.k(), data.n(), h.alpha_a, h.alpha_b, rng)?;
    Ok(())
}

fn record(state: &GibbsState, data: &DataMatrix) -> Result<ChainSample> {
    let weights = occupancy_weights(&state.labels, state.k());
    let log_likelihood = mixture_log_likelihood(data, &state.params, &weights);
    let partition_score =
        complete_log_likelihood(data, &state.labels, &state.params) + crp_log_probability(&state.labels, state.alpha)?;
    Ok(ChainSample {
        labels: state.labels.clone(),
        params: state.params.clone(),
        alpha: Some(state.alpha),
        weights,
        log_likelihood,
        partition_score,
    })
}

/// Runs the sampler from a single prior-drawn cluster and keeps the
/// post-burn-in iterations.
pub fn run_gibbs(
    data: &DataMatrix,
    model: ModelFamily,
    h: &Hyperparams,
    config: GibbsConfig,
    rng: &mut RngHandle,
) -> Result<ChainResult> {
    let config = GibbsConfig::new(config.n_samples, config.burn_in)?;
    h.validate(data.d())?;
    let mut state = GibbsState::initial(data.n(), model, h, rng)?;
    let mut samples = Vec::with_capacity(config.n_samples - config.burn_in);
    for iteration in 0..config.n_samples {
        gibbs_iteration(&mut state, data, h, rng).map_err(|e| Error::Iteration {
            iteration,
            source: Box::new(e),
        })?;
        if iteration >= config.burn_in {
            samples.push(record(&state, data)?);
        }
    }
    ChainResult::from_samples(model, SamplerKind::DirichletProcess, samples)
}
