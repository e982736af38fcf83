//! Fixed-K Bayesian parsimonious mixture sampler.

use crate::chain::{complete_log_likelihood, mixture_log_likelihood, ChainResult, ChainSample, SamplerKind};
use crate::data::DataMatrix;
use crate::dpm::GibbsConfig;
use crate::error::{Error, Result};
use crate::parsimony::{sample_posterior, sample_prior, Hyperparams, MixtureParams, ModelFamily};
use crate::random::{logpdf_mvn, sample_categorical, sample_dirichlet, RngHandle};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteConfig {
    pub k: usize,
    /// Total concentration of the symmetric Dirichlet prior on the weights;
    /// each component gets `concentration / K`.
    pub concentration: f64,
    pub gibbs: GibbsConfig,
}

impl FiniteConfig {
    pub fn new(k: usize, gibbs: GibbsConfig) -> Self {
        Self {
            k,
            concentration: 1.0,
            gibbs,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FiniteState {
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
    pub params: MixtureParams,
}

fn dirichlet_posterior(labels: &[usize], k: usize, concentration: f64) -> Vec<f64> {
    let mut conc = vec![concentration / k as f64; k];
    for &z in labels {
        conc[z] += 1.0;
    }
    conc
}

/// Draws every label given weights and parameters; returns them.
fn sample_labels(data: &DataMatrix, state: &FiniteState, rng: &mut RngHandle) -> Result<Vec<usize>> {
    let log_w: Vec<f64> = state.weights.iter().map(|w| w.ln()).collect();
    let mut terms = vec![0.0; state.params.k()];
    (0..data.n())
        .map(|i| {
            let x = data.row(i);
            for (k, t) in terms.iter_mut().enumerate() {
                *t = log_w[k] + logpdf_mvn(&x, &state.params.means()[k], state.params.covariance(k));
            }
            sample_categorical(&terms, rng)
        })
        .collect()
}

pub fn run_finite_gibbs(
    data: &DataMatrix,
    model: ModelFamily,
    h: &Hyperparams,
    config: FiniteConfig,
    rng: &mut RngHandle,
) -> Result<ChainResult> {
    let gibbs = GibbsConfig::new(config.gibbs.n_samples, config.gibbs.burn_in)?;
    if config.k == 0 {
        return Err(Error::domain("number of components must be at least 1"));
    }
    if !(config.concentration > 0.0) || !config.concentration.is_finite() {
        return Err(Error::domain("dirichlet concentration must be positive"));
    }
    h.validate(data.d())?;
    let k = config.k;
    let conc = config.concentration;

    let labels: Vec<usize> = (0..data.n()).map(|_| (rng.uniform() * k as f64) as usize % k).collect();
    let prior = sample_prior(model, h, k, rng)?;
    let params = sample_posterior(data, &labels, h, &prior, rng)?;
    let weights = sample_dirichlet(&dirichlet_posterior(&labels, k, conc), rng)?;
    let mut state = FiniteState { labels, weights, params };

    let mut samples = Vec::with_capacity(gibbs.n_samples - gibbs.burn_in);
    for iteration in 0..gibbs.n_samples {
        let step = |state: &mut FiniteState, rng: &mut RngHandle| -> Result<()> {
            state.labels = sample_labels(data, state, rng)?;
            state.weights = sample_dirichlet(&dirichlet_posterior(&state.labels, k, conc), rng)?;
            state.params = sample_posterior(data, &state.labels, h, &state.params, rng)?;
            Ok(())
        };
        step(&mut state, rng).map_err(|e| Error::Iteration {
            iteration,
            source: Box::new(e),
        })?;
        if iteration >= gibbs.burn_in {
            let log_likelihood = mixture_log_likelihood(data, &state.params, &state.weights);
            let label_prior: f64 = state.labels.iter().map(|&z| state.weights[z].ln()).sum();
            samples.push(ChainSample {
                labels: state.labels.clone(),
                params: state.params.clone(),
                alpha: None,
                weights: state.weights.clone(),
                log_likelihood,
                partition_score: complete_log_likelihood(data, &state.labels, &state.params) + label_prior,
            });
        }
    }
    let mut chain = ChainResult::from_samples(model, SamplerKind::Finite { concentration: conc }, samples)?;
    // K is fixed; the mode is K by definition even if clusters empty out.
    chain.k_mode = k;
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line_data(n: usize, seed: u64) -> DataMatrix {
        let mut rng = RngHandle::new(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![2.0 + rng.standard_normal()]).collect();
        DataMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn single_component_chain() {
        let data = line_data(50, 1);
        let h = Hyperparams::from_data(&data).unwrap();
        let chain = run_finite_gibbs(
            &data,
            ModelFamily::GeneralFull,
            &h,
            FiniteConfig::new(1, GibbsConfig::new(300, 50).unwrap()),
            &mut RngHandle::new(2),
        )
        .unwrap();
        assert_eq!(chain.samples.len(), 250);
        assert_eq!(chain.k_mode, 1);
        for s in &chain.samples {
            assert!(s.labels.iter().all(|&z| z == 0));
            assert_eq!(s.weights, vec![1.0]);
        }
        // chain average of μ tracks the conjugate posterior mean
        let stat = crate::parsimony::SufficientStats::compute(&data, &vec![0; 50], 0);
        let mu_n = stat.posterior_mean(&h)[0];
        let avg: f64 = chain.samples.iter().map(|s| s.params.means()[0][0]).sum::<f64>() / 250.0;
        assert_abs_diff_eq!(avg, mu_n, epsilon = 0.05);
    }

    #[test]
    fn weights_stay_on_simplex_and_chain_is_reproducible() {
        let data = line_data(60, 3);
        let h = Hyperparams::from_data(&data).unwrap();
        let cfg = FiniteConfig::new(3, GibbsConfig::new(40, 10).unwrap());
        let a = run_finite_gibbs(&data, ModelFamily::SphericalFree, &h, cfg, &mut RngHandle::new(5)).unwrap();
        let b = run_finite_gibbs(&data, ModelFamily::SphericalFree, &h, cfg, &mut RngHandle::new(5)).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_abs_diff_eq!(x.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert_eq!(x.labels, y.labels);
            assert_eq!(x.weights, y.weights);
        }
    }

    #[test]
    fn rejects_zero_components() {
        let data = line_data(10, 1);
        let h = Hyperparams::from_data(&data).unwrap();
        let cfg = FiniteConfig::new(0, GibbsConfig::new(10, 1).unwrap());
        assert!(run_finite_gibbs(&data, ModelFamily::SphericalEqual, &h, cfg, &mut RngHandle::new(1)).is_err());
    }
}
