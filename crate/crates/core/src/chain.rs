//! Stored posterior samples and the likelihood summaries shared by both
//! samplers.

use std::collections::BTreeMap;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::parsimony::{MixtureParams, ModelFamily};
use crate::random::{log_sum_exp, logpdf_mvn};

/// Which sampler produced a chain; decides how mixing weights enter the
/// marginal likelihood.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplerKind {
    /// Weights are cluster occupancies; no prior term on them.
    DirichletProcess,
    /// Weights were sampled under a symmetric `Dir(conc/K, …)` prior.
    Finite { concentration: f64 },
}

#[derive(Clone, Debug)]
pub struct ChainSample {
    pub labels: Vec<usize>,
    pub params: MixtureParams,
    /// Concentration α (Dirichlet process chains only).
    pub alpha: Option<f64>,
    /// Mixing weights used in the mixture likelihood.
    pub weights: Vec<f64>,
    /// `Σ_i log Σ_k π_k f(x_i | θ_k)`
    pub log_likelihood: f64,
    /// Complete-data log likelihood plus the log prior of the partition;
    /// used to pick the reported partition.
    pub partition_score: f64,
}

impl ChainSample {
    pub fn k(&self) -> usize {
        self.params.k()
    }
}

#[derive(Clone, Debug)]
pub struct ChainResult {
    pub model: ModelFamily,
    pub sampler: SamplerKind,
    pub samples: Vec<ChainSample>,
    pub k_mode: usize,
    pub map_index: usize,
    pub map_partition: Vec<usize>,
    pub log_marginal: Option<f64>,
    pub per_sample_loglik: Vec<f64>,
}

impl ChainResult {
    pub(crate) fn from_samples(model: ModelFamily, sampler: SamplerKind, samples: Vec<ChainSample>) -> Result<Self> {
        let ks: Vec<usize> = samples.iter().map(ChainSample::k).collect();
        let k_mode = posterior_mode_k(&ks)?;
        let map_index = samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.k() == k_mode)
            .max_by(|a, b| a.1.partition_score.total_cmp(&b.1.partition_score).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("mode is attained");
        Ok(Self {
            model,
            sampler,
            map_partition: samples[map_index].labels.clone(),
            per_sample_loglik: samples.iter().map(|s| s.log_likelihood).collect(),
            samples,
            k_mode,
            map_index,
            log_marginal: None,
        })
    }

    pub fn k_trace(&self) -> Vec<usize> {
        self.samples.iter().map(ChainSample::k).collect()
    }

    pub fn alpha_trace(&self) -> Vec<f64> {
        self.samples.iter().filter_map(|s| s.alpha).collect()
    }

    /// Fraction of samples whose cluster count equals the mode.
    pub fn mode_probability(&self) -> f64 {
        let hits = self.samples.iter().filter(|s| s.k() == self.k_mode).count();
        hits as f64 / self.samples.len() as f64
    }

    /// Empirical posterior of K as `(K, probability)` in increasing K.
    pub fn k_distribution(&self) -> Vec<(usize, f64)> {
        let mut counts = BTreeMap::new();
        for s in &self.samples {
            *counts.entry(s.k()).or_insert(0usize) += 1;
        }
        let total = self.samples.len() as f64;
        counts.into_iter().map(|(k, c)| (k, c as f64 / total)).collect()
    }

    pub fn posterior_mode_k(&self) -> usize {
        self.k_mode
    }
}

/// Most frequent value; ties go to the smaller K.
pub fn posterior_mode_k(ks: &[usize]) -> Result<usize> {
    if ks.is_empty() {
        return Err(Error::Empty("chain has no samples"));
    }
    let mut counts = BTreeMap::new();
    for &k in ks {
        *counts.entry(k).or_insert(0usize) += 1;
    }
    let best = counts.values().copied().max().unwrap();
    Ok(*counts.iter().find(|(_, &c)| c == best).unwrap().0)
}

/// `n_k / n` for clusters `0..k`.
pub fn occupancy_weights(labels: &[usize], k: usize) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    for &z in labels {
        counts[z] += 1;
    }
    counts.iter().map(|&c| c as f64 / labels.len() as f64).collect()
}

/// Finite-mixture log likelihood `Σ_i log Σ_k π_k N(x_i | μ_k, Σ_k)`.
pub fn mixture_log_likelihood(data: &DataMatrix, params: &MixtureParams, weights: &[f64]) -> f64 {
    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut terms = vec![0.0; params.k()];
    let mut total = 0.0;
    for i in 0..data.n() {
        let x = data.row(i);
        for (k, t) in terms.iter_mut().enumerate() {
            *t = log_w[k] + logpdf_mvn(&x, &params.means()[k], params.covariance(k));
        }
        total += log_sum_exp(&terms).unwrap_or(f64::NEG_INFINITY);
    }
    total
}

/// `Σ_i log N(x_i | μ_{z_i}, Σ_{z_i})`
pub fn complete_log_likelihood(data: &DataMatrix, labels: &[usize], params: &MixtureParams) -> f64 {
    (0..data.n())
        .map(|i| {
            let k = labels[i];
            logpdf_mvn(&data.row(i), &params.means()[k], params.covariance(k))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_examples() {
        assert_eq!(posterior_mode_k(&[2, 2, 3, 2]).unwrap(), 2);
        assert_eq!(posterior_mode_k(&[2, 3, 2, 3]).unwrap(), 2);
        assert_eq!(posterior_mode_k(&[5]).unwrap(), 5);
        assert!(posterior_mode_k(&[]).is_err());
    }

    #[test]
    fn occupancy() {
        assert_eq!(occupancy_weights(&[0, 1, 1, 1], 2), vec![0.25, 0.75]);
    }
}
