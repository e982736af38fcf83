//! Dirichlet process parsimonious Gaussian mixtures.

pub mod chain;
pub mod data;
pub mod dpm;
pub mod error;
pub mod finite;
pub mod linalg;
pub mod metrics;
pub mod parsimony;
pub mod random;
pub mod selection;

pub use chain::{ChainResult, ChainSample, SamplerKind};
pub use data::DataMatrix;
pub use dpm::{run_gibbs, GibbsConfig};
pub use error::{Error, Result};
pub use finite::{run_finite_gibbs, FiniteConfig};
pub use parsimony::{Hyperparams, MixtureParams, ModelFamily};
pub use random::RngHandle;
pub use selection::{bayes_factor, laplace_marginal_loglik, select_model, Evidence};
