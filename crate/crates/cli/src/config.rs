//! Hyperparameter settings from a `key = value` file and command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use dppm::{DataMatrix, Hyperparams};
use serde::Deserialize;

use crate::usage;

#[derive(Clone, Debug, Default, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Start from "default" (κ = 5) or "appendix" (κ = 0.1) empirical values
    #[arg(long)]
    pub preset: Option<String>,
    /// Shrinkage of the mean prior
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Degrees of freedom of the covariance priors
    #[arg(long)]
    pub nu0: Option<f64>,
    /// Scale of the volume and shape priors
    #[arg(long = "s0-sq")]
    pub s0_sq: Option<f64>,
    /// Multiplier on the empirical Λ₀
    #[arg(long = "lambda0-scale")]
    pub lambda0_scale: Option<f64>,
    /// Gamma prior shape for the concentration
    #[arg(long = "alpha-a")]
    pub alpha_a: Option<f64>,
    /// Gamma prior rate for the concentration
    #[arg(long = "alpha-b")]
    pub alpha_b: Option<f64>,
}

impl Overrides {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    /// Fields set here win over `base`.
    pub fn over(self, base: Overrides) -> Overrides {
        Overrides {
            preset: self.preset.or(base.preset),
            kappa: self.kappa.or(base.kappa),
            nu0: self.nu0.or(base.nu0),
            s0_sq: self.s0_sq.or(base.s0_sq),
            lambda0_scale: self.lambda0_scale.or(base.lambda0_scale),
            alpha_a: self.alpha_a.or(base.alpha_a),
            alpha_b: self.alpha_b.or(base.alpha_b),
        }
    }

    pub fn build(&self, data: &DataMatrix) -> Result<Hyperparams> {
        let mut h = match self.preset.as_deref() {
            None | Some("default") => Hyperparams::from_data(data)?,
            Some("appendix") => Hyperparams::appendix_preset(data)?,
            Some(other) => return Err(usage(format!("unknown preset {other:?} (expected default or appendix)"))),
        };
        if let Some(v) = self.kappa {
            h.kappa = v;
        }
        if let Some(v) = self.nu0 {
            h.nu0 = v;
        }
        if let Some(v) = self.s0_sq {
            h.s0_sq = v;
        }
        if let Some(c) = self.lambda0_scale {
            if !(c > 0.0) {
                return Err(usage("lambda0-scale must be positive"));
            }
            h.lambda0 = h.lambda0.scaled(c);
        }
        if let Some(v) = self.alpha_a {
            h.alpha_a = v;
        }
        if let Some(v) = self.alpha_b {
            h.alpha_b = v;
        }
        h.validate(data.d()).map_err(|e| usage(e.to_string()))?;
        Ok(h)
    }
}
