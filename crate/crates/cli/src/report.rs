//! JSON shapes written by `fit` and read back by `compare`.

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KProbability {
    pub k: usize,
    pub probability: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
}

impl AlphaSummary {
    pub fn of(trace: &[f64]) -> Option<Self> {
        if trace.is_empty() {
            return None;
        }
        let n = trace.len() as f64;
        let mean = trace.iter().sum::<f64>() / n;
        let sd = if trace.len() > 1 {
            (trace.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = trace.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| sorted[((p * (n - 1.0)).round() as usize).min(sorted.len() - 1)];
        Some(Self {
            mean,
            sd,
            q05: q(0.05),
            median: q(0.5),
            q95: q(0.95),
        })
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Agreement {
    pub rand_index: f64,
    /// Present only when the cluster counts match.
    pub error_rate: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub stream: u64,
    pub k_mode: Option<usize>,
    pub mode_probability: Option<f64>,
    pub log_ml: Option<f64>,
    pub agreement: Option<Agreement>,
    pub error: Option<String>,
}

/// Mean and standard deviation over runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub sd: f64,
    pub runs: usize,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            sd,
            runs: values.len(),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellReport {
    pub schema_version: u32,
    pub method: String,
    pub model: String,
    /// Fixed number of components (finite mixtures only).
    pub k: Option<usize>,
    pub status: String,
    pub error: Option<String>,
    pub best_run: Option<usize>,
    pub log_ml: Option<f64>,
    pub k_mode: Option<usize>,
    pub mode_probability: Option<f64>,
    pub k_distribution: Vec<KProbability>,
    pub nu_m: Option<usize>,
    pub chart_dim: Option<usize>,
    pub alpha: Option<AlphaSummary>,
    /// 1-based cluster ids.
    pub map_partition: Vec<usize>,
    pub agreement: Option<Agreement>,
    pub rand_over_runs: Option<Spread>,
    pub error_over_runs: Option<Spread>,
    pub runs: Vec<RunReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellSummary {
    pub model: String,
    pub k: Option<usize>,
    pub status: String,
    pub log_ml: Option<f64>,
    pub k_mode: Option<usize>,
    pub mode_probability: Option<f64>,
    pub nu_m: Option<usize>,
    pub rand_index: Option<f64>,
    pub error_rate: Option<f64>,
}

impl CellSummary {
    pub fn label(&self) -> String {
        match self.k {
            Some(k) => format!("{} K={k}", self.model),
            None => self.model.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Hyper {
    pub kappa: f64,
    pub nu0: f64,
    pub s0_sq: f64,
    pub alpha_a: f64,
    pub alpha_b: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub best: String,
    pub best_log_ml: f64,
    pub runner_up: Option<String>,
    pub runner_up_log_ml: Option<f64>,
    pub two_log_bf: Option<f64>,
    pub evidence: Option<String>,
    pub ranking: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub method: String,
    pub data: String,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub runs: usize,
    pub samples: usize,
    pub burn_in: usize,
    pub hyperparameters: Hyper,
    pub cells: Vec<CellSummary>,
    pub selection: Option<Comparison>,
}
