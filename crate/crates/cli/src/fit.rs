use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dppm::data::{load_csv, pca_project, standardize, CsvOptions};
use dppm::metrics::{misclassification_error, rand_index};
use dppm::selection::{laplace_marginal_loglik, vectorize_parameters, MarginalLikelihoodEstimate};
use dppm::{run_finite_gibbs, run_gibbs, ChainResult, DataMatrix, FiniteConfig, GibbsConfig, Hyperparams, ModelFamily, RngHandle};
use rayon::prelude::*;

use crate::compare::comparison;
use crate::config::Overrides;
use crate::report::{
    Agreement, AlphaSummary, CellReport, CellSummary, Hyper, KProbability, RunReport, Spread, Summary, SCHEMA_VERSION,
};
use crate::usage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    /// Dirichlet process mixture; K is inferred
    Dppm,
    /// Finite mixture over a range of fixed K
    Pgmm,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Dppm => "dppm",
            Method::Pgmm => "pgmm",
        }
    }
}

#[derive(clap::Args)]
pub struct Args {
    /// CSV file with one observation per row
    data: PathBuf,
    #[arg(long, value_enum, default_value = "dppm")]
    method: Method,
    /// Comma-separated model codes; all nine by default
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    /// Fixed K values for pgmm, e.g. "1..6", "3" or "2,4"
    #[arg(long = "K", default_value = "1..5")]
    k: String,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    burnin: usize,
    /// Total Dirichlet concentration on the pgmm weights
    #[arg(long, default_value_t = 1.0)]
    concentration: f64,
    /// The file has no header row
    #[arg(long)]
    no_header: bool,
    /// Column holding true class labels (name or 0-based index)
    #[arg(long)]
    label: Option<String>,
    /// Columns to ignore
    #[arg(long, value_delimiter = ',')]
    skip: Vec<String>,
    /// Project onto principal axes first (all axes unless --pca-components)
    #[arg(long)]
    pca: bool,
    #[arg(long, requires = "pca")]
    pca_components: Option<usize>,
    /// Scale every column to zero mean and unit variance
    #[arg(long)]
    standardize: bool,
    /// `key = value` file of hyperparameters; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    hyper: Overrides,
    #[arg(long, env = "DPPM_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the available parallelism
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Also write every retained sample as flattened parameters
    #[arg(long)]
    save_chain: bool,
}

fn parse_k(spec: &str) -> Result<Vec<usize>> {
    let bad = || usage(format!("invalid --K value {spec:?}"));
    let ks: Vec<usize> = if let Some((a, b)) = spec.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

fn parse_models(codes: &[String]) -> Result<Vec<ModelFamily>> {
    if codes.is_empty() {
        return Ok(ModelFamily::ALL.to_vec());
    }
    codes.iter().map(|c| c.trim().parse().map_err(|e| usage(format!("{e}")))).collect()
}

fn load(args: &Args) -> Result<DataMatrix> {
    let mut opts = if args.no_header { CsvOptions::default() } else { CsvOptions::with_header() };
    if let Some(l) = &args.label {
        opts = opts.label(l.clone());
    }
    for s in &args.skip {
        opts = opts.skip(s.clone());
    }
    let mut data = load_csv(&args.data, &opts).map_err(|e| match e {
        dppm::Error::Io(_) => anyhow::Error::new(e).context(format!("cannot read {}", args.data.display())),
        other => usage(format!("{}: {other}", args.data.display())),
    })?;
    if args.pca {
        data = pca_project(&data, args.pca_components).map_err(|e| usage(e.to_string()))?;
    }
    if args.standardize {
        data = standardize(&data).map_err(|e| usage(e.to_string()))?;
    }
    Ok(data)
}

#[derive(Clone, Copy)]
struct Cell {
    model: ModelFamily,
    k: Option<usize>,
}

impl Cell {
    fn file_stem(&self) -> String {
        match self.k {
            Some(k) => format!("{}_K{k}", self.model.code()),
            None => self.model.code().to_string(),
        }
    }
}

/// What one chain leaves behind once its samples are dropped.
struct RunOutcome {
    k_mode: usize,
    mode_probability: f64,
    k_distribution: Vec<KProbability>,
    alpha: Option<AlphaSummary>,
    map_partition: Vec<usize>,
    estimate: MarginalLikelihoodEstimate,
    agreement: Option<Agreement>,
}

struct Job<'a> {
    data: &'a DataMatrix,
    h: &'a Hyperparams,
    gibbs: GibbsConfig,
    concentration: f64,
    save_dir: Option<&'a Path>,
}

fn agreement(estimate: &[usize], truth: &[usize]) -> Result<Agreement> {
    Ok(Agreement {
        rand_index: rand_index(estimate, truth)?,
        error_rate: misclassification_error(estimate, truth).ok(),
    })
}

fn save_chain(path: &Path, chain: &ChainResult) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path)?;
    w.write_record(["sample", "k", "alpha", "log_likelihood", "theta"])?;
    for (i, s) in chain.samples.iter().enumerate() {
        let mut rec = vec![
            i.to_string(),
            s.k().to_string(),
            s.alpha.map_or(String::new(), |a| a.to_string()),
            s.log_likelihood.to_string(),
        ];
        rec.extend(vectorize_parameters(&s.params, &s.weights)?.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn run_chain(job: &Job, cell: Cell, run: usize, stream: u64, seed: u64) -> Result<RunOutcome> {
    let mut rng = RngHandle::for_stream(seed, stream);
    let chain = match cell.k {
        None => run_gibbs(job.data, cell.model, job.h, job.gibbs, &mut rng)?,
        Some(k) => {
            let mut cfg = FiniteConfig::new(k, job.gibbs);
            cfg.concentration = job.concentration;
            run_finite_gibbs(job.data, cell.model, job.h, cfg, &mut rng)?
        }
    };
    if let Some(dir) = job.save_dir {
        save_chain(&dir.join(format!("chain_{}_run{run}.csv", cell.file_stem())), &chain)?;
    }
    let estimate = laplace_marginal_loglik(&chain, job.h, job.data)?;
    let agreement = match job.data.labels() {
        Some(truth) => Some(agreement(&chain.map_partition, truth)?),
        None => None,
    };
    Ok(RunOutcome {
        k_mode: chain.k_mode,
        mode_probability: chain.mode_probability(),
        k_distribution: chain
            .k_distribution()
            .into_iter()
            .map(|(k, probability)| KProbability { k, probability })
            .collect(),
        alpha: AlphaSummary::of(&chain.alpha_trace()),
        map_partition: chain.map_partition.iter().map(|z| z + 1).collect(),
        estimate,
        agreement,
    })
}

fn cell_report(method: Method, cell: Cell, outcomes: Vec<(u64, Result<RunOutcome>)>) -> CellReport {
    let runs: Vec<RunReport> = outcomes
        .iter()
        .enumerate()
        .map(|(run, (stream, o))| match o {
            Ok(o) => RunReport {
                run,
                stream: *stream,
                k_mode: Some(o.k_mode),
                mode_probability: Some(o.mode_probability),
                log_ml: Some(o.estimate.log_ml),
                agreement: o.agreement.clone(),
                error: None,
            },
            Err(e) => RunReport {
                run,
                stream: *stream,
                k_mode: None,
                mode_probability: None,
                log_ml: None,
                agreement: None,
                error: Some(format!("{e:#}")),
            },
        })
        .collect();
    let best = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, (_, o))| o.as_ref().ok().map(|o| (i, o)))
        .max_by(|a, b| a.1.estimate.log_ml.total_cmp(&b.1.estimate.log_ml).then(b.0.cmp(&a.0)));
    let rand: Vec<f64> = runs.iter().filter_map(|r| r.agreement.as_ref().map(|a| a.rand_index)).collect();
    let err: Vec<f64> = runs.iter().filter_map(|r| r.agreement.as_ref().and_then(|a| a.error_rate)).collect();
    let mut report = CellReport {
        schema_version: SCHEMA_VERSION,
        method: method.name().into(),
        model: cell.model.code().into(),
        k: cell.k,
        status: "failed".into(),
        error: None,
        best_run: None,
        log_ml: None,
        k_mode: None,
        mode_probability: None,
        k_distribution: Vec::new(),
        nu_m: None,
        chart_dim: None,
        alpha: None,
        map_partition: Vec::new(),
        agreement: None,
        rand_over_runs: Spread::of(&rand),
        error_over_runs: Spread::of(&err),
        runs,
    };
    match best {
        Some((i, o)) => {
            report.status = "ok".into();
            report.best_run = Some(i);
            report.log_ml = Some(o.estimate.log_ml);
            report.k_mode = Some(o.k_mode);
            report.mode_probability = Some(o.mode_probability);
            report.k_distribution = o.k_distribution.clone();
            report.nu_m = Some(o.estimate.nu_m);
            report.chart_dim = Some(o.estimate.chart_dim);
            report.alpha = o.alpha.clone();
            report.map_partition = o.map_partition.clone();
            report.agreement = o.agreement.clone();
        }
        None => {
            report.error = report.runs.first().and_then(|r| r.error.clone());
        }
    }
    report
}

fn summary_of(cell: &CellReport) -> CellSummary {
    CellSummary {
        model: cell.model.clone(),
        k: cell.k,
        status: cell.status.clone(),
        log_ml: cell.log_ml,
        k_mode: cell.k_mode,
        mode_probability: cell.mode_probability,
        nu_m: cell.nu_m,
        rand_index: cell.agreement.as_ref().map(|a| a.rand_index),
        error_rate: cell.agreement.as_ref().and_then(|a| a.error_rate),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_summary_csv(path: &Path, method: Method, cells: &[CellSummary], ks: &[usize], labelled: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    match method {
        Method::Dppm => {
            let mut header = vec!["model", "k_hat", "log_ml", "mode_probability", "nu_m"];
            if labelled {
                header.extend(["rand_index", "error_rate"]);
            }
            w.write_record(&header)?;
            for c in cells {
                let mut rec = vec![c.model.clone()];
                if c.status == "ok" {
                    rec.push(c.k_mode.map_or(String::new(), |k| k.to_string()));
                    rec.push(c.log_ml.map_or(String::new(), |v| format!("{v:.4}")));
                    rec.push(c.mode_probability.map_or(String::new(), |v| format!("{v:.4}")));
                    rec.push(c.nu_m.map_or(String::new(), |v| v.to_string()));
                    if labelled {
                        rec.push(c.rand_index.map_or(String::new(), |v| format!("{v:.4}")));
                        rec.push(c.error_rate.map_or(String::new(), |v| format!("{v:.4}")));
                    }
                } else {
                    rec.resize(header.len(), "FAILED".into());
                }
                w.write_record(&rec)?;
            }
        }
        Method::Pgmm => {
            let mut header = vec!["model".to_string()];
            header.extend(ks.iter().map(|k| format!("K={k}")));
            w.write_record(&header)?;
            let mut models: Vec<&str> = Vec::new();
            for c in cells {
                if !models.contains(&c.model.as_str()) {
                    models.push(&c.model);
                }
            }
            for m in models {
                let mut rec = vec![m.to_string()];
                for k in ks {
                    let cell = cells.iter().find(|c| c.model == m && c.k == Some(*k));
                    rec.push(match cell.and_then(|c| c.log_ml) {
                        Some(v) => format!("{v:.4}"),
                        None => "FAILED".into(),
                    });
                }
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: Args) -> Result<()> {
    if args.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    let gibbs = GibbsConfig::new(args.samples, args.burnin).map_err(|e| usage(e.to_string()))?;
    if !(args.concentration > 0.0) {
        return Err(usage("--concentration must be positive"));
    }
    let models = parse_models(&args.models)?;
    let ks = parse_k(&args.k)?;
    let data = load(&args)?;
    let file_overrides = match &args.config {
        Some(p) => Overrides::load(p)?,
        None => Overrides::default(),
    };
    let h = args.hyper.clone().over(file_overrides).build(&data)?;

    let cells: Vec<Cell> = match args.method {
        Method::Dppm => models.iter().map(|&model| Cell { model, k: None }).collect(),
        Method::Pgmm => models
            .iter()
            .flat_map(|&model| ks.iter().map(move |&k| Cell { model, k: Some(k) }))
            .collect(),
    };
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let job = Job {
        data: &data,
        h: &h,
        gibbs,
        concentration: args.concentration,
        save_dir: args.save_chain.then_some(args.out.as_path()),
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build()?;
    let tasks: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..args.runs).map(move |r| (c, r))).collect();
    let seed = args.seed;
    let runs = args.runs;
    let outcomes: Vec<(u64, Result<RunOutcome>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, r)| {
                let stream = (c * runs + r) as u64;
                (stream, run_chain(&job, cells[c], r, stream, seed))
            })
            .collect()
    });

    let mut per_cell: Vec<Vec<(u64, Result<RunOutcome>)>> = (0..cells.len()).map(|_| Vec::new()).collect();
    for (&(c, _), o) in tasks.iter().zip(outcomes) {
        per_cell[c].push(o);
    }
    let mut summaries = Vec::with_capacity(cells.len());
    for (cell, outcomes) in cells.iter().zip(per_cell) {
        let report = cell_report(args.method, *cell, outcomes);
        write_json(&args.out.join(format!("{}.json", cell.file_stem())), &report)?;
        summaries.push(summary_of(&report));
    }

    write_summary_csv(&args.out.join("summary.csv"), args.method, &summaries, &ks, data.labels().is_some())?;
    let selection = comparison(&summaries)?;
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        method: args.method.name().into(),
        data: args.data.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned()),
        n: data.n(),
        d: data.d(),
        seed,
        runs,
        samples: args.samples,
        burn_in: args.burnin,
        hyperparameters: Hyper {
            kappa: h.kappa,
            nu0: h.nu0,
            s0_sq: h.s0_sq,
            alpha_a: h.alpha_a,
            alpha_b: h.alpha_b,
        },
        cells: summaries,
        selection,
    };
    write_json(&args.out.join("summary.json"), &summary)?;

    for c in &summary.cells {
        match (c.log_ml, c.k_mode) {
            (Some(v), _) if c.k.is_some() => println!("{:<16} log-ML {v:.4}", c.label()),
            (Some(v), Some(k)) => println!("{:<16} K={k:<3} log-ML {v:.4}", c.label()),
            _ => println!("{:<16} FAILED", c.label()),
        }
    }
    if let Some(s) = &summary.selection {
        println!("selected {} (log-ML {:.4})", s.best, s.best_log_ml);
    }
    if summary.cells.iter().all(|c| c.status != "ok") {
        anyhow::bail!("every cell failed");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k("1..6").unwrap(), vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(parse_k("3").unwrap(), vec![3]);
        assert_eq!(parse_k("2,4").unwrap(), vec![2, 4]);
        assert!(parse_k("0..2").is_err());
        assert!(parse_k("x").is_err());
    }
}
