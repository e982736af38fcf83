use std::path::PathBuf;

use anyhow::{Context, Result};
use dppm::data::{bensmail_design, sample_design, two_component_design, SimSpec, TwoComponentDesign};
use dppm::{ModelFamily, RngHandle};

use crate::usage;

#[derive(clap::Args)]
pub struct Args {
    /// Covariance structure: lI, lkI, lA, lkA, lDADt or lkDADt
    #[arg(long, required_unless_present = "bensmail")]
    structure: Option<String>,
    /// Mahalanobis separation between the two components
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    rho: f64,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Proportion of the first component
    #[arg(long, default_value_t = 0.5)]
    mixing: f64,
    /// Use the fixed (8,8)/(2,2) design with covariances 4I and I instead
    #[arg(long, conflicts_with = "structure")]
    bensmail: bool,
    #[arg(long, env = "DPPM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn design(args: &Args) -> Result<TwoComponentDesign> {
    if args.bensmail {
        if args.n < 2 {
            return Err(usage("--n must be at least 2"));
        }
        return Ok(bensmail_design());
    }
    let structure: ModelFamily = args
        .structure
        .as_deref()
        .unwrap_or_default()
        .parse()
        .map_err(|e| usage(format!("{e}")))?;
    let mut spec = SimSpec::new(structure, args.rho, args.n);
    spec.mixing = [args.mixing, 1.0 - args.mixing];
    if !(0.0..=1.0).contains(&args.mixing) {
        return Err(usage("--mixing must lie in [0, 1]"));
    }
    two_component_design(&spec).map_err(|e| usage(e.to_string()))
}

fn show(design: &TwoComponentDesign) {
    for k in 0..2 {
        let mean: Vec<String> = design.means[k].iter().map(|v| format!("{v:.6}")).collect();
        let cov: Vec<String> = design.covariances[k].matrix().row_iter().map(|r| {
            r.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" ")
        }).collect();
        println!("component {}: weight {:.3}, mean [{}], covariance [{}]", k + 1, design.mixing[k], mean.join(", "), cov.join("; "));
    }
}

pub fn run(args: Args) -> Result<()> {
    let design = design(&args)?;
    let mut rng = RngHandle::new(args.seed);
    let data = sample_design(&design, args.n, &mut rng)?;
    let mut w = csv::Writer::from_path(&args.out).with_context(|| format!("cannot write {}", args.out.display()))?;
    let mut header: Vec<String> = data.column_names().map(<[String]>::to_vec).unwrap_or_default();
    header.push("label".into());
    w.write_record(&header)?;
    let labels = data.labels().expect("simulated data carry labels");
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| format!("{v}")).collect();
        rec.push((labels[i] + 1).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    show(&design);
    println!("wrote {} rows to {}", data.n(), args.out.display());
    Ok(())
}
