use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use dppm::metrics::{misclassification_error, rand_index};

use crate::usage;

#[derive(clap::Args)]
pub struct Args {
    /// Estimated labels, one per line (or the named CSV column)
    partition: PathBuf,
    /// True labels, same layout
    truth: PathBuf,
    /// Read this column of a headed CSV instead of whole lines
    #[arg(long)]
    column: Option<String>,
}

/// Reads labels as strings and numbers them in order of appearance.
fn read_labels(path: &Path, column: Option<&str>) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let raw: Vec<String> = match column {
        None => text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect(),
        Some(col) => {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            let idx = r
                .headers()?
                .iter()
                .position(|h| h == col)
                .ok_or_else(|| usage(format!("{}: no column {col:?}", path.display())))?;
            let mut out = Vec::new();
            for rec in r.records() {
                let rec = rec.map_err(|e| usage(format!("{}: {e}", path.display())))?;
                out.push(rec.get(idx).unwrap_or_default().trim().to_string());
            }
            out
        }
    };
    let mut ids = HashMap::new();
    Ok(raw
        .into_iter()
        .map(|s| {
            let next = ids.len();
            *ids.entry(s).or_insert(next)
        })
        .collect())
}

pub fn run(args: Args) -> Result<()> {
    let est = read_labels(&args.partition, args.column.as_deref())?;
    let truth = read_labels(&args.truth, args.column.as_deref())?;
    if est.len() != truth.len() {
        return Err(usage(format!("label files differ in length ({} vs {})", est.len(), truth.len())));
    }
    let ri = rand_index(&est, &truth).map_err(|e| usage(e.to_string()))?;
    println!("rand_index {ri:.6}");
    match misclassification_error(&est, &truth) {
        Ok(e) => println!("error_rate {e:.6}"),
        Err(_) => println!("error_rate omitted: the partitions have different numbers of clusters"),
    }
    Ok(())
}
