use std::path::PathBuf;

use anyhow::{Context, Result};
use dppm::selection::{select_model, ModelScore};
use dppm::ModelFamily;

use crate::report::{CellSummary, Comparison, Summary};
use crate::usage;

#[derive(clap::Args)]
pub struct Args {
    /// Output directory of a previous `fit`
    dir: PathBuf,
}

/// Ranking of the successful cells, best first; `None` when none succeeded.
pub fn comparison(cells: &[CellSummary]) -> Result<Option<Comparison>> {
    let mut scores = Vec::new();
    for c in cells.iter().filter(|c| c.status == "ok") {
        let (Some(log_ml), Some(k)) = (c.log_ml, c.k_mode) else { continue };
        let model: ModelFamily = c.model.parse()?;
        scores.push(ModelScore {
            name: c.label(),
            model,
            k,
            log_ml,
            free_parameters: c.nu_m.unwrap_or(usize::MAX),
        });
    }
    if scores.is_empty() {
        return Ok(None);
    }
    let s = select_model(&scores)?;
    let runner = s.ranking.get(1);
    Ok(Some(Comparison {
        best: s.best.name.clone(),
        best_log_ml: s.best.log_ml,
        runner_up: runner.map(|r| r.name.clone()),
        runner_up_log_ml: runner.map(|r| r.log_ml),
        two_log_bf: s.versus_runner_up.map(|r| r.two_log_bf),
        evidence: s.versus_runner_up.map(|r| r.evidence.label().to_string()),
        ranking: s.ranking.iter().map(|r| (r.name.clone(), r.log_ml)).collect(),
    }))
}

pub fn run(args: Args) -> Result<()> {
    let path = args.dir.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let summary: Summary = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let fitted = summary.cells.iter().filter(|c| c.status == "ok" && c.log_ml.is_some()).count();
    if fitted < 2 {
        return Err(usage(format!("need at least 2 fitted cells to compare, found {fitted}")));
    }
    let c = comparison(&summary.cells)?.expect("at least two fitted cells");
    println!("{:<4} {:<16} {:>12}", "rank", "model", "log-ML");
    for (i, (name, v)) in c.ranking.iter().enumerate() {
        println!("{:<4} {:<16} {:>12.4}", i + 1, name, v);
    }
    if let (Some(r), Some(bf), Some(ev)) = (&c.runner_up, c.two_log_bf, &c.evidence) {
        println!("{} vs {}: 2 log BF = {bf:.4} ({ev})", c.best, r);
    }
    let out = args.dir.join("comparison.json");
    let mut json = serde_json::to_string_pretty(&c)?;
    json.push('\n');
    std::fs::write(&out, json).with_context(|| format!("cannot write {}", out.display()))?;
    Ok(())
}
