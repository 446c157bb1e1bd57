//! Tuning on a random subset of environments: wider score intervals and
//! more misorderings as the subset shrinks.

use chs::select::Procedure;
use chs::simulate::{run_study, subset_study, ExperimentConfig};
use chs::synthetic::{generate_dataset, preset};

fn main() -> chs::Result<()> {
    let ds = generate_dataset(&preset("heterogeneous")?.spec)?;
    let base = ExperimentConfig {
        n_tune: 5,
        n_eval: 50,
        n_experiments: 1000,
        master_seed: 3,
        ..Default::default()
    };
    let full = run_study(
        &ds,
        &ExperimentConfig {
            procedure: Procedure::Chs,
            ..base.clone()
        },
    )?;
    println!(
        "all {} environments: failure {:.4}",
        ds.n_environments(),
        full.failure_rate.overall
    );
    for k in 1..ds.n_environments() {
        let cfg = ExperimentConfig {
            procedure: Procedure::SubsetChs,
            subset_size: Some(k),
            ..base.clone()
        };
        let r = subset_study(&ds, &cfg)?;
        let widths: Vec<String> = r
            .overall
            .iter()
            .map(|(a, s)| format!("{a} width {:.4}", s.interval.width()))
            .collect();
        println!(
            "subset of {k}: failure {:.4}  {}",
            r.failure_rate.overall,
            widths.join(", ")
        );
    }
    Ok(())
}
