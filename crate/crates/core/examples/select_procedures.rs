//! Compares the setting each selection procedure picks on the
//! `heterogeneous` preset, where per-environment optima disagree.

use chs::dataset::CellSamples;
use chs::normalize::{build_pools, PoolingPolicy};
use chs::select::{
    select_chs, select_per_env, select_subset_chs, select_worst_case, SelectionResult,
};
use chs::synthetic::{generate_dataset, preset};

fn show(r: &SelectionResult) {
    let chosen: Vec<String> = r.chosen.iter().map(|(e, s)| format!("{e}={s}")).collect();
    println!(
        "  {:<11} score {:.4}  {}",
        r.procedure.as_str(),
        r.aggregate_score,
        chosen.join(" ")
    );
}

fn main() -> chs::Result<()> {
    let ds = generate_dataset(&preset("heterogeneous")?.spec)?;
    let view = build_pools(&ds, PoolingPolicy::FullDataset, None)?;
    let all = CellSamples::full(&ds);
    let envs = ds.environments().to_vec();
    for alg in ds.algorithms() {
        println!("{alg}");
        show(&select_chs(&view, alg, &all)?);
        show(&select_worst_case(&view, alg, &all)?);
        show(&select_subset_chs(&view, alg, &envs[..2], &all)?);
        for env in &envs {
            show(&select_per_env(&ds, alg, env, &all)?);
        }
    }
    Ok(())
}
