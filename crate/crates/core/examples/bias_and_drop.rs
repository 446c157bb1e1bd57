//! Selection bias of tuning on few runs, and the per-environment cost of
//! sharing one setting across environments.

use chs::select::Procedure;
use chs::simulate::{estimate_bias, performance_drop};
use chs::synthetic::{generate_dataset, preset};

fn main() -> chs::Result<()> {
    let many = generate_dataset(&preset("many-settings")?.spec)?;
    println!("bias on many-settings (normalized loss vs full-data optimum)");
    for n_tune in [3, 10, 30, 100] {
        let chs = estimate_bias(&many, Procedure::Chs, n_tune, 300, 1)?;
        let per_env = estimate_bias(&many, Procedure::PerEnv, n_tune, 300, 1)?;
        println!(
            "  n_tune {n_tune:>3}: chs {:.5}  per-env {:.5}",
            chs.overall, per_env.overall
        );
    }

    let het = generate_dataset(&preset("heterogeneous")?.spec)?;
    let drop = performance_drop(&het, 10, 300, 2)?;
    println!("drop on heterogeneous (n_tune 10)");
    for (alg, d) in &drop.per_algorithm {
        let s = &d.per_environment[&d.sacrificed];
        println!(
            "  {alg}: shared setting {} gives up {:.4} [{:.4}, {:.4}] in {}",
            d.chs_optimum, s.mean, s.interval.lower, s.interval.upper, d.sacrificed
        );
    }
    Ok(())
}
