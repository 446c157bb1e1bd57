//! Density of one cell's scores and a bootstrap interval for its mean.

use chs::dataset::CellId;
use chs::stats::{kde, mean, percentile_ci};
use chs::synthetic::{generate_dataset, preset};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() -> chs::Result<()> {
    let ds = generate_dataset(&preset("bimodal-overlap")?.spec)?;
    let id = CellId(0);
    let scores = ds.cell(id);
    let curve = kde(scores, None, 512)?;
    println!("{}: {} runs", ds.key(id), scores.len());
    println!(
        "bandwidth {:.3} ({}), mass {:.4}, modes {:?}",
        curve.bandwidth,
        curve.bandwidth_rule,
        curve.mass(),
        curve
            .local_maxima()
            .iter()
            .map(|m| (m * 100.0).round() / 100.0)
            .collect::<Vec<_>>()
    );
    let mut rng = StdRng::seed_from_u64(0);
    for n in [3, 10, 100] {
        let ci = percentile_ci(&scores[..n], 0.95, 2000, &mut rng)?;
        println!(
            "first {n:>3} runs: mean {:.2}, 95% CI [{:.2}, {:.2}]",
            mean(&scores[..n]),
            ci.lower,
            ci.upper
        );
    }
    Ok(())
}
