//! How often does a small tuning budget misorder two algorithms?
//!
//! ```text
//! cargo run --release --example simulate_study [n_experiments]
//! ```

use chs::select::Procedure;
use chs::simulate::{run_study, ExperimentConfig};
use chs::synthetic::{generate_dataset, preset};

fn main() -> chs::Result<()> {
    let n_experiments = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2000);
    let ds = generate_dataset(&preset("bimodal-overlap")?.spec)?;
    for procedure in [Procedure::Chs, Procedure::PerEnv] {
        println!("{}", procedure.as_str());
        for n_tune in [3, 10, 30, 100] {
            let cfg = ExperimentConfig {
                procedure,
                n_tune,
                n_eval: 250,
                n_experiments,
                master_seed: 7,
                ..Default::default()
            };
            let r = run_study(&ds, &cfg)?;
            let (top, freq) = r
                .ordering_frequency
                .iter()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("at least one ordering");
            println!(
                "  n_tune {n_tune:>3}: failure {:.4} +- {:.4}, most frequent {top} ({freq:.3})",
                r.failure_rate.overall, r.failure_rate.standard_error
            );
        }
    }
    Ok(())
}
