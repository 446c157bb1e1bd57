//! Reproduces the calibration runs behind the synthetic presets.
//!
//! ```text
//! cargo run --release --example calibrate_presets [preset...]
//! ```

use chs::select::Procedure;
use chs::simulate::{estimate_bias, performance_drop, run_study, subset_study, ExperimentConfig};
use chs::synthetic::{generate_dataset, preset, AnalyticOracle};

type Step = fn() -> chs::Result<()>;

fn main() -> chs::Result<()> {
    let wanted: Vec<String> = std::env::args().skip(1).collect();
    let runs: [(&str, Step); 3] = [
        ("bimodal-overlap", bimodal),
        ("heterogeneous", heterogeneous),
        ("many-settings", many_settings),
    ];
    for (name, run) in runs {
        if wanted.is_empty() || wanted.iter().any(|w| w == name) {
            run()?;
        }
    }
    Ok(())
}

fn bimodal() -> chs::Result<()> {
    let p = preset("bimodal-overlap")?;
    println!("== {}\n{}", p.name, p.calibration);
    let ds = generate_dataset(&p.spec)?;
    for n_tune in [3, 10, 30, 100] {
        let cfg = ExperimentConfig {
            procedure: Procedure::PerEnv,
            n_tune,
            n_eval: 250,
            n_experiments: 5000,
            master_seed: 1,
            n_boot: 0,
            ..Default::default()
        };
        let r = run_study(&ds, &cfg)?;
        println!(
            "n_tune={n_tune:>3}  failure={:.4} (se {:.4})  any-env={:.4}",
            r.failure_rate.overall, r.failure_rate.standard_error, r.failure_rate.any_environment
        );
    }
    Ok(())
}

fn heterogeneous() -> chs::Result<()> {
    let p = preset("heterogeneous")?;
    println!("\n== {}\n{}", p.name, p.calibration);
    let oracle = AnalyticOracle::new(&p.spec)?;
    let envs = &p.spec.environments;
    for alg in &p.spec.algorithms {
        let table = &oracle.cells[alg];
        let score = |s: &str, subset: &[usize]| {
            subset
                .iter()
                .map(|&e| table[&envs[e]][s].normalized_mean)
                .sum::<f64>()
                / subset.len() as f64
        };
        let all: Vec<usize> = (0..envs.len()).collect();
        let ids: Vec<String> = table[&envs[0]].keys().cloned().collect();
        let best_other = |subset: &[usize]| {
            ids.iter()
                .filter(|s| s.as_str() != "focus=\"all\"")
                .map(|s| score(s, subset))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let g = |subset: &[usize]| score("focus=\"all\"", subset);
        let mut pair_wins = 0;
        let mut worst_pair = f64::INFINITY;
        for i in 0..envs.len() {
            for j in i + 1..envs.len() {
                let m = g(&[i, j]) - best_other(&[i, j]);
                if m < 0.0 {
                    pair_wins += 1;
                } else {
                    worst_pair = worst_pair.min(m);
                }
            }
        }
        println!(
            "{alg}: full margin {:.3}, specialist wins {pair_wins}/15 pairs, smallest generalist pair margin {:.3}",
            g(&all) - best_other(&all),
            worst_pair
        );
    }
    let ds = generate_dataset(&p.spec)?;
    for k in [2, 3, 4, 6] {
        let cfg = ExperimentConfig {
            procedure: Procedure::SubsetChs,
            subset_size: Some(k),
            n_tune: 10,
            n_eval: 50,
            n_experiments: 2000,
            master_seed: 2,
            n_boot: 0,
            ..Default::default()
        };
        let r = subset_study(&ds, &cfg)?;
        let widths: Vec<String> = r
            .overall
            .iter()
            .map(|(a, s)| format!("{a}:{:.3}", s.interval.width()))
            .collect();
        println!(
            "subset {k}: failure={:.4} widths {}",
            r.failure_rate.overall,
            widths.join(" ")
        );
    }
    let d = performance_drop(&ds, 10, 500, 3)?;
    for (alg, a) in &d.per_algorithm {
        let s = &a.per_environment[&a.sacrificed];
        println!("{alg}: drop on {} = {:.4}", a.sacrificed, s.mean);
    }
    Ok(())
}

fn many_settings() -> chs::Result<()> {
    let p = preset("many-settings")?;
    println!("\n== {}\n{}", p.name, p.calibration);
    let ds = generate_dataset(&p.spec)?;
    for n_tune in [3, 10, 30, 100] {
        let chs = estimate_bias(&ds, Procedure::Chs, n_tune, 2000, 4)?;
        let per = estimate_bias(&ds, Procedure::PerEnv, n_tune, 2000, 4)?;
        println!(
            "n_tune={n_tune:>3}  chs bias={:.4}  per-env bias={:.4}",
            chs.overall, per.overall
        );
    }
    Ok(())
}
