//! Acceptance criteria. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use chs::dataset::{CellSamples, Dataset, HpValue, HyperparameterSetting};
use chs::normalize::{build_pools, cdf_normalize, Pool, PoolingPolicy};
use chs::report::to_json;
use chs::select::{select_chs, select_worst_case, Procedure};
use chs::simulate::{
    estimate_bias, exact_study, performance_drop, run_study, run_study_with_workers, subset_study,
    ExperimentConfig,
};
use chs::stats::{kde, percentile_ci};
use chs::synthetic::{
    generate_dataset, preset, AnalyticOracle, BIMODAL_HIGH, BIMODAL_KDE_CELL, BIMODAL_LOW,
};
use common::{build, exact_failure, random_grid};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn cdf_exactness() -> Check {
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..200);
        let pool: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..50) as f64 / 4.0)
            .collect();
        let x = if rng.random_bool(0.5) {
            pool[rng.random_range(0..n)]
        } else {
            rng.random_range(-1.0..13.0)
        };
        let brute = pool.iter().filter(|&&g| g < x).count() as f64 / n as f64;
        let p = Pool::new("E", pool).unwrap();
        worst = worst.max((cdf_normalize(x, &p) - brute).abs());
    }
    ensure(
        worst <= 1e-12,
        format!("max abs error {worst:e} over 1000 pairs"),
    )
}

fn self_average() -> Check {
    let mut rng = StdRng::seed_from_u64(2);
    let mut bad = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..300usize);
        let mut pool: Vec<f64> = Vec::new();
        while pool.len() < n {
            let x: f64 = rng.random();
            if !pool.contains(&x) {
                pool.push(x);
            }
        }
        let p = Pool::new("E", pool.clone()).unwrap();
        if p.mean_cdf(&pool) != (n - 1) as f64 / (2 * n) as f64 {
            bad += 1;
        }
        let tied: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
        let strict = tied
            .iter()
            .flat_map(|a| tied.iter().map(move |b| (a < b) as usize))
            .sum::<usize>();
        let p = Pool::new("E", tied.clone()).unwrap();
        if p.mean_cdf(&tied) != strict as f64 / (n * n) as f64 {
            bad += 1;
        }
    }
    ensure(
        bad == 0,
        format!("{bad} of 200 pools differ from the exact value"),
    )
}

fn monotone_invariance() -> Check {
    let mut rng = StdRng::seed_from_u64(3);
    let normal = Normal::new(0.0, 5.0).unwrap();
    let mut changed = 0;
    for _ in 0..50 {
        let (n_alg, n_set, n_env, runs) = (
            rng.random_range(1..4),
            rng.random_range(2..6),
            rng.random_range(2..5),
            rng.random_range(2..8),
        );
        let mut grid: common::Grid = (0..n_alg)
            .map(|_| {
                (0..n_set)
                    .map(|_| {
                        (0..n_env)
                            .map(|_| (0..runs).map(|_| normal.sample(&mut rng)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let before = selections(&build(&grid));
        let target = rng.random_range(0..n_env);
        for per_s in grid.iter_mut() {
            for c in per_s.iter_mut() {
                for x in c[target].iter_mut() {
                    *x = *x * *x * *x + *x;
                }
            }
        }
        if selections(&build(&grid)) != before {
            changed += 1;
        }
    }
    ensure(
        changed == 0,
        format!("{changed} of 50 datasets changed a selection"),
    )
}

fn selections(ds: &Dataset) -> Vec<chs::select::SelectionResult> {
    let v = build_pools(ds, PoolingPolicy::FullDataset, None).unwrap();
    let full = CellSamples::full(ds);
    ds.algorithms()
        .iter()
        .flat_map(|a| {
            [
                select_chs(&v, a, &full).unwrap(),
                select_worst_case(&v, a, &full).unwrap(),
            ]
        })
        .collect()
}

fn enumeration_oracle() -> Check {
    let mut rng = StdRng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut total_paths = 0;
    let mut nontrivial = 0;
    let grids: Vec<common::Grid> = (0..3).map(|_| random_grid(&mut rng, 2, 2, 2, 2)).collect();
    let light = [
        (Procedure::Chs, 1, 2, PoolingPolicy::FullDataset, None),
        (Procedure::Chs, 1, 2, PoolingPolicy::ProvidedSubsample, None),
        (
            Procedure::PerEnv,
            1,
            2,
            PoolingPolicy::ProvidedSubsample,
            None,
        ),
        (
            Procedure::WorstCase,
            1,
            2,
            PoolingPolicy::ProvidedSubsample,
            None,
        ),
        (
            Procedure::SubsetChs,
            1,
            2,
            PoolingPolicy::ProvidedSubsample,
            Some(1),
        ),
    ];
    let heavy = [
        (Procedure::Chs, 2, 1, PoolingPolicy::ProvidedSubsample, None),
        (
            Procedure::PerEnv,
            2,
            1,
            PoolingPolicy::ProvidedSubsample,
            None,
        ),
    ];
    for (g, grid) in grids.iter().enumerate() {
        let ds = build(grid);
        let plans = light.iter().chain(if g == 0 { &heavy[..] } else { &[] });
        for &(procedure, n_tune, n_eval, pooling_policy, subset_size) in plans {
            let cfg = ExperimentConfig {
                procedure,
                n_tune,
                n_eval,
                pooling_policy,
                subset_size,
                n_experiments: 1,
                n_boot: 0,
                ..Default::default()
            };
            let got = exact_study(&ds, &cfg, 1 << 22).map_err(|e| e.to_string())?;
            let want = exact_failure(grid, procedure, n_tune, n_eval, pooling_policy, subset_size);
            worst = worst.max((got.overall_failure - want.overall).abs());
            for (e, p) in want.per_env.iter().enumerate() {
                worst = worst.max((got.per_environment_failure[&common::env_name(e)] - p).abs());
            }
            total_paths += got.paths;
            cases += 1;
            nontrivial += (want.overall > 0.0 && want.overall < 1.0) as usize;
        }
    }
    // Monte Carlo agrees with the exact value.
    let ds = build(&grids[0]);
    let cfg = ExperimentConfig {
        n_tune: 2,
        n_eval: 1,
        n_experiments: 20_000,
        n_boot: 0,
        master_seed: 9,
        ..Default::default()
    };
    let exact = exact_failure(
        &grids[0],
        Procedure::Chs,
        2,
        1,
        PoolingPolicy::ProvidedSubsample,
        None,
    )
    .overall;
    let mc = run_study(&ds, &cfg)
        .map_err(|e| e.to_string())?
        .failure_rate;
    let se = (exact * (1.0 - exact) / 20_000.0).sqrt().max(1e-9);
    let z = (mc.overall - exact).abs() / se;
    ensure(
        worst <= 1e-12 && z < 4.0,
        format!(
            "{cases} cases ({nontrivial} with failure strictly between 0 and 1), {total_paths} engine paths, max |engine - oracle| {worst:e}; Monte Carlo {:.4} vs exact {exact:.4} (z {z:.2})",
            mc.overall
        ),
    )
}

fn bimodal_trend() -> Check {
    let p = preset("bimodal-overlap").map_err(|e| e.to_string())?;
    let ds = generate_dataset(&p.spec).map_err(|e| e.to_string())?;
    let mut rates = Vec::new();
    let mut max_se = 0.0f64;
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
        let r = run_study(&ds, &cfg).map_err(|e| e.to_string())?;
        rates.push(r.failure_rate.overall);
        max_se = max_se.max(r.failure_rate.standard_error);
    }
    let monotone = rates.windows(2).all(|w| w[1] <= w[0]);
    ensure(
        monotone && rates[0] - rates[3] >= 0.10 && max_se < 0.01,
        format!("failure at n_tune 3/10/30/100 = {rates:.4?}, max se {max_se:.4}"),
    )
}

fn dominance() -> Check {
    let p = preset("dominance").map_err(|e| e.to_string())?;
    let ds = generate_dataset(&p.spec).map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        n_tune: 3,
        n_eval: 50,
        n_experiments: 10_000,
        master_seed: 6,
        n_boot: 0,
        ..Default::default()
    };
    let r = run_study(&ds, &cfg).map_err(|e| e.to_string())?;
    let truth = r.ground_truth.overall_ranking.join(" > ");
    let correct = r.ordering_frequency.get(&truth).copied().unwrap_or(0.0);
    ensure(
        r.failure_rate.overall == 0.0 && truth == "A > B > C",
        format!(
            "ordering {truth} in {:.2}% of 10000 experiments",
            correct * 100.0
        ),
    )
}

fn many_settings_bias() -> Check {
    let p = preset("many-settings").map_err(|e| e.to_string())?;
    let ds = generate_dataset(&p.spec).map_err(|e| e.to_string())?;
    let b = |proc, n| {
        estimate_bias(&ds, proc, n, 2000, 4)
            .map(|r| r.overall)
            .map_err(|e| e.to_string())
    };
    let (chs3, per3) = (b(Procedure::Chs, 3)?, b(Procedure::PerEnv, 3)?);
    let (chs100, per100) = (b(Procedure::Chs, 100)?, b(Procedure::PerEnv, 100)?);
    ensure(
        per3 >= 2.0 * chs3 && chs3 > 0.0 && chs100 < 0.2 * chs3 && per100 < 0.2 * per3,
        format!("bias n_tune=3: chs {chs3:.4}, per-env {per3:.4}; n_tune=100: chs {chs100:.5}, per-env {per100:.5}"),
    )
}

fn heterogeneous_drop() -> Check {
    let p = preset("heterogeneous").map_err(|e| e.to_string())?;
    let ds = generate_dataset(&p.spec).map_err(|e| e.to_string())?;
    let oracle = AnalyticOracle::new(&p.spec).map_err(|e| e.to_string())?;
    let d = performance_drop(&ds, 10, 500, 3).map_err(|e| e.to_string())?;
    let chosen = &oracle.ground_truth["chs"].chosen;
    let mut lines = Vec::new();
    let mut ok = true;
    for (alg, a) in &d.per_algorithm {
        let env = &a.sacrificed;
        let cells = &oracle.cells[alg][env];
        let best = cells
            .values()
            .map(|m| m.normalized_mean)
            .fold(f64::NEG_INFINITY, f64::max);
        let gap = best - cells[&chosen[alg][env]].normalized_mean;
        let s = &a.per_environment[env];
        let mi = s.mean_interval.unwrap_or(s.interval);
        ok &= s.mean > 0.0
            && s.interval.lower > 0.0
            && mi.lower > 0.0
            && (s.mean - gap).abs() <= 0.02;
        lines.push(format!(
            "{alg}@{env}: drop {:.4} [{:.4}, {:.4}] vs analytic {gap:.4}",
            s.mean, s.interval.lower, s.interval.upper
        ));
    }
    ensure(ok, lines.join("; "))
}

fn subset_width() -> Check {
    let p = preset("heterogeneous").map_err(|e| e.to_string())?;
    let ds = generate_dataset(&p.spec).map_err(|e| e.to_string())?;
    let base = ExperimentConfig {
        n_tune: 10,
        n_eval: 50,
        n_experiments: 2000,
        master_seed: 2,
        n_boot: 0,
        ..Default::default()
    };
    let full = run_study(&ds, &base).map_err(|e| e.to_string())?;
    let mut rates = Vec::new();
    let mut ratio = f64::INFINITY;
    for k in [2, 3, 4] {
        let cfg = ExperimentConfig {
            procedure: Procedure::SubsetChs,
            subset_size: Some(k),
            ..base.clone()
        };
        let r = subset_study(&ds, &cfg).map_err(|e| e.to_string())?;
        if k == 2 {
            for (alg, s) in &r.overall {
                ratio = ratio.min(s.interval.width() / full.overall[alg].interval.width());
            }
        }
        rates.push((r.failure_rate.overall, r.failure_rate.standard_error));
    }
    let monotone = rates
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 + 2.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt());
    ensure(
        ratio >= 1.5 && monotone,
        format!(
            "smallest width ratio subset-2/full {ratio:.1}; failure at sizes 2/3/4 = {:.4?}",
            rates.iter().map(|r| r.0).collect::<Vec<_>>()
        ),
    )
}

fn determinism() -> Check {
    let p = preset("bimodal-overlap").map_err(|e| e.to_string())?;
    let ds = generate_dataset(&p.spec).map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        n_experiments: 2000,
        n_boot: 200,
        master_seed: 10,
        ..Default::default()
    };
    let one =
        to_json(&run_study_with_workers(&ds, &cfg, Some(1)).map_err(|e| e.to_string())?).unwrap();
    let eight =
        to_json(&run_study_with_workers(&ds, &cfg, Some(8)).map_err(|e| e.to_string())?).unwrap();

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("d.jsonl");
    let mut buf = Vec::new();
    chs::dataset::write_jsonl(&ds, &mut buf).map_err(|e| e.to_string())?;
    std::fs::write(&data, buf).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for w in ["1", "8"] {
        let out = dir.path().join(format!("w{w}"));
        let status = Command::new(env!("CARGO_BIN_EXE_chs"))
            .args(["--workers", w, "simulate", "--data"])
            .arg(&data)
            .arg("--out")
            .arg(&out)
            .args(["--n-experiments", "2000", "--n-boot", "200", "--seed", "10"])
            .env_remove("CHS_SEED")
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("chs simulate exited with {status}"));
        }
        reports.push(std::fs::read(out.join("report.json")).map_err(|e| e.to_string())?);
    }
    ensure(
        one == eight && reports[0] == reports[1] && reports[0] == one,
        format!(
            "library and CLI report.json, {} bytes, equal for 1 and 8 workers",
            one.len()
        ),
    )
}

fn kde_contract() -> Check {
    let mut rng = StdRng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut negative = false;
    for _ in 0..100 {
        let n = rng.random_range(1..300);
        let spread: f64 = rng.random_range(0.01..100.0);
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let x: f64 = rng.random();
                if rng.random_bool(0.3) {
                    (x * 3.0).floor() * spread
                } else {
                    x * spread
                }
            })
            .collect();
        let c = kde(&xs, None, 512).map_err(|e| e.to_string())?;
        worst = worst.max((c.mass() - 1.0).abs());
        negative |= c.ys.iter().any(|&y| y < 0.0);
    }
    let p = preset("bimodal-overlap").map_err(|e| e.to_string())?;
    let ds = generate_dataset(&p.spec).map_err(|e| e.to_string())?;
    let (alg, env, alpha) = BIMODAL_KDE_CELL;
    let set = HyperparameterSetting::new(vec![("alpha".into(), HpValue::Number(alpha))]).unwrap();
    let key = chs::dataset::CellKey::new(alg, env, set.id()).map_err(|e| e.to_string())?;
    let c = kde(ds.cell_scores(&key).map_err(|e| e.to_string())?, None, 2048)
        .map_err(|e| e.to_string())?;
    let modes = c.local_maxima();
    let near = modes.len() == 2
        && (modes[0] - BIMODAL_LOW.0).abs() <= c.bandwidth
        && (modes[1] - BIMODAL_HIGH.0).abs() <= c.bandwidth;
    ensure(
        worst <= 0.02 && !negative && near,
        format!(
            "max |mass - 1| {worst:.2e} over 100 sets; bimodal cell modes {modes:.2?} with bandwidth {:.2}",
            c.bandwidth
        ),
    )
}

fn bootstrap_coverage() -> Check {
    let mut rng = StdRng::seed_from_u64(12);
    let normal = Normal::new(3.0, 2.0).unwrap();
    let trials = 2000;
    let mut covered = 0;
    for _ in 0..trials {
        let xs: Vec<f64> = (0..60).map(|_| normal.sample(&mut rng)).collect();
        let ci = percentile_ci(&xs, 0.95, 1000, &mut rng).map_err(|e| e.to_string())?;
        covered += ci.contains(3.0) as usize;
    }
    let rate = covered as f64 / trials as f64;
    ensure(
        (0.93..=0.97).contains(&rate),
        format!("coverage {:.2}% over {trials} trials", rate * 100.0),
    )
}

type Criterion = fn() -> Check;

fn main() {
    let criteria: [(&str, u64, Criterion); 12] = [
        ("cdf normalization exactness", 1, cdf_exactness),
        ("self-average identity", 1, self_average),
        ("monotone-transform invariance", 10, monotone_invariance),
        ("enumeration oracle", 30, enumeration_oracle),
        ("bimodal failure trend", 300, bimodal_trend),
        ("dominance ordering", 300, dominance),
        ("many-settings bias", 600, many_settings_bias),
        ("heterogeneous drop", 300, heterogeneous_drop),
        ("subset CI width and failure", 600, subset_width),
        ("determinism across workers", 120, determinism),
        ("kde contract", 10, kde_contract),
        ("bootstrap coverage", 120, bootstrap_coverage),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = BTreeMap::new();
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(*limit);
        let (ok, detail) = match result {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        println!(
            "criterion {n:>2} {}: {name}: {detail} ({:.2}s, limit {limit}s)",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        if !ok {
            failed.insert(n, name);
        }
    }
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
