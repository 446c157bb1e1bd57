#![allow(dead_code)]

use chs::dataset::{Dataset, DatasetBuilder, HpValue, HyperparameterSetting};
use chs::normalize::PoolingPolicy;
use chs::select::Procedure;
use rand::Rng;

/// Raw scores indexed `[algorithm][setting][environment][run]`.
pub type Grid = Vec<Vec<Vec<Vec<f64>>>>;

pub fn setting(k: usize) -> HyperparameterSetting {
    HyperparameterSetting::new(vec![("k".into(), HpValue::Number(k as f64))]).unwrap()
}

pub fn alg_name(a: usize) -> String {
    format!("A{a}")
}

pub fn env_name(e: usize) -> String {
    format!("E{e}")
}

pub fn build(grid: &Grid) -> Dataset {
    let mut b = DatasetBuilder::new();
    for (a, per_s) in grid.iter().enumerate() {
        for (s, per_e) in per_s.iter().enumerate() {
            for (e, runs) in per_e.iter().enumerate() {
                b.push_cell(
                    &alg_name(a),
                    &env_name(e),
                    &setting(s),
                    0..runs.len() as u64,
                    runs.iter().copied(),
                )
                .unwrap();
            }
        }
    }
    b.finish().unwrap()
}

/// Small integer scores so that ties are common.
pub fn random_grid<R: Rng>(
    rng: &mut R,
    algs: usize,
    settings: usize,
    envs: usize,
    runs: usize,
) -> Grid {
    (0..algs)
        .map(|_| {
            (0..settings)
                .map(|_| {
                    (0..envs)
                        .map(|_| (0..runs).map(|_| rng.random_range(0..4) as f64).collect())
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn below(pool: &[f64], xs: &[f64]) -> usize {
    xs.iter()
        .map(|&x| pool.iter().filter(|&&g| g < x).count())
        .sum()
}

fn norm(pool: &[f64], xs: &[f64]) -> f64 {
    below(pool, xs) as f64 / (pool.len() as f64 * xs.len() as f64)
}

fn avg(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn first_max(xs: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    best
}

fn order_desc(xs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    // insertion sort keeps equal scores in index order
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && xs[idx[j]] > xs[idx[j - 1]] {
            idx.swap(j, j - 1);
            j -= 1;
        }
    }
    idx
}

/// `samples[a][s][e]` -> chosen setting per environment for each algorithm.
fn pick(
    procedure: Procedure,
    samples: &Grid,
    pools: &[Vec<f64>],
    envs: &[usize],
) -> Vec<Vec<usize>> {
    let n_env = pools.len();
    samples
        .iter()
        .map(|per_s| match procedure {
            Procedure::PerEnv => (0..n_env)
                .map(|e| first_max(&per_s.iter().map(|c| avg(&c[e])).collect::<Vec<_>>()))
                .collect(),
            _ => {
                let agg: Vec<f64> = per_s
                    .iter()
                    .map(|c| {
                        let v: Vec<f64> = envs.iter().map(|&e| norm(&pools[e], &c[e])).collect();
                        if procedure == Procedure::WorstCase {
                            v.iter().copied().fold(f64::INFINITY, f64::min)
                        } else {
                            avg(&v)
                        }
                    })
                    .collect();
                vec![first_max(&agg); n_env]
            }
        })
        .collect()
}

fn pools_of(samples: &Grid, n_env: usize) -> Vec<Vec<f64>> {
    let mut pools = vec![Vec::new(); n_env];
    for per_s in samples {
        for c in per_s {
            for (e, runs) in c.iter().enumerate() {
                pools[e].extend_from_slice(runs);
            }
        }
    }
    pools
}

/// Every ordered sequence of `n` draws from `runs`, each with probability
/// `len^-n`.
fn sequences(runs: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                runs.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactFailure {
    pub overall: f64,
    pub per_env: Vec<f64>,
}

/// Failure probabilities by brute-force enumeration of every tuning draw,
/// environment subset and evaluation draw. Independent of the engine.
pub fn exact_failure(
    grid: &Grid,
    procedure: Procedure,
    n_tune: usize,
    n_eval: usize,
    pooling: PoolingPolicy,
    subset_size: Option<usize>,
) -> ExactFailure {
    let n_alg = grid.len();
    let n_env = grid[0][0].len();
    let all: Vec<usize> = (0..n_env).collect();
    let full_pools = pools_of(grid, n_env);

    let truth_proc = if procedure == Procedure::SubsetChs {
        Procedure::Chs
    } else {
        procedure
    };
    let t_pick = pick(truth_proc, grid, &full_pools, &all);
    let t_scores: Vec<Vec<f64>> = (0..n_alg)
        .map(|a| {
            (0..n_env)
                .map(|e| norm(&full_pools[e], &grid[a][t_pick[a][e]][e]))
                .collect()
        })
        .collect();
    let t_rank = order_desc(&t_scores.iter().map(|r| avg(r)).collect::<Vec<_>>());
    let t_env_rank: Vec<Vec<usize>> = (0..n_env)
        .map(|e| order_desc(&t_scores.iter().map(|r| r[e]).collect::<Vec<_>>()))
        .collect();

    let subsets: Vec<(Vec<usize>, f64)> = match (procedure, subset_size) {
        (Procedure::SubsetChs, Some(k)) => {
            let mut out = Vec::new();
            for mask in 0u32..(1 << n_env) {
                if mask.count_ones() as usize == k {
                    out.push(((0..n_env).filter(|e| mask >> e & 1 == 1).collect(), 0.0));
                }
            }
            let p = 1.0 / out.len() as f64;
            out.into_iter().map(|(s, _)| (s, p)).collect()
        }
        _ => vec![(all.clone(), 1.0)],
    };

    let cells: Vec<(usize, usize, usize)> = (0..n_alg)
        .flat_map(|a| (0..grid[a].len()).flat_map(move |s| (0..n_env).map(move |e| (a, s, e))))
        .collect();
    let options: Vec<Vec<Vec<f64>>> = cells
        .iter()
        .map(|&(a, s, e)| sequences(&grid[a][s][e], n_tune))
        .collect();
    let p_tune: f64 = options.iter().map(|o| 1.0 / o.len() as f64).product();

    let mut overall = 0.0;
    let mut per_env = vec![0.0; n_env];
    let mut idx = vec![0usize; cells.len()];
    loop {
        let mut tune: Grid = grid
            .iter()
            .map(|per_s| per_s.iter().map(|c| vec![Vec::new(); c.len()]).collect())
            .collect();
        for (c, &(a, s, e)) in cells.iter().enumerate() {
            tune[a][s][e] = options[c][idx[c]].clone();
        }
        let pools = match pooling {
            PoolingPolicy::FullDataset => full_pools.clone(),
            PoolingPolicy::ProvidedSubsample => pools_of(&tune, n_env),
        };
        for (subset, p_sub) in &subsets {
            let choice = pick(procedure, &tune, &pools, subset);
            let chosen: Vec<(usize, usize)> = (0..n_alg)
                .flat_map(|a| (0..n_env).map(move |e| (a, e)))
                .collect();
            let eval_opts: Vec<Vec<Vec<f64>>> = chosen
                .iter()
                .map(|&(a, e)| sequences(&grid[a][choice[a][e]][e], n_eval))
                .collect();
            let p_eval: f64 = eval_opts.iter().map(|o| 1.0 / o.len() as f64).product();
            let mut j = vec![0usize; chosen.len()];
            loop {
                let mut scores = vec![vec![0.0; n_env]; n_alg];
                for (k, &(a, e)) in chosen.iter().enumerate() {
                    scores[a][e] = norm(&full_pools[e], &eval_opts[k][j[k]]);
                }
                let p = p_tune * p_sub * p_eval;
                if order_desc(&scores.iter().map(|r| avg(r)).collect::<Vec<_>>()) != t_rank {
                    overall += p;
                }
                for e in 0..n_env {
                    let r = order_desc(&scores.iter().map(|row| row[e]).collect::<Vec<_>>());
                    if r != t_env_rank[e] {
                        per_env[e] += p;
                    }
                }
                if !bump(&mut j, &eval_opts) {
                    break;
                }
            }
        }
        if !bump(&mut idx, &options) {
            break;
        }
    }
    ExactFailure { overall, per_env }
}

fn bump<T>(idx: &mut [usize], opts: &[Vec<T>]) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < opts[k].len() {
            return true;
        }
        idx[k] = 0;
    }
    false
}
