//! Repeated-subsampling studies of the selection step alone: how much
//! performance is lost by tuning on few runs, and how much each environment
//! gives up when one setting must serve all of them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScoreSummary;
use super::{summarize, tuning_sample};
use crate::dataset::{CellSamples, Dataset};
use crate::error::{Error, Result};
use crate::normalize::{build_pools, NormalizedView, PoolingPolicy};
use crate::select::{argmax, choose, Procedure};
use crate::stats::mean;
use crate::streams::KeyedStreams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationConfig {
    pub n_tune: usize,
    pub n_reps: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub pooling_policy: PoolingPolicy,
    #[serde(default = "default_level")]
    pub confidence_level: f64,
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
}

fn default_level() -> f64 {
    0.95
}

fn default_n_boot() -> usize {
    1000
}

impl ReplicationConfig {
    pub fn new(n_tune: usize, n_reps: usize, master_seed: u64) -> Self {
        Self {
            n_tune,
            n_reps,
            master_seed,
            pooling_policy: PoolingPolicy::default(),
            confidence_level: default_level(),
            n_boot: default_n_boot(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_tune == 0 || self.n_reps == 0 {
            return Err(Error::config("n_tune and n_reps must be positive"));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(Error::config("confidence_level must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// `[algorithm][setting][environment]` tables over all runs.
struct FullTables {
    normalized: Vec<Vec<Vec<f64>>>,
    raw: Vec<Vec<Vec<f64>>>,
}

fn full_tables(view: &NormalizedView<'_>) -> FullTables {
    let ds = view.dataset();
    let table = |f: &dyn Fn(usize, &[f64]) -> f64| {
        (0..ds.n_algorithms())
            .map(|a| {
                (0..ds.settings(a).len())
                    .map(|s| {
                        (0..ds.n_environments())
                            .map(|e| f(e, ds.cell(ds.cell_id(a, s, e))))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    };
    FullTables {
        normalized: table(&|e, xs| view.pool(e).mean_cdf(xs)),
        raw: table(&|_, xs| mean(xs)),
    }
}

/// Chosen setting per environment for every algorithm, for each replicate.
fn replicate_choices(
    ds: &Dataset,
    procedure: Procedure,
    cfg: &ReplicationConfig,
) -> Result<Vec<Vec<Vec<usize>>>> {
    let envs: Vec<usize> = (0..ds.n_environments()).collect();
    let full = build_pools(ds, PoolingPolicy::FullDataset, None)?;
    (0..cfg.n_reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut src = KeyedStreams::new(cfg.master_seed, rep);
            let tune = tuning_sample(ds, &mut src, cfg.n_tune);
            let local;
            let view = match cfg.pooling_policy {
                PoolingPolicy::FullDataset => &full,
                PoolingPolicy::ProvidedSubsample => {
                    local = build_pools(ds, PoolingPolicy::ProvidedSubsample, Some(&tune))?;
                    &local
                }
            };
            (0..ds.n_algorithms())
                .map(|a| Ok(choose(procedure, view, a, &envs, &tune)?.settings))
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmBias {
    /// Environment -> setting chosen with all runs.
    pub optimum: BTreeMap<String, String>,
    /// Environment -> mean normalized loss.
    pub per_environment: BTreeMap<String, f64>,
    /// Environment -> mean loss in raw score units.
    pub per_environment_raw: BTreeMap<String, f64>,
    /// Per-replicate normalized loss averaged over environments.
    pub overall: ScoreSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub procedure: Procedure,
    pub config: ReplicationConfig,
    pub per_algorithm: BTreeMap<String, AlgorithmBias>,
    /// Mean of the algorithms' overall bias.
    pub overall: f64,
}

/// Expected full-data loss from selecting on `n_tune` runs instead of all of
/// them.
pub fn estimate_bias(
    ds: &Dataset,
    procedure: Procedure,
    n_tune: usize,
    n_reps: usize,
    master_seed: u64,
) -> Result<BiasReport> {
    estimate_bias_with(
        ds,
        procedure,
        &ReplicationConfig::new(n_tune, n_reps, master_seed),
    )
}

pub fn estimate_bias_with(
    ds: &Dataset,
    procedure: Procedure,
    cfg: &ReplicationConfig,
) -> Result<BiasReport> {
    cfg.validate()?;
    if procedure == Procedure::SubsetChs {
        return Err(Error::config(
            "bias is defined for chs, per-env and worst-case",
        ));
    }
    let full = build_pools(ds, PoolingPolicy::FullDataset, None)?;
    let tables = full_tables(&full);
    let all = CellSamples::full(ds);
    let envs: Vec<usize> = (0..ds.n_environments()).collect();
    let reps = replicate_choices(ds, procedure, cfg)?;
    let n = reps.len() as f64;
    let mut per_algorithm = BTreeMap::new();
    for a in 0..ds.n_algorithms() {
        let star = choose(procedure, &full, a, &envs, &all)?.settings;
        let norm = &tables.normalized[a];
        let raw = &tables.raw[a];
        let mut env_loss = vec![0.0; envs.len()];
        let mut env_raw = vec![0.0; envs.len()];
        let mut per_rep = Vec::with_capacity(reps.len());
        for rep in &reps {
            let hat = &rep[a];
            let mut total = 0.0;
            for e in 0..envs.len() {
                let loss = norm[star[e]][e] - norm[hat[e]][e];
                env_loss[e] += loss;
                env_raw[e] += raw[star[e]][e] - raw[hat[e]][e];
                total += loss;
            }
            per_rep.push(total / envs.len() as f64);
        }
        let names = ds.environments();
        per_algorithm.insert(
            ds.algorithms()[a].clone(),
            AlgorithmBias {
                optimum: names
                    .iter()
                    .zip(&star)
                    .map(|(e, &s)| (e.clone(), ds.settings(a)[s].id().to_string()))
                    .collect(),
                per_environment: names
                    .iter()
                    .cloned()
                    .zip(env_loss.iter().map(|x| x / n))
                    .collect(),
                per_environment_raw: names
                    .iter()
                    .cloned()
                    .zip(env_raw.iter().map(|x| x / n))
                    .collect(),
                overall: summarize(
                    &per_rep,
                    cfg.confidence_level,
                    cfg.n_boot,
                    cfg.master_seed,
                    a as u64,
                )?,
            },
        );
    }
    let overall = mean(
        &per_algorithm
            .values()
            .map(|b| b.overall.mean)
            .collect::<Vec<_>>(),
    );
    Ok(BiasReport {
        procedure,
        config: cfg.clone(),
        per_algorithm,
        overall,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmDrop {
    /// Environment -> setting with the best full-data normalized mean there.
    pub optimum: BTreeMap<String, String>,
    /// Setting chosen by the cross-environment procedure on all runs.
    pub chs_optimum: String,
    /// Environment -> drop from its own optimum to the tuned setting.
    pub per_environment: BTreeMap<String, ScoreSummary>,
    /// Environment with the largest mean drop.
    pub sacrificed: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropReport {
    pub config: ReplicationConfig,
    pub per_algorithm: BTreeMap<String, AlgorithmDrop>,
}

/// Normalized score given up in each environment by using one setting
/// everywhere, with that setting tuned on `n_tune` runs.
pub fn performance_drop(
    ds: &Dataset,
    n_tune: usize,
    n_reps: usize,
    master_seed: u64,
) -> Result<DropReport> {
    performance_drop_with(ds, &ReplicationConfig::new(n_tune, n_reps, master_seed))
}

pub fn performance_drop_with(ds: &Dataset, cfg: &ReplicationConfig) -> Result<DropReport> {
    cfg.validate()?;
    let full = build_pools(ds, PoolingPolicy::FullDataset, None)?;
    let tables = full_tables(&full);
    let all = CellSamples::full(ds);
    let envs: Vec<usize> = (0..ds.n_environments()).collect();
    let names = ds.environments();
    let reps = replicate_choices(ds, Procedure::Chs, cfg)?;
    let mut per_algorithm = BTreeMap::new();
    for a in 0..ds.n_algorithms() {
        let norm = &tables.normalized[a];
        let star: Vec<usize> = envs
            .iter()
            .map(|&e| argmax(norm.iter().map(|row| row[e])).0)
            .collect();
        let chs = choose(Procedure::Chs, &full, a, &envs, &all)?.settings[0];
        let mut per_environment = BTreeMap::new();
        let mut worst = (0, f64::NEG_INFINITY);
        for &e in &envs {
            let drops: Vec<f64> = reps
                .iter()
                .map(|rep| norm[star[e]][e] - norm[rep[a][e]][e])
                .collect();
            let stream = (a * envs.len() + e) as u64;
            let s = summarize(
                &drops,
                cfg.confidence_level,
                cfg.n_boot,
                cfg.master_seed,
                stream,
            )?;
            if s.mean > worst.1 {
                worst = (e, s.mean);
            }
            per_environment.insert(names[e].clone(), s);
        }
        per_algorithm.insert(
            ds.algorithms()[a].clone(),
            AlgorithmDrop {
                optimum: names
                    .iter()
                    .zip(&star)
                    .map(|(e, &s)| (e.clone(), ds.settings(a)[s].id().to_string()))
                    .collect(),
                chs_optimum: ds.settings(a)[chs].id().to_string(),
                per_environment,
                sacrificed: names[worst.0].clone(),
            },
        );
    }
    Ok(DropReport {
        config: cfg.clone(),
        per_algorithm,
    })
}
