//! Hyperparameter selection procedures.
//!
//! All procedures break exact ties toward the lexicographically smallest
//! setting id. Settings are stored sorted by id, so that is the lowest index.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{CellId, CellSamples, Dataset, HyperparameterSetting};
use crate::error::{Error, Result};
use crate::normalize::NormalizedView;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Procedure {
    /// One setting maximizing the mean normalized score over all environments.
    Chs,
    /// A separate setting per environment, maximizing the raw mean.
    PerEnv,
    /// One setting maximizing the minimum normalized score over environments.
    WorstCase,
    /// [`Procedure::Chs`] restricted to a subset of tuning environments.
    SubsetChs,
}

impl Procedure {
    pub fn as_str(self) -> &'static str {
        match self {
            Procedure::Chs => "chs",
            Procedure::PerEnv => "per-env",
            Procedure::WorstCase => "worst-case",
            Procedure::SubsetChs => "subset-chs",
        }
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chs" => Ok(Procedure::Chs),
            "per-env" => Ok(Procedure::PerEnv),
            "worst-case" => Ok(Procedure::WorstCase),
            "subset-chs" => Ok(Procedure::SubsetChs),
            other => Err(Error::arg(format!("unknown procedure {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub algorithm: String,
    pub procedure: Procedure,
    /// Environment -> chosen setting. Constant for cross-environment procedures.
    pub chosen: BTreeMap<String, HyperparameterSetting>,
    /// Mean of `per_env_scores` (minimum for worst-case).
    pub aggregate_score: f64,
    /// Normalized cell means, or raw means for per-env tuning.
    pub per_env_scores: BTreeMap<String, f64>,
    pub tuning_envs: Vec<String>,
}

/// Index-level selection outcome for one algorithm.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Choice {
    /// Chosen setting index for every environment of the dataset.
    pub settings: Vec<usize>,
    pub aggregate: f64,
    /// Scores over `envs`, in the same order.
    pub scores: Vec<f64>,
    pub envs: Vec<usize>,
}

/// First index with the strictly greatest score.
pub(crate) fn argmax(scores: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in scores.into_iter().enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

fn sample_of<'s>(ds: &Dataset, samples: &'s CellSamples, cell: CellId) -> Result<&'s [f64]> {
    let s = samples.get(cell);
    if s.is_empty() {
        return Err(Error::MissingSubsample(ds.key(cell).to_string()));
    }
    Ok(s)
}

/// `[setting][env]` normalized means for the given environments.
pub(crate) fn normalized_table(
    view: &NormalizedView<'_>,
    algorithm: usize,
    envs: &[usize],
    samples: &CellSamples,
) -> Result<Vec<Vec<f64>>> {
    let ds = view.dataset();
    (0..ds.settings(algorithm).len())
        .map(|s| {
            envs.iter()
                .map(|&e| {
                    let cell = ds.cell_id(algorithm, s, e);
                    Ok(view.cell_mean(cell, sample_of(ds, samples, cell)?))
                })
                .collect()
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn min(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

pub(crate) fn choose(
    procedure: Procedure,
    view: &NormalizedView<'_>,
    algorithm: usize,
    envs: &[usize],
    samples: &CellSamples,
) -> Result<Choice> {
    let ds = view.dataset();
    let n_env = ds.n_environments();
    match procedure {
        Procedure::PerEnv => {
            let mut settings = vec![0; n_env];
            let mut scores = Vec::with_capacity(n_env);
            for e in 0..n_env {
                let (s, best) = argmax_raw(ds, algorithm, e, samples)?;
                settings[e] = s;
                scores.push(best);
            }
            Ok(Choice {
                settings,
                aggregate: mean(&scores),
                scores,
                envs: (0..n_env).collect(),
            })
        }
        Procedure::Chs | Procedure::SubsetChs | Procedure::WorstCase => {
            if envs.is_empty() {
                return Err(Error::arg("no environments to select over"));
            }
            let table = normalized_table(view, algorithm, envs, samples)?;
            let agg: fn(&[f64]) -> f64 = if procedure == Procedure::WorstCase {
                min
            } else {
                mean
            };
            let (s, best) = argmax(table.iter().map(|row| agg(row)));
            Ok(Choice {
                settings: vec![s; n_env],
                aggregate: best,
                scores: table[s].clone(),
                envs: envs.to_vec(),
            })
        }
    }
}

fn argmax_raw(
    ds: &Dataset,
    algorithm: usize,
    env: usize,
    samples: &CellSamples,
) -> Result<(usize, f64)> {
    let means = (0..ds.settings(algorithm).len())
        .map(|s| Ok(mean(sample_of(ds, samples, ds.cell_id(algorithm, s, env))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax(means))
}

fn algorithm_index(ds: &Dataset, id: &str) -> Result<usize> {
    ds.algorithm_index(id)
        .ok_or_else(|| Error::UnknownKey(format!("algorithm {id}")))
}

fn env_indices(ds: &Dataset, envs: &[String]) -> Result<Vec<usize>> {
    let mut idx = envs
        .iter()
        .map(|e| {
            ds.environment_index(e)
                .ok_or_else(|| Error::arg(format!("environment {e} is not in the dataset")))
        })
        .collect::<Result<Vec<_>>>()?;
    idx.sort_unstable();
    idx.dedup();
    Ok(idx)
}

pub(crate) fn to_result(
    ds: &Dataset,
    procedure: Procedure,
    algorithm: usize,
    choice: &Choice,
    only_env: Option<usize>,
) -> SelectionResult {
    let envs = ds.environments();
    let settings = ds.settings(algorithm);
    let chosen = (0..envs.len())
        .filter(|&e| only_env.is_none_or(|o| o == e))
        .map(|e| (envs[e].clone(), settings[choice.settings[e]].clone()))
        .collect();
    let per_env_scores = choice
        .envs
        .iter()
        .zip(&choice.scores)
        .filter(|(&e, _)| only_env.is_none_or(|o| o == e))
        .map(|(&e, &s)| (envs[e].clone(), s))
        .collect::<BTreeMap<_, _>>();
    let aggregate_score = match only_env {
        Some(_) => per_env_scores.values().copied().next().unwrap_or(f64::NAN),
        None => choice.aggregate,
    };
    SelectionResult {
        algorithm: ds.algorithms()[algorithm].clone(),
        procedure,
        chosen,
        aggregate_score,
        per_env_scores,
        tuning_envs: match only_env {
            Some(e) => vec![envs[e].clone()],
            None => choice.envs.iter().map(|&e| envs[e].clone()).collect(),
        },
    }
}

/// Unweighted mean over `envs` of the setting's normalized cell means.
pub fn score_setting(
    view: &NormalizedView<'_>,
    algorithm: &str,
    setting: &HyperparameterSetting,
    envs: &[String],
    samples: &CellSamples,
) -> Result<f64> {
    let ds = view.dataset();
    if envs.is_empty() {
        return Err(Error::arg("no environments to score over"));
    }
    let a = algorithm_index(ds, algorithm)?;
    let s = ds
        .setting_index(a, setting.id())
        .ok_or_else(|| Error::UnknownKey(format!("setting {setting} of {algorithm}")))?;
    let idx = env_indices(ds, envs)?;
    let mut total = 0.0;
    for &e in &idx {
        let cell = ds.cell_id(a, s, e);
        total += view.cell_mean(cell, sample_of(ds, samples, cell)?);
    }
    Ok(total / idx.len() as f64)
}

pub fn select_chs(
    view: &NormalizedView<'_>,
    algorithm: &str,
    samples: &CellSamples,
) -> Result<SelectionResult> {
    let ds = view.dataset();
    let a = algorithm_index(ds, algorithm)?;
    let envs: Vec<usize> = (0..ds.n_environments()).collect();
    let c = choose(Procedure::Chs, view, a, &envs, samples)?;
    Ok(to_result(ds, Procedure::Chs, a, &c, None))
}

/// Best setting for one environment by raw sample mean.
pub fn select_per_env(
    ds: &Dataset,
    algorithm: &str,
    env: &str,
    samples: &CellSamples,
) -> Result<SelectionResult> {
    let a = algorithm_index(ds, algorithm)?;
    let e = ds
        .environment_index(env)
        .ok_or_else(|| Error::UnknownKey(format!("environment {env}")))?;
    let (s, best) = argmax_raw(ds, a, e, samples)?;
    let mut settings = vec![0; ds.n_environments()];
    settings[e] = s;
    let c = Choice {
        settings,
        aggregate: best,
        scores: vec![best],
        envs: vec![e],
    };
    Ok(to_result(ds, Procedure::PerEnv, a, &c, Some(e)))
}

pub fn select_worst_case(
    view: &NormalizedView<'_>,
    algorithm: &str,
    samples: &CellSamples,
) -> Result<SelectionResult> {
    let ds = view.dataset();
    let a = algorithm_index(ds, algorithm)?;
    let envs: Vec<usize> = (0..ds.n_environments()).collect();
    let c = choose(Procedure::WorstCase, view, a, &envs, samples)?;
    Ok(to_result(ds, Procedure::WorstCase, a, &c, None))
}

pub fn select_subset_chs(
    view: &NormalizedView<'_>,
    algorithm: &str,
    tuning_envs: &[String],
    samples: &CellSamples,
) -> Result<SelectionResult> {
    let ds = view.dataset();
    let a = algorithm_index(ds, algorithm)?;
    let envs = env_indices(ds, tuning_envs)?;
    let c = choose(Procedure::SubsetChs, view, a, &envs, samples)?;
    Ok(to_result(ds, Procedure::SubsetChs, a, &c, None))
}
