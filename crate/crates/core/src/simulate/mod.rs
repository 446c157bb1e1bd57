//! Simulated experiments: resample a large dataset to mimic many small
//! studies, apply a selection procedure to each, and measure how often the
//! reported ordering of algorithms is wrong.

mod replicate;
mod study;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{CellId, CellSamples, Dataset};
use crate::error::{Error, Result};
use crate::normalize::{build_pools, NormalizedView, PoolingPolicy};
use crate::select::{choose, to_result, Choice, Procedure, SelectionResult};
use crate::stats::{percentile_ci, spread_interval, Interval};
use crate::streams::{stream_rng, DrawSource, KeyedStreams, Phase, StreamKey};

pub use replicate::{
    estimate_bias, estimate_bias_with, performance_drop, performance_drop_with, AlgorithmBias,
    AlgorithmDrop, BiasReport, DropReport, ReplicationConfig,
};
pub use study::{
    exact_study, run_study, run_study_with_workers, subset_study, ExactStudy, FailureRate,
    StudyReport,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub procedure: Procedure,
    /// Runs drawn per cell for selection.
    pub n_tune: usize,
    /// Runs drawn per chosen cell for the reported scores.
    pub n_eval: usize,
    pub n_experiments: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset_size: Option<usize>,
    pub master_seed: u64,
    #[serde(default)]
    pub pooling_policy: PoolingPolicy,
    #[serde(default = "default_level")]
    pub confidence_level: f64,
    /// Bootstrap resamples for the interval of each mean. Zero skips them.
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
}

fn default_level() -> f64 {
    0.95
}

fn default_n_boot() -> usize {
    1000
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            procedure: Procedure::Chs,
            n_tune: 3,
            n_eval: 50,
            n_experiments: 1000,
            subset_size: None,
            master_seed: 0,
            pooling_policy: PoolingPolicy::default(),
            confidence_level: default_level(),
            n_boot: default_n_boot(),
        }
    }
}

impl ExperimentConfig {
    /// Checks the config on its own and against `ds`.
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_tune == 0 || self.n_eval == 0 || self.n_experiments == 0 {
            return bad("n_tune, n_eval and n_experiments must be positive".into());
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return bad(format!(
                "confidence_level {} not in (0, 1)",
                self.confidence_level
            ));
        }
        match (self.procedure, self.subset_size) {
            (Procedure::SubsetChs, None) => bad("subset-chs needs subset_size".into()),
            (Procedure::SubsetChs, Some(0)) => bad("subset_size must be positive".into()),
            (Procedure::SubsetChs, Some(k)) if k > ds.n_environments() => bad(format!(
                "subset_size {k} exceeds the {} environments",
                ds.n_environments()
            )),
            (Procedure::SubsetChs, Some(_)) => Ok(()),
            (p, Some(_)) => bad(format!("subset_size only applies to subset-chs, not {p}")),
            (_, None) => Ok(()),
        }
    }
}

/// Rankings computed from every run of every cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub procedure: Procedure,
    pub selections: Vec<SelectionResult>,
    /// Algorithm -> environment -> normalized mean of the chosen cell.
    pub scores: BTreeMap<String, BTreeMap<String, f64>>,
    pub overall: BTreeMap<String, f64>,
    pub overall_ranking: Vec<String>,
    pub per_environment_ranking: BTreeMap<String, Vec<String>>,
}

/// One simulated study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub index: u64,
    pub selections: Vec<SelectionResult>,
    /// Algorithm -> environment -> normalized mean over the evaluation draws.
    pub eval_scores: BTreeMap<String, BTreeMap<String, f64>>,
    pub overall: BTreeMap<String, f64>,
    pub ranking: Vec<String>,
    /// Environments used for tuning.
    pub tuning_envs: Vec<String>,
}

/// Index-level outcome used by the study aggregators.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RawOutcome {
    pub choices: Vec<Choice>,
    /// `[algorithm][environment]`
    pub eval: Vec<Vec<f64>>,
    pub overall: Vec<f64>,
    pub ranking: Vec<usize>,
    pub subset: Vec<usize>,
}

/// Algorithm indices sorted by descending score; ties keep index order.
pub(crate) fn rank_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

pub(crate) fn env_column(eval: &[Vec<f64>], env: usize) -> Vec<f64> {
    eval.iter().map(|row| row[env]).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean of a per-experiment quantity with two intervals: `interval` covers
/// the central `level` mass of the experiments, `mean_interval` is a
/// bootstrap interval for the mean itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub mean: f64,
    pub interval: Interval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_interval: Option<Interval>,
}

/// Summary of per-experiment values. Bootstrap draws come from a stream
/// keyed by `stream` outside the experiment index range.
pub(crate) fn summarize(
    xs: &[f64],
    level: f64,
    n_boot: usize,
    master_seed: u64,
    stream: u64,
) -> Result<ScoreSummary> {
    let m = mean(xs);
    if xs.len() < 2 {
        return Ok(ScoreSummary {
            mean: m,
            interval: Interval::point(m, level),
            mean_interval: (n_boot > 0).then(|| Interval::point(m, level)),
        });
    }
    let mean_interval = if n_boot > 0 {
        let key = StreamKey::new(Phase::Bootstrap, stream);
        let mut rng = stream_rng(master_seed, u64::MAX, key);
        Some(percentile_ci(xs, level, n_boot, &mut rng)?)
    } else {
        None
    };
    Ok(ScoreSummary {
        mean: m,
        interval: spread_interval(xs, level),
        mean_interval,
    })
}

/// Draws `n` runs of `cell` with replacement from its own stream.
pub(crate) fn draw_cell<D: DrawSource>(
    ds: &Dataset,
    src: &mut D,
    phase: Phase,
    cell: CellId,
    n: usize,
) -> Vec<f64> {
    let scores = ds.cell(cell);
    let key = StreamKey::new(phase, cell.0 as u64);
    (0..n)
        .map(|_| scores[src.draw(key, scores.len())])
        .collect()
}

pub(crate) fn tuning_sample<D: DrawSource>(ds: &Dataset, src: &mut D, n: usize) -> CellSamples {
    let mut tune = CellSamples::empty(ds);
    for c in 0..ds.n_cells() {
        tune.set(CellId(c), draw_cell(ds, src, Phase::Tune, CellId(c), n));
    }
    tune
}

/// Shared state of a study: the dataset and its full-data pools.
pub(crate) struct Engine<'a> {
    pub ds: &'a Dataset,
    pub cfg: &'a ExperimentConfig,
    pub full: NormalizedView<'a>,
    all_envs: Vec<usize>,
}

impl<'a> Engine<'a> {
    pub fn new(ds: &'a Dataset, cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate(ds)?;
        Ok(Self {
            ds,
            cfg,
            full: build_pools(ds, PoolingPolicy::FullDataset, None)?,
            all_envs: (0..ds.n_environments()).collect(),
        })
    }

    fn draw_subset<D: DrawSource>(&self, src: &mut D, k: usize) -> Vec<usize> {
        let mut envs = self.all_envs.clone();
        let n = envs.len();
        let key = StreamKey::new(Phase::Subset, 0);
        for i in 0..k {
            let j = i + src.draw(key, n - i);
            envs.swap(i, j);
        }
        envs.truncate(k);
        envs.sort_unstable();
        envs
    }

    pub fn run<D: DrawSource>(&self, src: &mut D) -> Result<RawOutcome> {
        let ds = self.ds;
        let cfg = self.cfg;
        let tune = tuning_sample(ds, src, cfg.n_tune);
        let local;
        let view = match cfg.pooling_policy {
            PoolingPolicy::FullDataset => &self.full,
            PoolingPolicy::ProvidedSubsample => {
                local = build_pools(ds, PoolingPolicy::ProvidedSubsample, Some(&tune))?;
                &local
            }
        };
        let subset = match (cfg.procedure, cfg.subset_size) {
            (Procedure::SubsetChs, Some(k)) => self.draw_subset(src, k),
            _ => self.all_envs.clone(),
        };
        let mut choices = Vec::with_capacity(ds.n_algorithms());
        let mut eval = Vec::with_capacity(ds.n_algorithms());
        for a in 0..ds.n_algorithms() {
            let choice = choose(cfg.procedure, view, a, &subset, &tune)?;
            let row: Vec<f64> = (0..ds.n_environments())
                .map(|e| {
                    let cell = ds.cell_id(a, choice.settings[e], e);
                    let xs = draw_cell(ds, src, Phase::Eval, cell, cfg.n_eval);
                    self.full.pool(e).mean_cdf(&xs)
                })
                .collect();
            choices.push(choice);
            eval.push(row);
        }
        let overall: Vec<f64> = eval.iter().map(|r| mean(r)).collect();
        Ok(RawOutcome {
            ranking: rank_desc(&overall),
            choices,
            eval,
            overall,
            subset,
        })
    }

    pub fn experiment(&self, index: u64) -> Result<RawOutcome> {
        self.run(&mut KeyedStreams::new(self.cfg.master_seed, index))
    }

    pub fn outcome(&self, index: u64, raw: &RawOutcome) -> ExperimentOutcome {
        let ds = self.ds;
        let algs = ds.algorithms();
        let envs = ds.environments();
        let selections = raw
            .choices
            .iter()
            .enumerate()
            .map(|(a, c)| to_result(ds, self.cfg.procedure, a, c, None))
            .collect();
        ExperimentOutcome {
            index,
            selections,
            eval_scores: named_table(ds, &raw.eval),
            overall: algs
                .iter()
                .cloned()
                .zip(raw.overall.iter().copied())
                .collect(),
            ranking: raw.ranking.iter().map(|&a| algs[a].clone()).collect(),
            tuning_envs: raw.subset.iter().map(|&e| envs[e].clone()).collect(),
        }
    }
}

pub(crate) fn named_table(ds: &Dataset, t: &[Vec<f64>]) -> BTreeMap<String, BTreeMap<String, f64>> {
    ds.algorithms()
        .iter()
        .zip(t)
        .map(|(a, row)| {
            (
                a.clone(),
                ds.environments()
                    .iter()
                    .cloned()
                    .zip(row.iter().copied())
                    .collect(),
            )
        })
        .collect()
}

/// Index-level ground truth.
#[derive(Clone, Debug)]
pub(crate) struct Truth {
    pub choices: Vec<Choice>,
    pub scores: Vec<Vec<f64>>,
    pub ranking: Vec<usize>,
    pub env_rankings: Vec<Vec<usize>>,
    /// `positions[a]` is the place of algorithm `a` in `ranking`.
    pub positions: Vec<usize>,
    pub env_positions: Vec<Vec<usize>>,
}

fn positions(ranking: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; ranking.len()];
    for (i, &a) in ranking.iter().enumerate() {
        pos[a] = i;
    }
    pos
}

/// Subset tuning is judged against the all-environment CHS ordering.
pub(crate) fn truth_procedure(p: Procedure) -> Procedure {
    match p {
        Procedure::SubsetChs => Procedure::Chs,
        p => p,
    }
}

pub(crate) fn truth(view: &NormalizedView<'_>, procedure: Procedure) -> Result<Truth> {
    let ds = view.dataset();
    let full = CellSamples::full(ds);
    let envs: Vec<usize> = (0..ds.n_environments()).collect();
    let procedure = truth_procedure(procedure);
    let mut choices = Vec::new();
    let mut scores = Vec::new();
    for a in 0..ds.n_algorithms() {
        let c = choose(procedure, view, a, &envs, &full)?;
        scores.push(
            envs.iter()
                .map(|&e| {
                    let cell = ds.cell_id(a, c.settings[e], e);
                    view.cell_mean(cell, ds.cell(cell))
                })
                .collect::<Vec<_>>(),
        );
        choices.push(c);
    }
    let overall: Vec<f64> = scores.iter().map(|r| mean(r)).collect();
    let ranking = rank_desc(&overall);
    let env_rankings: Vec<Vec<usize>> = envs
        .iter()
        .map(|&e| rank_desc(&env_column(&scores, e)))
        .collect();
    Ok(Truth {
        positions: positions(&ranking),
        env_positions: env_rankings.iter().map(|r| positions(r)).collect(),
        ranking,
        env_rankings,
        choices,
        scores,
    })
}

/// Selects per `procedure` with all runs and full pools, then scores the
/// chosen cells on all runs.
pub fn ground_truth(ds: &Dataset, procedure: Procedure) -> Result<GroundTruth> {
    let view = build_pools(ds, PoolingPolicy::FullDataset, None)?;
    let t = truth(&view, procedure)?;
    Ok(describe_truth(ds, truth_procedure(procedure), &t))
}

pub(crate) fn describe_truth(ds: &Dataset, procedure: Procedure, t: &Truth) -> GroundTruth {
    let algs = ds.algorithms();
    let envs = ds.environments();
    let names = |r: &[usize]| r.iter().map(|&a| algs[a].clone()).collect::<Vec<_>>();
    GroundTruth {
        procedure,
        selections: t
            .choices
            .iter()
            .enumerate()
            .map(|(a, c)| to_result(ds, procedure, a, c, None))
            .collect(),
        scores: named_table(ds, &t.scores),
        overall: algs
            .iter()
            .cloned()
            .zip(t.scores.iter().map(|r| mean(r)))
            .collect(),
        overall_ranking: names(&t.ranking),
        per_environment_ranking: envs
            .iter()
            .cloned()
            .zip(t.env_rankings.iter().map(|r| names(r)))
            .collect(),
    }
}

/// Runs experiment `index` of the study described by `cfg`.
pub fn simulate_experiment(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    index: u64,
) -> Result<ExperimentOutcome> {
    let engine = Engine::new(ds, cfg)?;
    let raw = engine.experiment(index)?;
    Ok(engine.outcome(index, &raw))
}
