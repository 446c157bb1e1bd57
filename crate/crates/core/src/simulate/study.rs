use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    describe_truth, summarize, truth, truth_procedure, Engine, ExperimentConfig, GroundTruth,
    RawOutcome, ScoreSummary, Truth,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::select::Procedure;
use crate::streams::Enumerator;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRate {
    /// Fraction of experiments whose overall ranking differs from the truth.
    pub overall: f64,
    pub standard_error: f64,
    /// Fraction with at least one pairwise inversion in that environment.
    pub per_environment: BTreeMap<String, f64>,
    /// Fraction with an inversion in at least one environment.
    pub any_environment: f64,
    pub mean_pairwise_inversions: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: ExperimentConfig,
    pub algorithms: Vec<String>,
    pub environments: Vec<String>,
    pub ground_truth: GroundTruth,
    /// Algorithm -> overall score.
    pub overall: BTreeMap<String, ScoreSummary>,
    /// Environment -> algorithm -> score.
    pub per_environment: BTreeMap<String, BTreeMap<String, ScoreSummary>>,
    /// `"A > B > C"` -> fraction of experiments.
    pub ordering_frequency: BTreeMap<String, f64>,
    pub failure_rate: FailureRate,
    /// Algorithm -> environment -> setting id -> fraction of experiments.
    pub selection_frequency: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
    /// Tuning environments of every experiment, for subset tuning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsets: Option<Vec<Vec<String>>>,
}

pub(crate) fn ordering_key(ds: &Dataset, ranking: &[usize]) -> String {
    ranking
        .iter()
        .map(|&a| ds.algorithms()[a].as_str())
        .collect::<Vec<_>>()
        .join(" > ")
}

struct Verdict {
    overall: bool,
    inversions: usize,
    per_env: Vec<bool>,
}

/// Pairs ordered differently by a stable descending sort of `score` and by
/// the truth `pos`.
fn inversions(n: usize, score: impl Fn(usize) -> f64, pos: &[usize]) -> usize {
    let mut count = 0;
    for a in 0..n {
        for b in a + 1..n {
            if (score(a) >= score(b)) != (pos[a] < pos[b]) {
                count += 1;
            }
        }
    }
    count
}

fn judge(t: &Truth, raw: &RawOutcome) -> Verdict {
    let n = raw.overall.len();
    let per_env = t
        .env_positions
        .iter()
        .enumerate()
        .map(|(e, pos)| inversions(n, |a| raw.eval[a][e], pos) > 0)
        .collect();
    let inv = inversions(n, |a| raw.overall[a], &t.positions);
    Verdict {
        overall: inv > 0,
        inversions: inv,
        per_env,
    }
}

fn collect(engine: &Engine<'_>, workers: Option<usize>) -> Result<Vec<RawOutcome>> {
    let n = engine.cfg.n_experiments as u64;
    let job = || {
        (0..n)
            .into_par_iter()
            .map(|i| engine.experiment(i))
            .collect::<Result<Vec<_>>>()
    };
    match workers {
        None => job(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::arg(format!("thread pool: {e}")))?
            .install(job),
    }
}

/// Runs `cfg.n_experiments` simulated experiments and aggregates them.
pub fn run_study(ds: &Dataset, cfg: &ExperimentConfig) -> Result<StudyReport> {
    run_study_with_workers(ds, cfg, None)
}

/// [`run_study`] on a dedicated pool of `workers` threads. The report does
/// not depend on the worker count.
pub fn run_study_with_workers(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<StudyReport> {
    let engine = Engine::new(ds, cfg)?;
    let t = truth(&engine.full, cfg.procedure)?;
    let outcomes = collect(&engine, workers)?;
    aggregate(&engine, &t, &outcomes)
}

fn aggregate(engine: &Engine<'_>, t: &Truth, outcomes: &[RawOutcome]) -> Result<StudyReport> {
    let ds = engine.ds;
    let cfg = engine.cfg;
    let algs = ds.algorithms();
    let envs = ds.environments();
    let (n_alg, n_env) = (algs.len(), envs.len());
    let n = outcomes.len() as f64;

    let mut overall = BTreeMap::new();
    for a in 0..n_alg {
        let xs: Vec<f64> = outcomes.iter().map(|o| o.overall[a]).collect();
        overall.insert(
            algs[a].clone(),
            summarize(
                &xs,
                cfg.confidence_level,
                cfg.n_boot,
                cfg.master_seed,
                a as u64,
            )?,
        );
    }
    let mut per_environment = BTreeMap::new();
    for e in 0..n_env {
        let mut row = BTreeMap::new();
        for a in 0..n_alg {
            let xs: Vec<f64> = outcomes.iter().map(|o| o.eval[a][e]).collect();
            let stream = (n_alg + e * n_alg + a) as u64;
            row.insert(
                algs[a].clone(),
                summarize(
                    &xs,
                    cfg.confidence_level,
                    cfg.n_boot,
                    cfg.master_seed,
                    stream,
                )?,
            );
        }
        per_environment.insert(envs[e].clone(), row);
    }

    let mut ordering_frequency: BTreeMap<String, f64> = BTreeMap::new();
    let mut failures = 0usize;
    let mut inversions = 0usize;
    let mut env_failures = vec![0usize; n_env];
    let mut any_env = 0usize;
    let mut picks = vec![vec![vec![0usize; 0]; n_env]; n_alg];
    for a in 0..n_alg {
        for row in picks[a].iter_mut() {
            *row = vec![0; ds.settings(a).len()];
        }
    }
    for o in outcomes {
        *ordering_frequency
            .entry(ordering_key(ds, &o.ranking))
            .or_default() += 1.0 / n;
        let v = judge(t, o);
        failures += v.overall as usize;
        inversions += v.inversions;
        for (e, &f) in v.per_env.iter().enumerate() {
            env_failures[e] += f as usize;
        }
        any_env += v.per_env.iter().any(|&f| f) as usize;
        for (a, c) in o.choices.iter().enumerate() {
            for (e, &s) in c.settings.iter().enumerate() {
                picks[a][e][s] += 1;
            }
        }
    }
    let p = failures as f64 / n;
    let failure_rate = FailureRate {
        overall: p,
        standard_error: (p * (1.0 - p) / n).sqrt(),
        per_environment: envs
            .iter()
            .cloned()
            .zip(env_failures.iter().map(|&f| f as f64 / n))
            .collect(),
        any_environment: any_env as f64 / n,
        mean_pairwise_inversions: inversions as f64 / n,
    };
    let selection_frequency = (0..n_alg)
        .map(|a| {
            let per_env = (0..n_env)
                .map(|e| {
                    let freq = picks[a][e]
                        .iter()
                        .enumerate()
                        .filter(|(_, &k)| k > 0)
                        .map(|(s, &k)| (ds.settings(a)[s].id().to_string(), k as f64 / n))
                        .collect();
                    (envs[e].clone(), freq)
                })
                .collect();
            (algs[a].clone(), per_env)
        })
        .collect();
    let subsets = (cfg.procedure == Procedure::SubsetChs).then(|| {
        outcomes
            .iter()
            .map(|o| o.subset.iter().map(|&e| envs[e].clone()).collect())
            .collect()
    });
    Ok(StudyReport {
        config: cfg.clone(),
        algorithms: algs.to_vec(),
        environments: envs.to_vec(),
        ground_truth: describe_truth(ds, truth_procedure(cfg.procedure), t),
        overall,
        per_environment,
        ordering_frequency,
        failure_rate,
        selection_frequency,
        subsets,
    })
}

/// [`run_study`] with subset tuning; every experiment draws a fresh subset
/// of `cfg.subset_size` environments.
pub fn subset_study(ds: &Dataset, cfg: &ExperimentConfig) -> Result<StudyReport> {
    if cfg.procedure != Procedure::SubsetChs || cfg.subset_size.is_none() {
        return Err(Error::config(
            "subset study needs procedure subset-chs and subset_size",
        ));
    }
    run_study(ds, cfg)
}

/// Exact probabilities over every possible resampling outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactStudy {
    pub overall_failure: f64,
    pub per_environment_failure: BTreeMap<String, f64>,
    pub ordering_probability: BTreeMap<String, f64>,
    pub mean_pairwise_inversions: f64,
    /// Number of draw sequences visited.
    pub paths: u64,
}

/// Walks every draw sequence of one experiment and sums path probabilities.
/// Fails once more than `max_paths` sequences would be needed.
pub fn exact_study(ds: &Dataset, cfg: &ExperimentConfig, max_paths: u64) -> Result<ExactStudy> {
    let engine = Engine::new(ds, cfg)?;
    let t = truth(&engine.full, cfg.procedure)?;
    let n_env = ds.n_environments();
    let mut en = Enumerator::new();
    let mut paths = 0u64;
    let mut overall = 0.0;
    let mut inversions = 0.0;
    let mut per_env = vec![0.0; n_env];
    let mut ordering: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    loop {
        paths += 1;
        if paths > max_paths {
            return Err(Error::arg(format!(
                "enumeration needs more than {max_paths} paths"
            )));
        }
        en.begin();
        let raw = engine.run(&mut en)?;
        let p = en.path_probability();
        let v = judge(&t, &raw);
        if v.overall {
            overall += p;
        }
        inversions += p * v.inversions as f64;
        for (e, &f) in v.per_env.iter().enumerate() {
            if f {
                per_env[e] += p;
            }
        }
        match ordering.get_mut(&raw.ranking) {
            Some(q) => *q += p,
            None => {
                ordering.insert(raw.ranking.clone(), p);
            }
        }
        if !en.advance() {
            break;
        }
    }
    Ok(ExactStudy {
        overall_failure: overall,
        per_environment_failure: ds.environments().iter().cloned().zip(per_env).collect(),
        ordering_probability: ordering
            .into_iter()
            .map(|(r, p)| (ordering_key(ds, &r), p))
            .collect(),
        mean_pairwise_inversions: inversions,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetBuilder, HpValue, HyperparameterSetting};

    fn th(i: usize) -> HyperparameterSetting {
        HyperparameterSetting::new(vec![("k".into(), HpValue::Number(i as f64))]).unwrap()
    }

    fn overlap() -> Dataset {
        let mut b = DatasetBuilder::new();
        let cells: [(&str, usize, &str, [f64; 2]); 8] = [
            ("A", 0, "X", [0.0, 10.0]),
            ("A", 1, "X", [4.0, 5.0]),
            ("A", 0, "Y", [1.0, 2.0]),
            ("A", 1, "Y", [0.5, 9.0]),
            ("B", 0, "X", [3.0, 6.0]),
            ("B", 1, "X", [2.0, 7.0]),
            ("B", 0, "Y", [1.5, 8.0]),
            ("B", 1, "Y", [3.0, 4.0]),
        ];
        for (a, s, e, v) in cells {
            b.push_cell(a, e, &th(s), 0..2, v).unwrap();
        }
        b.finish().unwrap()
    }

    #[test]
    fn frequencies_sum_to_one() {
        let ds = overlap();
        let cfg = ExperimentConfig {
            n_tune: 1,
            n_eval: 1,
            n_experiments: 300,
            n_boot: 50,
            ..Default::default()
        };
        let r = run_study(&ds, &cfg).unwrap();
        let total: f64 = r.ordering_frequency.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!((0.0..=1.0).contains(&r.failure_rate.overall));
        for per_env in r.selection_frequency.values() {
            for f in per_env.values() {
                assert!((f.values().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_experiment_gives_points() {
        let ds = overlap();
        let cfg = ExperimentConfig {
            n_experiments: 1,
            ..Default::default()
        };
        let r = run_study(&ds, &cfg).unwrap();
        for s in r.overall.values() {
            assert_eq!(s.interval.width(), 0.0);
            assert_eq!(s.interval.lower, s.mean);
        }
    }

    #[test]
    fn exact_probabilities_sum_to_one() {
        let ds = overlap();
        let cfg = ExperimentConfig {
            n_tune: 1,
            n_eval: 1,
            ..Default::default()
        };
        let ex = exact_study(&ds, &cfg, 1 << 20).unwrap();
        let total: f64 = ex.ordering_probability.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(ex.overall_failure > 0.0 && ex.overall_failure < 1.0);
        assert!(exact_study(&ds, &cfg, 10).is_err());
    }

    #[test]
    fn worker_count_does_not_matter() {
        let ds = overlap();
        let cfg = ExperimentConfig {
            n_experiments: 200,
            n_boot: 20,
            ..Default::default()
        };
        let a = run_study_with_workers(&ds, &cfg, Some(1)).unwrap();
        let b = run_study_with_workers(&ds, &cfg, Some(4)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn subset_study_checks_procedure() {
        let ds = overlap();
        assert!(subset_study(&ds, &ExperimentConfig::default()).is_err());
        let cfg = ExperimentConfig {
            procedure: Procedure::SubsetChs,
            subset_size: Some(1),
            n_experiments: 20,
            ..Default::default()
        };
        let r = subset_study(&ds, &cfg).unwrap();
        assert_eq!(r.subsets.unwrap().len(), 20);
    }
}
