//! The `chs` command line.

mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

pub use config::{layered, seed_from_env, FileConfig};

use crate::dataset::{load_dataset, write_jsonl, CellSamples, Dataset, Format, HpValue};
use crate::error::Error;
use crate::normalize::{build_pools, PoolingPolicy};
use crate::report::{
    emit_bar_chart, emit_density_chart, emit_sensitivity_curve, fmt_f64, sensitivity_series,
    to_json, write_atomic, BarGroup, OutputDir, RunManifest, SensitivityPoint,
};
use crate::select::{choose, to_result, Procedure, SelectionResult};
use crate::simulate::{
    estimate_bias_with, performance_drop_with, run_study, subset_study, BiasReport, ScoreSummary,
    StudyReport,
};
use crate::stats::{kde, percentile_ci, Interval};
use crate::streams::{stream_rng, Phase, StreamKey};
use crate::synthetic::{generate_dataset, preset, preset_instances, AnalyticOracle};

#[derive(Debug, Parser)]
#[command(
    name = "chs",
    version,
    about = "Cross-environment hyperparameter tuning analysis"
)]
struct Cli {
    /// Worker threads for parallel studies. Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a score file and print a summary.
    IngestCheck(DataArgs),
    /// Per-cell normalized means as CSV.
    Normalize {
        #[command(flatten)]
        data: DataArgs,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select hyperparameters on the full dataset.
    Select {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        procedure: Procedure,
        /// Tuning environments for subset-chs, comma separated.
        #[arg(long, value_delimiter = ',')]
        envs: Vec<String>,
        #[arg(long)]
        algorithm: Option<String>,
    },
    /// Monte Carlo study of a tuning protocol.
    Simulate(StudyArgs),
    /// Study of CHS tuned on random environment subsets.
    SubsetStudy(StudyArgs),
    /// Maximization bias of small-sample tuning.
    Bias(BiasArgs),
    /// Per-environment cost of a single cross-environment setting.
    Drop(DropArgs),
    /// Kernel density of one cell's scores.
    Dist(DistArgs),
    /// Generate a synthetic dataset with its analytic oracle.
    Synth(SynthArgs),
    /// Sensitivity curves and selection summary for a dataset.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Score file (.jsonl or .csv).
    #[arg(long)]
    data: PathBuf,
    /// Overrides the format implied by the extension.
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct Overrides {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    procedure: Option<Procedure>,
    #[arg(long)]
    n_eval: Option<usize>,
    #[arg(long)]
    n_experiments: Option<usize>,
    #[arg(long)]
    subset_size: Option<usize>,
    #[arg(long = "seed")]
    master_seed: Option<u64>,
    #[arg(long)]
    pooling_policy: Option<PoolingPolicy>,
    #[arg(long)]
    confidence_level: Option<f64>,
    #[arg(long)]
    n_boot: Option<usize>,
    #[arg(long)]
    n_reps: Option<usize>,
}

impl Overrides {
    fn flags(&self, n_tune: Option<usize>) -> FileConfig {
        FileConfig {
            procedure: self.procedure,
            n_tune,
            n_eval: self.n_eval,
            n_experiments: self.n_experiments,
            subset_size: self.subset_size,
            master_seed: self.master_seed,
            pooling_policy: self.pooling_policy,
            confidence_level: self.confidence_level,
            n_boot: self.n_boot,
            n_reps: self.n_reps,
        }
    }

    fn resolve(&self, n_tune: Option<usize>) -> Result<FileConfig, Failure> {
        let file = self.config.as_deref().map(FileConfig::load).transpose()?;
        let env = seed_from_env(|k| std::env::var(k).ok())?;
        Ok(layered(file, env, self.flags(n_tune)))
    }
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_tune: Option<usize>,
    #[command(flatten)]
    cfg: Overrides,
}

#[derive(Debug, Args)]
struct BiasArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    /// Tuning sample sizes, comma separated [default: 3,10,30,100].
    #[arg(long, value_delimiter = ',')]
    n_tune: Vec<usize>,
    #[command(flatten)]
    cfg: Overrides,
}

#[derive(Debug, Args)]
struct DropArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_tune: Option<usize>,
    #[command(flatten)]
    cfg: Overrides,
}

#[derive(Debug, Args)]
struct DistArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    algorithm: String,
    #[arg(long)]
    environment: String,
    /// Setting id such as `alpha=0.25`; every setting when omitted.
    #[arg(long)]
    setting: Option<String>,
    /// Silverman's rule when omitted.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = 512)]
    grid: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, required_unless_present = "list")]
    preset: Option<String>,
    /// Print the available presets.
    #[arg(long)]
    list: bool,
    #[arg(long, required_unless_present = "list")]
    out: Option<PathBuf>,
    /// Runs per cell instead of the preset's count.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    /// Hyperparameter on the x axis; the first numeric one when omitted.
    #[arg(long)]
    hp: Option<String>,
    #[command(flatten)]
    cfg: Overrides,
}

#[derive(Debug)]
enum Failure {
    User(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Json(_) => Failure::Internal(e.to_string()),
            _ => Failure::User(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 for user errors, 2 for internal ones.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| match cli.workers {
        Some(0) => Err(Failure::User("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Internal(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| dispatch(cli.command))),
        None => dispatch(cli.command),
    }));
    match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(Failure::User(m))) => {
            eprintln!("error: {m}");
            1
        }
        Ok(Err(Failure::Internal(m))) => {
            eprintln!("internal error: {m}");
            2
        }
        Err(_) => {
            eprintln!("internal error: panic");
            2
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::IngestCheck(d) => ingest_check(&d),
        Command::Normalize { data, out } => normalize(&data, out.as_deref()),
        Command::Select {
            data,
            procedure,
            envs,
            algorithm,
        } => select(&data, procedure, &envs, algorithm.as_deref()),
        Command::Simulate(a) => study(&a, false),
        Command::SubsetStudy(a) => study(&a, true),
        Command::Bias(a) => bias(&a),
        Command::Drop(a) => drop_cmd(&a),
        Command::Dist(a) => dist(&a),
        Command::Synth(a) => synth(&a),
        Command::Report(a) => report(&a),
    }
}

fn load(d: &DataArgs) -> CliResult<Dataset> {
    let format = match d.format {
        Some(f) => f,
        None => Format::from_path(&d.data).ok_or_else(|| {
            Failure::User(format!(
                "{}: cannot tell the format from the extension; pass --format",
                d.data.display()
            ))
        })?,
    };
    load_dataset(&d.data, format).map_err(|e| match e {
        Error::Io { .. } => e.into(),
        other => Failure::User(format!("{}: {other}", d.data.display())),
    })
}

fn stdout_bytes(bytes: &[u8]) -> CliResult<()> {
    std::io::stdout()
        .lock()
        .write_all(bytes)
        .map_err(|e| Failure::Internal(format!("stdout: {e}")))
}

fn finish(
    out: &OutputDir,
    command: &str,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: &[&Path],
    outputs: &[PathBuf],
) -> CliResult<()> {
    let mut m = RunManifest::new(command, config, seed);
    for p in inputs {
        m.add_input(p)?;
    }
    m.add_outputs(out.root(), outputs);
    out.write_manifest(&m)?;
    Ok(())
}

fn ingest_check(d: &DataArgs) -> CliResult<()> {
    let ds = load(d)?;
    let runs: Vec<usize> = (0..ds.n_cells())
        .map(|c| ds.cell(crate::dataset::CellId(c)).len())
        .collect();
    let settings: BTreeMap<&str, usize> = ds
        .algorithms()
        .iter()
        .enumerate()
        .map(|(a, name)| (name.as_str(), ds.settings(a).len()))
        .collect();
    let summary = json!({
        "path": d.data.display().to_string(),
        "records": ds.len(),
        "algorithms": ds.algorithms(),
        "environments": ds.environments(),
        "settings": settings,
        "cells": ds.n_cells(),
        "min_runs_per_cell": runs.iter().min(),
        "max_runs_per_cell": runs.iter().max(),
    });
    stdout_bytes(&to_json(&summary)?)
}

fn normalize(d: &DataArgs, out: Option<&Path>) -> CliResult<()> {
    let ds = load(d)?;
    let view = build_pools(&ds, PoolingPolicy::FullDataset, None)?;
    let rows: Vec<Vec<String>> = (0..ds.n_cells())
        .map(|c| {
            let id = crate::dataset::CellId(c);
            let key = ds.key(id);
            let scores = ds.cell(id);
            vec![
                key.algorithm,
                key.environment,
                key.setting,
                scores.len().to_string(),
                fmt_f64(crate::stats::mean(scores)),
                fmt_f64(view.cell_mean(id, scores)),
            ]
        })
        .collect();
    let bytes = crate::report::csv_bytes(
        &[
            "algorithm",
            "environment",
            "setting",
            "runs",
            "raw_mean",
            "normalized_mean",
        ],
        &rows,
    )?;
    match out {
        Some(p) => Ok(write_atomic(p, &bytes)?),
        None => stdout_bytes(&bytes),
    }
}

fn full_selections(
    ds: &Dataset,
    procedure: Procedure,
    envs: &[String],
    algorithm: Option<&str>,
) -> CliResult<Vec<SelectionResult>> {
    let view = build_pools(ds, PoolingPolicy::FullDataset, None)?;
    let samples = CellSamples::full(ds);
    let env_idx: Vec<usize> = match procedure {
        Procedure::SubsetChs => {
            if envs.is_empty() {
                return Err(Failure::User("subset-chs needs --envs".into()));
            }
            let mut idx = envs
                .iter()
                .map(|e| {
                    ds.environment_index(e)
                        .ok_or_else(|| Failure::User(format!("unknown environment {e}")))
                })
                .collect::<CliResult<Vec<_>>>()?;
            idx.sort_unstable();
            idx.dedup();
            idx
        }
        _ => (0..ds.n_environments()).collect(),
    };
    let algs: Vec<usize> = match algorithm {
        Some(name) => vec![ds
            .algorithm_index(name)
            .ok_or_else(|| Failure::User(format!("unknown algorithm {name}")))?],
        None => (0..ds.n_algorithms()).collect(),
    };
    algs.into_iter()
        .map(|a| {
            let c = choose(procedure, &view, a, &env_idx, &samples)?;
            Ok(to_result(ds, procedure, a, &c, None))
        })
        .collect()
}

fn select(
    d: &DataArgs,
    procedure: Procedure,
    envs: &[String],
    algorithm: Option<&str>,
) -> CliResult<()> {
    let ds = load(d)?;
    let results = full_selections(&ds, procedure, envs, algorithm)?;
    stdout_bytes(&to_json(&results)?)
}

fn summary_row(s: &ScoreSummary) -> [String; 5] {
    let (ml, mu) = s
        .mean_interval
        .map(|i| (fmt_f64(i.lower), fmt_f64(i.upper)))
        .unwrap_or_default();
    [
        fmt_f64(s.mean),
        fmt_f64(s.interval.lower),
        fmt_f64(s.interval.upper),
        ml,
        mu,
    ]
}

fn study(a: &StudyArgs, subset: bool) -> CliResult<()> {
    let ds = load(&a.data)?;
    let mut fc = a.cfg.resolve(a.n_tune)?;
    if subset {
        match fc.procedure {
            None | Some(Procedure::SubsetChs) => fc.procedure = Some(Procedure::SubsetChs),
            Some(p) => {
                return Err(Failure::User(format!(
                    "subset-study runs subset-chs, not {p}"
                )))
            }
        }
    }
    let cfg = fc.experiment();
    let report = if subset {
        subset_study(&ds, &cfg)?
    } else {
        run_study(&ds, &cfg)?
    };
    let out = OutputDir::new(&a.out);
    let mut written = vec![out.write_report(&report)?];
    written.extend(study_tables(&out, &report)?);
    let (svg, csv) = emit_bar_chart(
        &score_groups(&report),
        &format!("{} scores", cfg.procedure),
        "normalized score",
        &out.chart_path("scores"),
    )?;
    written.extend([svg, csv]);
    let command = if subset { "subset-study" } else { "simulate" };
    finish(
        &out,
        command,
        serde_json::to_value(&cfg)?,
        Some(cfg.master_seed),
        &[&a.data.data],
        &written,
    )
}

fn score_groups(r: &StudyReport) -> Vec<BarGroup> {
    let mut groups = Vec::new();
    for env in &r.environments {
        for alg in &r.algorithms {
            let s = &r.per_environment[env][alg];
            groups.push(BarGroup {
                label: format!("{env} / {alg}"),
                value: s.mean,
                interval: s.interval,
            });
        }
    }
    for alg in &r.algorithms {
        let s = &r.overall[alg];
        groups.push(BarGroup {
            label: format!("Overall / {alg}"),
            value: s.mean,
            interval: s.interval,
        });
    }
    groups
}

fn study_tables(out: &OutputDir, r: &StudyReport) -> CliResult<Vec<PathBuf>> {
    let head = ["mean", "lower", "upper", "mean_lower", "mean_upper"];
    let mut paths = Vec::new();

    let mut header = vec!["algorithm"];
    header.extend(head);
    header.push("truth");
    let rows: Vec<Vec<String>> = r
        .overall
        .iter()
        .map(|(alg, s)| {
            let mut row = vec![alg.clone()];
            row.extend(summary_row(s));
            row.push(fmt_f64(r.ground_truth.overall[alg]));
            row
        })
        .collect();
    paths.push(out.write_table("overall", &header, &rows)?);

    let mut header = vec!["environment", "algorithm"];
    header.extend(head);
    header.push("truth");
    let mut rows = Vec::new();
    for (env, per_alg) in &r.per_environment {
        for (alg, s) in per_alg {
            let mut row = vec![env.clone(), alg.clone()];
            row.extend(summary_row(s));
            row.push(fmt_f64(r.ground_truth.scores[alg][env]));
            rows.push(row);
        }
    }
    paths.push(out.write_table("per_environment", &header, &rows)?);

    let truth = r.ground_truth.overall_ranking.join(" > ");
    let rows: Vec<Vec<String>> = r
        .ordering_frequency
        .iter()
        .map(|(k, f)| vec![k.clone(), fmt_f64(*f), (k == &truth).to_string()])
        .collect();
    paths.push(out.write_table("ordering", &["ordering", "frequency", "truth"], &rows)?);

    let f = &r.failure_rate;
    let mut rows = vec![
        vec!["overall".to_string(), fmt_f64(f.overall)],
        vec![
            "overall_standard_error".to_string(),
            fmt_f64(f.standard_error),
        ],
        vec!["any_environment".to_string(), fmt_f64(f.any_environment)],
        vec![
            "mean_pairwise_inversions".to_string(),
            fmt_f64(f.mean_pairwise_inversions),
        ],
    ];
    rows.extend(
        f.per_environment
            .iter()
            .map(|(e, v)| vec![format!("environment:{e}"), fmt_f64(*v)]),
    );
    paths.push(out.write_table("failure", &["metric", "value"], &rows)?);

    let mut rows = Vec::new();
    for (alg, envs) in &r.selection_frequency {
        for (env, settings) in envs {
            for (s, freq) in settings {
                rows.push(vec![alg.clone(), env.clone(), s.clone(), fmt_f64(*freq)]);
            }
        }
    }
    paths.push(out.write_table(
        "selection",
        &["algorithm", "environment", "setting", "frequency"],
        &rows,
    )?);

    if let Some(subsets) = &r.subsets {
        let rows: Vec<Vec<String>> = subsets
            .iter()
            .enumerate()
            .map(|(i, s)| vec![i.to_string(), s.join(";")])
            .collect();
        paths.push(out.write_table("subsets", &["experiment", "environments"], &rows)?);
    }
    Ok(paths)
}

fn bias(a: &BiasArgs) -> CliResult<()> {
    let ds = load(&a.data)?;
    let fc = a.cfg.resolve(None)?;
    let procedure = fc.procedure.unwrap_or(Procedure::Chs);
    let n_tunes = if !a.n_tune.is_empty() {
        a.n_tune.clone()
    } else if let Some(n) = fc.n_tune {
        vec![n]
    } else {
        vec![3, 10, 30, 100]
    };
    let reports = n_tunes
        .iter()
        .map(|&n| Ok(estimate_bias_with(&ds, procedure, &fc.replication(n))?))
        .collect::<CliResult<Vec<BiasReport>>>()?;
    let out = OutputDir::new(&a.out);
    let mut written = vec![out.write_report(&reports)?];

    let mut rows = Vec::new();
    let mut overall = Vec::new();
    for r in &reports {
        for (alg, b) in &r.per_algorithm {
            for (env, v) in &b.per_environment {
                rows.push(vec![
                    r.config.n_tune.to_string(),
                    alg.clone(),
                    env.clone(),
                    b.optimum[env].clone(),
                    fmt_f64(*v),
                    fmt_f64(b.per_environment_raw[env]),
                ]);
            }
            let mut row = vec![r.config.n_tune.to_string(), alg.clone()];
            row.extend(summary_row(&b.overall));
            overall.push(row);
        }
    }
    written.push(out.write_table(
        "bias",
        &[
            "n_tune",
            "algorithm",
            "environment",
            "optimum",
            "bias",
            "bias_raw",
        ],
        &rows,
    )?);
    written.push(out.write_table(
        "bias_overall",
        &[
            "n_tune",
            "algorithm",
            "mean",
            "lower",
            "upper",
            "mean_lower",
            "mean_upper",
        ],
        &overall,
    )?);

    if reports.len() >= 2 {
        let series: Vec<(String, Vec<SensitivityPoint>)> = ds
            .algorithms()
            .iter()
            .map(|alg| {
                let pts = reports
                    .iter()
                    .map(|r| {
                        let s = &r.per_algorithm[alg].overall;
                        SensitivityPoint {
                            x: HpValue::Number(r.config.n_tune as f64),
                            mean: s.mean,
                            interval: s.interval,
                        }
                    })
                    .collect();
                (alg.clone(), pts)
            })
            .collect();
        let (svg, csv) = emit_sensitivity_curve(
            &series,
            &format!("{procedure} tuning bias"),
            "n_tune",
            "normalized bias",
            &out.chart_path("bias"),
        )?;
        written.extend([svg, csv]);
    } else {
        eprintln!("note: one n_tune value, no bias chart");
    }
    let seed = fc.master_seed.unwrap_or(0);
    let config = json!({
        "procedure": procedure,
        "n_tune": n_tunes,
        "replication": reports.first().map(|r| &r.config),
    });
    finish(&out, "bias", config, Some(seed), &[&a.data.data], &written)
}

fn drop_cmd(a: &DropArgs) -> CliResult<()> {
    let ds = load(&a.data)?;
    let fc = a.cfg.resolve(a.n_tune)?;
    let rc = fc.replication(fc.n_tune.unwrap_or(3));
    let report = performance_drop_with(&ds, &rc)?;
    let out = OutputDir::new(&a.out);
    let mut written = vec![out.write_report(&report)?];
    let mut rows = Vec::new();
    let mut by_env: BTreeMap<&str, Vec<BarGroup>> = BTreeMap::new();
    for (alg, d) in &report.per_algorithm {
        for (env, s) in &d.per_environment {
            let mut row = vec![
                alg.clone(),
                env.clone(),
                d.optimum[env].clone(),
                d.chs_optimum.clone(),
            ];
            row.extend(summary_row(s));
            row.push((env == &d.sacrificed).to_string());
            rows.push(row);
            by_env.entry(env).or_default().push(BarGroup {
                label: format!("{env} / {alg}"),
                value: s.mean,
                interval: s.interval,
            });
        }
    }
    written.push(out.write_table(
        "drop",
        &[
            "algorithm",
            "environment",
            "optimum",
            "chs_optimum",
            "mean",
            "lower",
            "upper",
            "mean_lower",
            "mean_upper",
            "sacrificed",
        ],
        &rows,
    )?);
    let groups: Vec<BarGroup> = by_env.into_values().flatten().collect();
    let (svg, csv) = emit_bar_chart(
        &groups,
        "drop from per-environment optimum",
        "normalized drop",
        &out.chart_path("drop"),
    )?;
    written.extend([svg, csv]);
    finish(
        &out,
        "drop",
        serde_json::to_value(&rc)?,
        Some(rc.master_seed),
        &[&a.data.data],
        &written,
    )
}

#[derive(Serialize)]
struct DensitySummary {
    setting: String,
    runs: usize,
    bandwidth: f64,
    bandwidth_rule: String,
    mass: f64,
    modes: Vec<f64>,
}

fn dist(a: &DistArgs) -> CliResult<()> {
    let ds = load(&a.data)?;
    let alg = ds
        .algorithm_index(&a.algorithm)
        .ok_or_else(|| Failure::User(format!("unknown algorithm {}", a.algorithm)))?;
    let env = ds
        .environment_index(&a.environment)
        .ok_or_else(|| Failure::User(format!("unknown environment {}", a.environment)))?;
    let settings: Vec<usize> = match &a.setting {
        Some(id) => vec![ds.setting_index(alg, id).ok_or_else(|| {
            let known: Vec<&str> = ds.settings(alg).iter().map(|s| s.id()).collect();
            Failure::User(format!("unknown setting {id}; known: {}", known.join(", ")))
        })?],
        None => (0..ds.settings(alg).len()).collect(),
    };
    let mut curves = Vec::new();
    let mut summaries = Vec::new();
    for s in settings {
        let scores = ds.cell(ds.cell_id(alg, s, env));
        let c = kde(scores, a.bandwidth, a.grid)?;
        let id = ds.settings(alg)[s].id().to_string();
        summaries.push(DensitySummary {
            setting: id.clone(),
            runs: scores.len(),
            bandwidth: c.bandwidth,
            bandwidth_rule: c.bandwidth_rule.clone(),
            mass: c.mass(),
            modes: c.local_maxima(),
        });
        curves.push((id, c));
    }
    let out = OutputDir::new(&a.out);
    let mut written = vec![out.write_report(&json!({
        "algorithm": a.algorithm,
        "environment": a.environment,
        "grid": a.grid,
        "curves": summaries,
    }))?];
    let rows: Vec<Vec<String>> = curves
        .iter()
        .flat_map(|(id, c)| {
            c.xs.iter()
                .zip(&c.ys)
                .map(move |(x, y)| vec![id.clone(), fmt_f64(*x), fmt_f64(*y)])
        })
        .collect();
    written.push(out.write_table("density", &["setting", "x", "y"], &rows)?);
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .flat_map(|s| {
            s.modes.iter().map(move |m| {
                vec![
                    s.setting.clone(),
                    fmt_f64(*m),
                    fmt_f64(s.bandwidth),
                    s.bandwidth_rule.clone(),
                ]
            })
        })
        .collect();
    written.push(out.write_table(
        "modes",
        &["setting", "mode", "bandwidth", "bandwidth_rule"],
        &rows,
    )?);
    let (svg, csv) = emit_density_chart(
        &curves,
        &format!("{} on {}", a.algorithm, a.environment),
        &out.chart_path("density"),
    )?;
    written.extend([svg, csv]);
    let config = json!({
        "algorithm": a.algorithm,
        "environment": a.environment,
        "setting": a.setting,
        "bandwidth": a.bandwidth,
        "grid": a.grid,
    });
    finish(&out, "dist", config, None, &[&a.data.data], &written)
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    if a.list {
        let mut text = String::new();
        for p in preset_instances() {
            text.push_str(&format!("{}\t{}\n", p.name, p.description));
        }
        return stdout_bytes(text.as_bytes());
    }
    let (Some(name), Some(dir)) = (&a.preset, &a.out) else {
        return Err(Failure::User("synth needs --preset and --out".into()));
    };
    let mut p = preset(name)?;
    if let Some(r) = a.runs {
        p.spec.runs_per_cell = r;
    }
    if let Some(s) = a.seed {
        p.spec.seed = s;
    }
    let ds = generate_dataset(&p.spec)?;
    let oracle = AnalyticOracle::new(&p.spec)?;
    let mut data = Vec::new();
    write_jsonl(&ds, &mut data).map_err(|e| Failure::Internal(e.to_string()))?;
    let out = OutputDir::new(dir);
    let data_path = dir.join(format!("{}.jsonl", p.name));
    let oracle_path = dir.join(format!("{}.oracle.json", p.name));
    write_atomic(&data_path, &data)?;
    write_atomic(&oracle_path, &to_json(&oracle)?)?;
    let config = json!({
        "preset": p.name,
        "runs_per_cell": p.spec.runs_per_cell,
        "seed": p.spec.seed,
    });
    finish(
        &out,
        "synth",
        config,
        Some(p.spec.seed),
        &[],
        &[data_path, oracle_path],
    )
}

fn default_hp(ds: &Dataset) -> Option<String> {
    let first = ds.settings(0).first()?;
    first
        .entries()
        .iter()
        .map(|(name, _)| name)
        .find(|name| {
            (0..ds.n_algorithms()).all(|a| {
                ds.settings(a)
                    .iter()
                    .all(|s| s.get(name).and_then(HpValue::as_f64).is_some())
            })
        })
        .cloned()
}

fn report(a: &ReportArgs) -> CliResult<()> {
    let ds = load(&a.data)?;
    let fc = a.cfg.resolve(None)?;
    let level = fc.confidence_level.unwrap_or(0.95);
    let n_boot = fc.n_boot.unwrap_or(1000);
    let seed = fc.master_seed.unwrap_or(0);
    let out = OutputDir::new(&a.out);
    let mut written = Vec::new();
    let view = build_pools(&ds, PoolingPolicy::FullDataset, None)?;

    let hp = a.hp.clone().or_else(|| default_hp(&ds));
    match &hp {
        Some(hp) => {
            for alg in ds.algorithms() {
                let series = sensitivity_series(&view, alg, hp, level, n_boot, seed)?;
                if series.iter().any(|(_, pts)| pts.len() < 2) {
                    eprintln!("note: {alg} has fewer than two values of {hp}, no curve");
                    continue;
                }
                let (svg, csv) = emit_sensitivity_curve(
                    &series,
                    &format!("{alg} sensitivity to {hp}"),
                    hp,
                    "normalized score",
                    &out.chart_path(&format!("sensitivity_{alg}")),
                )?;
                written.extend([svg, csv]);
            }
        }
        None => eprintln!("note: no numeric hyperparameter shared by every setting, no curves"),
    }

    let mut selections = BTreeMap::new();
    let mut rows = Vec::new();
    for p in [Procedure::Chs, Procedure::WorstCase, Procedure::PerEnv] {
        let results = full_selections(&ds, p, &[], None)?;
        for r in &results {
            for (env, s) in &r.chosen {
                rows.push(vec![
                    p.to_string(),
                    r.algorithm.clone(),
                    env.clone(),
                    s.id().to_string(),
                    r.per_env_scores
                        .get(env)
                        .map(|v| fmt_f64(*v))
                        .unwrap_or_default(),
                ]);
            }
        }
        selections.insert(p.to_string(), results);
    }
    written.push(out.write_table(
        "selection",
        &["procedure", "algorithm", "environment", "setting", "score"],
        &rows,
    )?);

    let mut groups = Vec::new();
    let mut overall = Vec::new();
    let mut stream = 0u64;
    for (e, env) in ds.environments().iter().enumerate() {
        for (a_idx, r) in selections["chs"].iter().enumerate() {
            let s = ds
                .setting_index(a_idx, r.chosen[env].id())
                .expect("chosen setting exists");
            let pool = view.pool(e);
            let per_run: Vec<f64> = ds
                .cell(ds.cell_id(a_idx, s, e))
                .iter()
                .map(|&x| pool.cdf(x))
                .collect();
            let m = crate::stats::mean(&per_run);
            let interval = if per_run.len() >= 2 && n_boot > 0 {
                let mut rng = stream_rng(seed, 0, StreamKey::new(Phase::Report, stream));
                percentile_ci(&per_run, level, n_boot, &mut rng)?
            } else {
                Interval::point(m, level)
            };
            stream += 1;
            groups.push(BarGroup {
                label: format!("{env} / {}", r.algorithm),
                value: m,
                interval,
            });
        }
    }
    for (a_idx, r) in selections["chs"].iter().enumerate() {
        let vals: Vec<f64> = groups
            .iter()
            .skip(a_idx)
            .step_by(ds.n_algorithms())
            .map(|g| g.value)
            .collect();
        let m = crate::stats::mean(&vals);
        overall.push(BarGroup {
            label: format!("Overall / {}", r.algorithm),
            value: m,
            interval: Interval::point(m, level),
        });
    }
    groups.extend(overall);
    let (svg, csv) = emit_bar_chart(
        &groups,
        "chs selections on all runs",
        "normalized score",
        &out.chart_path("chs_scores"),
    )?;
    written.extend([svg, csv]);
    written.insert(
        0,
        out.write_report(&json!({ "hp": hp, "selections": selections }))?,
    );
    let config = json!({
        "hp": hp,
        "confidence_level": level,
        "n_boot": n_boot,
        "master_seed": seed,
    });
    finish(
        &out,
        "report",
        config,
        Some(seed),
        &[&a.data.data],
        &written,
    )
}
