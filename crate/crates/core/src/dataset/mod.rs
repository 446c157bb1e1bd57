//! Experiment-result data model.
//!
//! A [`Dataset`] is a complete grid of cells: every algorithm covers every
//! environment, and every hyperparameter setting of an algorithm covers every
//! environment. Each cell holds one or more raw scores in insertion order.
//! Algorithms, environments and settings are kept sorted by id, so dense
//! indices are stable across loads of the same data.

mod ingest;
mod setting;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ingest::{load_dataset, read_csv, read_jsonl, write_csv, write_jsonl, Format};
pub use setting::{HpValue, HyperparameterSetting};

/// One observed performance sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub algorithm: String,
    pub environment: String,
    pub setting: HyperparameterSetting,
    pub run: u64,
    pub score: f64,
}

/// String-level address of a cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub algorithm: String,
    pub environment: String,
    pub setting: String,
}

impl CellKey {
    pub fn new(
        algorithm: impl Into<String>,
        environment: impl Into<String>,
        setting: impl Into<String>,
    ) -> Result<Self> {
        let key = Self {
            algorithm: algorithm.into(),
            environment: environment.into(),
            setting: setting.into(),
        };
        if key.algorithm.is_empty() || key.environment.is_empty() || key.setting.is_empty() {
            return Err(Error::arg(format!(
                "cell key has an empty component: {key}"
            )));
        }
        Ok(key)
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.algorithm, self.environment, self.setting
        )
    }
}

/// Dense index of a cell inside one [`Dataset`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub usize);

/// Dense coordinates of a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellCoord {
    pub algorithm: usize,
    pub setting: usize,
    pub environment: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Cell {
    runs: Vec<u64>,
    scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    algorithms: Vec<String>,
    environments: Vec<String>,
    settings: Vec<Vec<HyperparameterSetting>>,
    cell_base: Vec<usize>,
    cells: Vec<Cell>,
    // insertion order, run-length encoded as (cell, count)
    order: Vec<(CellId, usize)>,
}

impl Dataset {
    pub fn algorithms(&self) -> &[String] {
        &self.algorithms
    }

    pub fn environments(&self) -> &[String] {
        &self.environments
    }

    pub fn settings(&self, algorithm: usize) -> &[HyperparameterSetting] {
        &self.settings[algorithm]
    }

    pub fn n_algorithms(&self) -> usize {
        self.algorithms.len()
    }

    pub fn n_environments(&self) -> usize {
        self.environments.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Total number of records.
    pub fn len(&self) -> usize {
        self.cells.iter().map(|c| c.scores.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn algorithm_index(&self, id: &str) -> Option<usize> {
        self.algorithms
            .binary_search_by(|a| a.as_str().cmp(id))
            .ok()
    }

    pub fn environment_index(&self, id: &str) -> Option<usize> {
        self.environments
            .binary_search_by(|e| e.as_str().cmp(id))
            .ok()
    }

    pub fn setting_index(&self, algorithm: usize, setting_id: &str) -> Option<usize> {
        self.settings[algorithm]
            .binary_search_by(|s| s.id().cmp(setting_id))
            .ok()
    }

    pub fn cell_id(&self, algorithm: usize, setting: usize, environment: usize) -> CellId {
        debug_assert!(setting < self.settings[algorithm].len());
        CellId(self.cell_base[algorithm] + setting * self.environments.len() + environment)
    }

    pub fn coord(&self, cell: CellId) -> CellCoord {
        let algorithm = self.cell_base.partition_point(|&b| b <= cell.0) - 1;
        let rest = cell.0 - self.cell_base[algorithm];
        let n_env = self.environments.len();
        CellCoord {
            algorithm,
            setting: rest / n_env,
            environment: rest % n_env,
        }
    }

    pub fn key(&self, cell: CellId) -> CellKey {
        let c = self.coord(cell);
        CellKey {
            algorithm: self.algorithms[c.algorithm].clone(),
            environment: self.environments[c.environment].clone(),
            setting: self.settings[c.algorithm][c.setting].id().to_string(),
        }
    }

    pub fn resolve(&self, key: &CellKey) -> Result<CellId> {
        let unknown = || Error::UnknownKey(key.to_string());
        let a = self.algorithm_index(&key.algorithm).ok_or_else(unknown)?;
        let e = self
            .environment_index(&key.environment)
            .ok_or_else(unknown)?;
        let s = self.setting_index(a, &key.setting).ok_or_else(unknown)?;
        Ok(self.cell_id(a, s, e))
    }

    pub fn cell(&self, cell: CellId) -> &[f64] {
        &self.cells[cell.0].scores
    }

    pub fn runs(&self, cell: CellId) -> &[u64] {
        &self.cells[cell.0].runs
    }

    /// Cell ids of one algorithm in (setting, environment) order.
    pub fn algorithm_cells(&self, algorithm: usize) -> std::ops::Range<usize> {
        let start = self.cell_base[algorithm];
        start..start + self.settings[algorithm].len() * self.environments.len()
    }

    pub fn cell_scores(&self, key: &CellKey) -> Result<&[f64]> {
        Ok(self.cell(self.resolve(key)?))
    }

    /// Draws `n` scores from a cell with replacement.
    pub fn subsample_cell<R: Rng + ?Sized>(
        &self,
        key: &CellKey,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::arg("subsample size must be positive"));
        }
        let scores = self.cell_scores(key)?;
        Ok((0..n)
            .map(|_| scores[rng.random_range(0..scores.len())])
            .collect())
    }

    /// Records in their original insertion order.
    pub fn records(&self) -> impl Iterator<Item = ScoreRecord> + '_ {
        let mut cursor = vec![0usize; self.cells.len()];
        self.order.iter().flat_map(move |&(cell, count)| {
            let start = cursor[cell.0];
            cursor[cell.0] += count;
            let c = self.coord(cell);
            (start..start + count).map(move |i| ScoreRecord {
                algorithm: self.algorithms[c.algorithm].clone(),
                environment: self.environments[c.environment].clone(),
                setting: self.settings[c.algorithm][c.setting].clone(),
                run: self.cells[cell.0].runs[i],
                score: self.cells[cell.0].scores[i],
            })
        })
    }
}

/// Free-function form of [`Dataset::cell_scores`].
pub fn cell_scores<'a>(ds: &'a Dataset, key: &CellKey) -> Result<&'a [f64]> {
    ds.cell_scores(key)
}

/// Free-function form of [`Dataset::subsample_cell`].
pub fn subsample_cell<R: Rng + ?Sized>(
    ds: &Dataset,
    key: &CellKey,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    ds.subsample_cell(key, n, rng)
}

/// Per-cell score lists aligned with a dataset's cell ids.
///
/// Used for tuning subsamples; an empty list marks a missing cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSamples {
    cells: Vec<Vec<f64>>,
}

impl CellSamples {
    pub fn empty(ds: &Dataset) -> Self {
        Self {
            cells: vec![Vec::new(); ds.n_cells()],
        }
    }

    /// Every stored score of every cell.
    pub fn full(ds: &Dataset) -> Self {
        Self {
            cells: ds.cells.iter().map(|c| c.scores.clone()).collect(),
        }
    }

    pub fn from_map<'k>(
        ds: &Dataset,
        map: impl IntoIterator<Item = (&'k CellKey, &'k Vec<f64>)>,
    ) -> Result<Self> {
        let mut out = Self::empty(ds);
        for (key, scores) in map {
            let id = ds.resolve(key)?;
            out.cells[id.0] = scores.clone();
        }
        Ok(out)
    }

    pub fn get(&self, cell: CellId) -> &[f64] {
        &self.cells[cell.0]
    }

    pub fn set(&mut self, cell: CellId, scores: Vec<f64>) {
        self.cells[cell.0] = scores;
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// First cell without samples, if any.
    pub fn first_missing(&self) -> Option<CellId> {
        self.cells.iter().position(|c| c.is_empty()).map(CellId)
    }
}

#[derive(Debug)]
struct PendingCell {
    algorithm: String,
    environment: String,
    setting: HyperparameterSetting,
    runs: Vec<u64>,
    scores: Vec<f64>,
    lines: Vec<usize>,
}

/// Accumulates records and validates the grid on [`DatasetBuilder::finish`].
#[derive(Debug, Default)]
pub struct DatasetBuilder {
    pending: Vec<PendingCell>,
    lookup: HashMap<(String, String, String), usize>,
    order: Vec<(usize, usize)>,
}

impl DatasetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot(
        &mut self,
        algorithm: &str,
        environment: &str,
        setting: &HyperparameterSetting,
    ) -> usize {
        let key = (
            algorithm.to_string(),
            environment.to_string(),
            setting.id().to_string(),
        );
        if let Some(&i) = self.lookup.get(&key) {
            return i;
        }
        let i = self.pending.len();
        self.pending.push(PendingCell {
            algorithm: key.0.clone(),
            environment: key.1.clone(),
            setting: setting.clone(),
            runs: Vec::new(),
            scores: Vec::new(),
            lines: Vec::new(),
        });
        self.lookup.insert(key, i);
        i
    }

    fn note_order(&mut self, slot: usize, count: usize) {
        match self.order.last_mut() {
            Some((s, c)) if *s == slot => *c += count,
            _ => self.order.push((slot, count)),
        }
    }

    fn check(algorithm: &str, environment: &str, score: f64, line: Option<usize>) -> Result<()> {
        if algorithm.is_empty() || environment.is_empty() {
            return Err(Error::Parse {
                line: line.unwrap_or(0),
                message: "algorithm and environment ids must be non-empty".into(),
            });
        }
        if !score.is_finite() {
            return Err(Error::NonFiniteScore {
                line: line.unwrap_or(0),
            });
        }
        Ok(())
    }

    /// Adds one record. `line` is the source line used in error messages.
    pub fn push(&mut self, record: ScoreRecord, line: Option<usize>) -> Result<()> {
        Self::check(&record.algorithm, &record.environment, record.score, line)?;
        let slot = self.slot(&record.algorithm, &record.environment, &record.setting);
        let cell = &mut self.pending[slot];
        cell.runs.push(record.run);
        cell.scores.push(record.score);
        if let Some(l) = line {
            cell.lines.push(l);
        }
        self.note_order(slot, 1);
        Ok(())
    }

    /// Adds a whole block of runs to one cell.
    pub fn push_cell(
        &mut self,
        algorithm: &str,
        environment: &str,
        setting: &HyperparameterSetting,
        runs: impl IntoIterator<Item = u64>,
        scores: impl IntoIterator<Item = f64>,
    ) -> Result<()> {
        let slot = self.slot(algorithm, environment, setting);
        let before = self.pending[slot].scores.len();
        for (run, score) in runs.into_iter().zip(scores) {
            Self::check(algorithm, environment, score, None)?;
            let cell = &mut self.pending[slot];
            cell.runs.push(run);
            cell.scores.push(score);
        }
        let added = self.pending[slot].scores.len() - before;
        if added > 0 {
            self.note_order(slot, added);
        }
        Ok(())
    }

    pub fn finish(self) -> Result<Dataset> {
        if self.pending.is_empty() {
            return Err(Error::arg("dataset has no records"));
        }
        let environments: Vec<String> = self
            .pending
            .iter()
            .map(|c| c.environment.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let algorithms: Vec<String> = self
            .pending
            .iter()
            .map(|c| c.algorithm.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let alg_idx = |a: &str| algorithms.binary_search_by(|x| x.as_str().cmp(a)).unwrap();
        let env_idx = |e: &str| {
            environments
                .binary_search_by(|x| x.as_str().cmp(e))
                .unwrap()
        };

        let mut settings: Vec<Vec<HyperparameterSetting>> = vec![Vec::new(); algorithms.len()];
        for c in &self.pending {
            settings[alg_idx(&c.algorithm)].push(c.setting.clone());
        }
        for s in &mut settings {
            s.sort_by(|a, b| a.id().cmp(b.id()));
            s.dedup_by(|a, b| a.id() == b.id());
        }

        // coverage: per algorithm first, then per (algorithm, setting)
        let n_env = environments.len();
        let mut covered: Vec<Vec<Vec<bool>>> = settings
            .iter()
            .map(|s| vec![vec![false; n_env]; s.len()])
            .collect();
        for c in &self.pending {
            let a = alg_idx(&c.algorithm);
            let s = settings[a]
                .binary_search_by(|x| x.id().cmp(c.setting.id()))
                .unwrap();
            covered[a][s][env_idx(&c.environment)] = true;
        }
        for (a, per_setting) in covered.iter().enumerate() {
            let alg_envs: Vec<bool> = (0..n_env)
                .map(|e| per_setting.iter().any(|row| row[e]))
                .collect();
            if let Some(e) = alg_envs.iter().position(|&c| !c) {
                let have: Vec<&str> = (0..n_env)
                    .filter(|&i| alg_envs[i])
                    .map(|i| environments[i].as_str())
                    .collect();
                return Err(Error::RaggedCoverage(format!(
                    "algorithm {} covers [{}] but not {}",
                    algorithms[a],
                    have.join(", "),
                    environments[e]
                )));
            }
            for (s, row) in per_setting.iter().enumerate() {
                if let Some(e) = row.iter().position(|&c| !c) {
                    return Err(Error::RaggedCoverage(format!(
                        "algorithm {} setting {} has no runs in environment {}",
                        algorithms[a],
                        settings[a][s].id(),
                        environments[e]
                    )));
                }
            }
        }

        let mut cell_base = Vec::with_capacity(algorithms.len());
        let mut total = 0;
        for s in &settings {
            cell_base.push(total);
            total += s.len() * n_env;
        }
        let mut cells = vec![Cell::default(); total];
        let mut remap = vec![0usize; self.pending.len()];
        for (i, c) in self.pending.into_iter().enumerate() {
            let a = alg_idx(&c.algorithm);
            let s = settings[a]
                .binary_search_by(|x| x.id().cmp(c.setting.id()))
                .unwrap();
            let id = cell_base[a] + s * n_env + env_idx(&c.environment);
            remap[i] = id;

            let mut by_run: Vec<usize> = (0..c.runs.len()).collect();
            by_run.sort_by_key(|&k| c.runs[k]);
            for w in by_run.windows(2) {
                if c.runs[w[0]] == c.runs[w[1]] {
                    return Err(Error::DuplicateRun {
                        cell: format!("({}, {}, {})", c.algorithm, c.environment, c.setting.id()),
                        run: c.runs[w[1]],
                        line: c.lines.get(w[0].max(w[1])).copied(),
                    });
                }
            }
            cells[id] = Cell {
                runs: c.runs,
                scores: c.scores,
            };
        }
        let order = self
            .order
            .into_iter()
            .map(|(slot, n)| (CellId(remap[slot]), n))
            .collect();

        Ok(Dataset {
            algorithms,
            environments,
            settings,
            cell_base,
            cells,
            order,
        })
    }
}
