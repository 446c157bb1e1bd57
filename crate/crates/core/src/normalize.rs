//! Pooled empirical-CDF normalization.
//!
//! For each environment, every score of every algorithm and setting goes into
//! one sorted pool. A raw score `x` maps to the fraction of pool entries
//! strictly below `x`. Ties are not mid-ranked, so a pool maximum with
//! multiplicity `k` maps to `(n - k) / n`.

use serde::{Deserialize, Serialize};

use crate::dataset::{CellId, CellKey, CellSamples, Dataset};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolingPolicy {
    /// Pools hold every stored score.
    FullDataset,
    /// Pools hold only the supplied per-cell samples.
    #[default]
    ProvidedSubsample,
}

impl PoolingPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolingPolicy::FullDataset => "full-dataset",
            PoolingPolicy::ProvidedSubsample => "provided-subsample",
        }
    }
}

impl std::str::FromStr for PoolingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-dataset" => Ok(PoolingPolicy::FullDataset),
            "provided-subsample" => Ok(PoolingPolicy::ProvidedSubsample),
            other => Err(Error::arg(format!(
                "unknown pooling policy {other:?}; expected full-dataset or provided-subsample"
            ))),
        }
    }
}

/// Sorted scores of one environment.
#[derive(Clone, Debug, PartialEq)]
pub struct Pool {
    environment: String,
    scores: Vec<f64>,
}

impl Pool {
    pub fn new(environment: impl Into<String>, mut scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::arg("pool must not be empty"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::arg("pool scores must be finite"));
        }
        scores.sort_by(f64::total_cmp);
        Ok(Self {
            environment: environment.into(),
            scores,
        })
    }

    pub fn environment(&self) -> &str {
        &self.environment
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        self.scores.partition_point(|&g| g < x) as f64 / self.scores.len() as f64
    }

    /// Mean of [`Pool::cdf`] over `xs`. Sorts a copy and merges it against
    /// the pool, which beats repeated binary search for long inputs.
    pub fn mean_cdf(&self, xs: &[f64]) -> f64 {
        let total: usize = if xs.len() < 16 {
            xs.iter()
                .map(|&x| self.scores.partition_point(|&g| g < x))
                .sum()
        } else {
            let mut sorted = xs.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mut below = 0usize;
            let mut total = 0usize;
            for &x in &sorted {
                while below < self.scores.len() && self.scores[below] < x {
                    below += 1;
                }
                total += below;
            }
            total
        };
        total as f64 / (self.scores.len() as f64 * xs.len() as f64)
    }
}

/// `(1/|pool|) * #{g in pool : g < x}`.
pub fn cdf_normalize(x: f64, pool: &Pool) -> f64 {
    pool.cdf(x)
}

/// Per-environment pools over a dataset.
#[derive(Clone, Debug)]
pub struct NormalizedView<'a> {
    dataset: &'a Dataset,
    pools: Vec<Pool>,
    policy: PoolingPolicy,
}

impl<'a> NormalizedView<'a> {
    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn policy(&self) -> PoolingPolicy {
        self.policy
    }

    pub fn pools(&self) -> &[Pool] {
        &self.pools
    }

    pub fn pool(&self, environment: usize) -> &Pool {
        &self.pools[environment]
    }

    pub fn pool_for(&self, environment: &str) -> Result<&Pool> {
        self.dataset
            .environment_index(environment)
            .map(|e| &self.pools[e])
            .ok_or_else(|| Error::UnknownKey(environment.to_string()))
    }

    /// Mean normalized value of `scores` against the pool of `cell`'s
    /// environment.
    pub fn cell_mean(&self, cell: CellId, scores: &[f64]) -> f64 {
        let env = self.dataset.coord(cell).environment;
        self.pools[env].mean_cdf(scores)
    }

    pub fn normalized_cell_mean(&self, key: &CellKey, scores: Option<&[f64]>) -> Result<f64> {
        let id = self.dataset.resolve(key)?;
        let scores = scores.unwrap_or_else(|| self.dataset.cell(id));
        if scores.is_empty() {
            return Err(Error::arg(format!("no scores for cell {key}")));
        }
        Ok(self.cell_mean(id, scores))
    }
}

/// Builds one pool per environment.
///
/// Under [`PoolingPolicy::ProvidedSubsample`] `subsample` must cover every
/// cell of `ds`.
pub fn build_pools<'a>(
    ds: &'a Dataset,
    policy: PoolingPolicy,
    subsample: Option<&CellSamples>,
) -> Result<NormalizedView<'a>> {
    let source = match policy {
        PoolingPolicy::FullDataset => None,
        PoolingPolicy::ProvidedSubsample => {
            let s = subsample
                .ok_or_else(|| Error::arg("provided-subsample pooling needs a subsample"))?;
            if s.len() != ds.n_cells() {
                return Err(Error::arg("subsample does not match the dataset's cells"));
            }
            if let Some(missing) = s.first_missing() {
                return Err(Error::MissingSubsample(ds.key(missing).to_string()));
            }
            Some(s)
        }
    };
    let mut per_env: Vec<Vec<f64>> = vec![Vec::new(); ds.n_environments()];
    for c in 0..ds.n_cells() {
        let id = CellId(c);
        let scores = match source {
            Some(s) => s.get(id),
            None => ds.cell(id),
        };
        per_env[ds.coord(id).environment].extend_from_slice(scores);
    }
    let pools = per_env
        .into_iter()
        .zip(ds.environments())
        .map(|(scores, env)| Pool::new(env.clone(), scores))
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalizedView {
        dataset: ds,
        pools,
        policy,
    })
}

/// Free-function form of [`NormalizedView::normalized_cell_mean`].
pub fn normalized_cell_mean(
    view: &NormalizedView<'_>,
    key: &CellKey,
    scores: Option<&[f64]>,
) -> Result<f64> {
    view.normalized_cell_mean(key, scores)
}
