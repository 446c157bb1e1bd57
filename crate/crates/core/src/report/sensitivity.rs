use std::collections::BTreeMap;

use super::SensitivityPoint;
use crate::dataset::HpValue;
use crate::error::{Error, Result};
use crate::normalize::NormalizedView;
use crate::stats::{mean, percentile_ci, Interval};
use crate::streams::{stream_rng, Phase, StreamKey};

/// One curve per environment: `(environment, points)`.
pub type SensitivitySeries = (String, Vec<SensitivityPoint>);

/// Normalized score of `algorithm` against each value of hyperparameter
/// `hp`, one series per environment.
///
/// When other hyperparameters vary too, each point uses the best setting
/// sharing that value. Intervals are percentile bootstraps over the runs of
/// that cell.
pub fn sensitivity_series(
    view: &NormalizedView<'_>,
    algorithm: &str,
    hp: &str,
    level: f64,
    n_boot: usize,
    seed: u64,
) -> Result<Vec<SensitivitySeries>> {
    let ds = view.dataset();
    let a = ds
        .algorithm_index(algorithm)
        .ok_or_else(|| Error::UnknownKey(format!("algorithm {algorithm}")))?;
    let mut groups: BTreeMap<String, (HpValue, Vec<usize>)> = BTreeMap::new();
    for (s, setting) in ds.settings(a).iter().enumerate() {
        let v = setting
            .get(hp)
            .ok_or_else(|| Error::arg(format!("setting {setting} of {algorithm} has no {hp}")))?;
        groups
            .entry(v.canonical())
            .or_insert_with(|| (v.clone(), Vec::new()))
            .1
            .push(s);
    }
    let mut out = Vec::new();
    let mut stream = 0u64;
    for (e, env) in ds.environments().iter().enumerate() {
        let pool = view.pool(e);
        let mut points = Vec::new();
        for (value, members) in groups.values() {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for &s in members {
                let per_run: Vec<f64> = ds
                    .cell(ds.cell_id(a, s, e))
                    .iter()
                    .map(|&x| pool.cdf(x))
                    .collect();
                let m = mean(&per_run);
                if best.as_ref().is_none_or(|b| m > b.0) {
                    best = Some((m, per_run));
                }
            }
            let (m, per_run) = best.expect("groups are non-empty");
            let interval = if per_run.len() >= 2 && n_boot > 0 {
                let mut rng = stream_rng(seed, 0, StreamKey::new(Phase::Report, stream));
                percentile_ci(&per_run, level, n_boot, &mut rng)?
            } else {
                Interval::point(m, level)
            };
            stream += 1;
            points.push(SensitivityPoint {
                x: value.clone(),
                mean: m,
                interval,
            });
        }
        out.push((env.clone(), points));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetBuilder, HyperparameterSetting};
    use crate::normalize::{build_pools, PoolingPolicy};

    #[test]
    fn best_over_other_hyperparameters() {
        let mut b = DatasetBuilder::new();
        let set = |a: f64, l: f64| {
            HyperparameterSetting::new(vec![
                ("alpha".into(), HpValue::Number(a)),
                ("lambda".into(), HpValue::Number(l)),
            ])
            .unwrap()
        };
        b.push_cell("A", "X", &set(0.5, 0.0), 0..2, [1.0, 2.0])
            .unwrap();
        b.push_cell("A", "X", &set(0.5, 1.0), 0..2, [5.0, 6.0])
            .unwrap();
        b.push_cell("A", "X", &set(0.25, 0.0), 0..2, [3.0, 4.0])
            .unwrap();
        b.push_cell("A", "X", &set(0.25, 1.0), 0..2, [0.0, 0.5])
            .unwrap();
        let ds = b.finish().unwrap();
        let v = build_pools(&ds, PoolingPolicy::FullDataset, None).unwrap();
        let s = sensitivity_series(&v, "A", "alpha", 0.95, 100, 0).unwrap();
        assert_eq!(s.len(), 1);
        let pts = &s[0].1;
        assert_eq!(pts.len(), 2);
        // pool of 8; {5,6} -> (6+7)/16, {3,4} -> (4+5)/16
        let by_x: BTreeMap<String, f64> = pts.iter().map(|p| (p.x.canonical(), p.mean)).collect();
        assert_eq!(by_x["0.5"], 13.0 / 16.0);
        assert_eq!(by_x["0.25"], 9.0 / 16.0);
        assert!(sensitivity_series(&v, "A", "beta", 0.95, 10, 0).is_err());
    }
}
