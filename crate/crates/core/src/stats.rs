//! Percentile bootstrap intervals, ranking comparison and Gaussian KDE.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::hash::Hash;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl Interval {
    pub fn point(x: f64, level: f64) -> Self {
        Self {
            lower: x,
            upper: x,
            level,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Quantile of sorted data with linear interpolation between order
/// statistics (position `(n - 1) * p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Central interval of the empirical distribution of `xs`.
pub fn spread_interval(xs: &[f64], level: f64) -> Interval {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    Interval {
        lower: quantile_sorted(&s, (1.0 - level) / 2.0),
        upper: quantile_sorted(&s, (1.0 + level) / 2.0),
        level,
    }
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::arg(format!(
            "confidence level {level} not in (0, 1)"
        )));
    }
    Ok(())
}

/// Percentile bootstrap interval for the mean.
pub fn percentile_ci<R: Rng + ?Sized>(
    samples: &[f64],
    level: f64,
    n_boot: usize,
    rng: &mut R,
) -> Result<Interval> {
    if samples.len() < 2 {
        return Err(Error::arg("bootstrap interval needs at least 2 samples"));
    }
    check_level(level)?;
    if n_boot == 0 {
        return Err(Error::arg("n_boot must be positive"));
    }
    let n = samples.len();
    let means: Vec<f64> = (0..n_boot)
        .map(|_| {
            let mut acc = 0.0;
            for _ in 0..n {
                acc += samples[rng.random_range(0..n)];
            }
            acc / n as f64
        })
        .collect();
    Ok(spread_interval(&means, level))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub bandwidth: f64,
    /// How the bandwidth was chosen: `explicit`, `silverman` or `fallback`.
    pub bandwidth_rule: String,
}

impl DensityCurve {
    /// Trapezoidal integral over the grid.
    pub fn mass(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum()
    }

    /// Grid positions of strict local maxima (plateaus count once).
    pub fn local_maxima(&self) -> Vec<f64> {
        let y = &self.ys;
        let mut out = Vec::new();
        let mut i = 1;
        while i + 1 < y.len() {
            if y[i] > y[i - 1] {
                let mut j = i;
                while j + 1 < y.len() && y[j + 1] == y[i] {
                    j += 1;
                }
                if j + 1 < y.len() && y[j + 1] < y[i] {
                    out.push(self.xs[(i + j) / 2]);
                }
                i = j + 1;
            } else {
                i += 1;
            }
        }
        out
    }
}

/// Silverman's rule `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
///
/// When one of the spreads is zero the other is used; when both are zero the
/// bandwidth is `max(|mean|, 1) * 1e-3`.
pub fn silverman_bandwidth(samples: &[f64]) -> (f64, &'static str) {
    let sd = std_dev(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => return (mean(samples).abs().max(1.0) * 1e-3, "fallback"),
    };
    (
        0.9 * spread * (samples.len() as f64).powf(-0.2),
        "silverman",
    )
}

/// Gaussian KDE on an even grid spanning `[min - 3h, max + 3h]`.
pub fn kde(samples: &[f64], bandwidth: Option<f64>, grid_size: usize) -> Result<DensityCurve> {
    if samples.is_empty() {
        return Err(Error::arg("kde needs at least one sample"));
    }
    if grid_size < 2 {
        return Err(Error::arg("kde grid needs at least 2 points"));
    }
    let (h, rule) = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => (h, "explicit"),
        Some(h) => return Err(Error::arg(format!("bandwidth {h} must be positive"))),
        None => silverman_bandwidth(samples),
    };
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (grid_size - 1) as f64;
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * PI).sqrt());
    let xs: Vec<f64> = (0..grid_size).map(|i| lo + step * i as f64).collect();
    let ys = xs
        .iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| {
                    let z = (x - s) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    Ok(DensityCurve {
        xs,
        ys,
        bandwidth: h,
        bandwidth_rule: rule.to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingComparison {
    pub exact_match: bool,
    pub pairwise_inversions: usize,
}

/// Counts discordant pairs between two orderings of the same ids.
pub fn compare_rankings<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<RankingComparison> {
    if a.len() != b.len() {
        return Err(Error::arg("rankings have different lengths"));
    }
    let pos: HashMap<&T, usize> = b.iter().enumerate().map(|(i, t)| (t, i)).collect();
    if pos.len() != b.len() {
        return Err(Error::arg("ranking contains duplicates"));
    }
    let mut seq = Vec::with_capacity(a.len());
    for t in a {
        seq.push(
            *pos.get(t)
                .ok_or_else(|| Error::arg("rankings rank different ids"))?,
        );
    }
    let mut seen = vec![false; seq.len()];
    for &p in &seq {
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::arg("ranking contains duplicates"));
        }
    }
    let inversions = count_inversions(&mut seq);
    Ok(RankingComparison {
        exact_match: inversions == 0,
        pairwise_inversions: inversions,
    })
}

// merge-sort inversion count
fn count_inversions(v: &mut [usize]) -> usize {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            merged.push(v[i]);
            i += 1;
        } else {
            merged.push(v[j]);
            inv += mid - i;
            j += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_samples_give_point_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ci = percentile_ci(&[2.5; 10], 0.95, 200, &mut rng).unwrap();
        assert_eq!((ci.lower, ci.upper), (2.5, 2.5));
    }

    #[test]
    fn ci_is_deterministic_and_validates() {
        let xs: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let a = percentile_ci(&xs, 0.9, 500, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = percentile_ci(&xs, 0.9, 500, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(percentile_ci(&[1.0], 0.9, 10, &mut rng).is_err());
        assert!(percentile_ci(&xs, 1.0, 10, &mut rng).is_err());
    }

    #[test]
    fn ci_matches_normal_theory() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = mean(&xs);
        let ci = percentile_ci(&xs, 0.95, 10_000, &mut rng).unwrap();
        let half = 1.96 / 1000f64.sqrt();
        // normal-theory width uses the population sd of 1
        assert!(
            (ci.width() - 2.0 * half).abs() / (2.0 * half) < 0.2,
            "{ci:?}"
        );
        assert!(((ci.lower + ci.upper) / 2.0 - m).abs() < 0.2 * half);
    }

    #[test]
    fn ci_shrinks_with_more_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 40;
        let mut violations = 0;
        for _ in 0..trials {
            let small: Vec<f64> = (0..25).map(|_| StandardNormal.sample(&mut rng)).collect();
            let large: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
            let ws = percentile_ci(&small, 0.95, 300, &mut rng).unwrap().width();
            let wl = percentile_ci(&large, 0.95, 300, &mut rng).unwrap().width();
            if wl > ws {
                violations += 1;
            }
        }
        assert!(violations as f64 <= 0.05 * trials as f64, "{violations}");
    }

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert!((quantile_sorted(&s, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn kde_single_kernel_peak() {
        let c = kde(&[0.0], Some(1.0), 601).unwrap();
        let mid = c.xs.iter().position(|&x| x.abs() < 1e-12).unwrap();
        assert!((c.ys[mid] - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!((c.mass() - 1.0).abs() < 0.02);
    }

    #[test]
    fn kde_symmetric() {
        let c = kde(&[-2.0, -0.5, 0.5, 2.0], None, 401).unwrap();
        let n = c.ys.len();
        for i in 0..n {
            assert!((c.ys[i] - c.ys[n - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn kde_errors_and_fallback() {
        assert!(kde(&[], None, 10).is_err());
        assert!(kde(&[1.0], Some(0.0), 10).is_err());
        let c = kde(&[5.0, 5.0], None, 101).unwrap();
        assert_eq!(c.bandwidth_rule, "fallback");
        assert!((c.bandwidth - 5e-3).abs() < 1e-15);
        assert!((c.mass() - 1.0).abs() < 0.02);
    }

    #[test]
    fn ranking_examples() {
        let a = ["a", "b", "c", "d"];
        let r = compare_rankings(&a, &a).unwrap();
        assert_eq!(
            r,
            RankingComparison {
                exact_match: true,
                pairwise_inversions: 0
            }
        );
        let rev = ["d", "c", "b", "a"];
        assert_eq!(compare_rankings(&a, &rev).unwrap().pairwise_inversions, 6);
        assert!(compare_rankings(&a, &["a", "b", "c", "e"]).is_err());
    }

    fn brute_inversions(a: &[u8], b: &[u8]) -> usize {
        let pos = |x: u8| b.iter().position(|&y| y == x).unwrap();
        let mut n = 0;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                if pos(a[i]) > pos(a[j]) {
                    n += 1;
                }
            }
        }
        n
    }

    proptest! {
        #[test]
        fn inversions_match_pair_loop(perm_a in Just((0u8..9).collect::<Vec<_>>()).prop_shuffle(),
                                      perm_b in Just((0u8..9).collect::<Vec<_>>()).prop_shuffle()) {
            let got = compare_rankings(&perm_a, &perm_b).unwrap();
            prop_assert_eq!(got.pairwise_inversions, brute_inversions(&perm_a, &perm_b));
            prop_assert_eq!(got.pairwise_inversions,
                compare_rankings(&perm_b, &perm_a).unwrap().pairwise_inversions);
            prop_assert_eq!(got.exact_match, perm_a == perm_b);
        }

        #[test]
        fn kde_mass_and_sign(xs in prop::collection::vec(-50f64..50.0, 1..60)) {
            let c = kde(&xs, None, 512).unwrap();
            prop_assert!(c.ys.iter().all(|&y| y >= 0.0));
            prop_assert!((c.mass() - 1.0).abs() < 0.02, "mass {}", c.mass());
        }
    }
}
