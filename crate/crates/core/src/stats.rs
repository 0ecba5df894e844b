//! Summary statistics, histograms and log-log slope fits over sample vectors.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator; 0 for one sample).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Deciles `q_{0.1}, …, q_{0.9}` with linear interpolation.
    pub deciles: Vec<f64>,
}

impl Summary {
    /// Returns `None` for an empty sample.
    pub fn of(samples: &[f64]) -> Option<Self> {
        let count = samples.len();
        if count == 0 {
            return None;
        }
        let mean = samples.iter().sum::<f64>() / count as f64;
        let std = if count > 1 {
            let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let deciles = (1..10).map(|k| quantile_sorted(&sorted, k as f64 / 10.0)).collect();
        Some(Self {
            count,
            mean,
            std,
            min: sorted[0],
            max: sorted[count - 1],
            deciles,
        })
    }

    pub fn coefficient_of_variation(&self) -> f64 {
        self.std / self.mean.abs()
    }

    pub fn standard_error(&self) -> f64 {
        self.std / (self.count as f64).sqrt()
    }
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `counts / (total · width)`, integrating to one.
    pub density: Vec<f64>,
}

impl Histogram {
    /// Equal-width bins over `[min, max]`; a degenerate range is widened to unit width.
    pub fn new(samples: &[f64], bins: usize) -> Option<Self> {
        if samples.is_empty() || bins == 0 {
            return None;
        }
        let (mut lo, mut hi) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if hi <= lo {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0usize; bins];
        for &x in samples {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let total = samples.len() as f64;
        let density = counts.iter().map(|&c| c as f64 / (total * width)).collect();
        Some(Self { edges, counts, density })
    }
}

/// Least-squares slope of `ln y` against `ln x`. Pairs with a nonpositive
/// coordinate are skipped; `None` if fewer than two points remain.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn summary() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_relative_eq!(s.std, (5.0f64 / 3.0).sqrt(), max_relative = 1e-15);
        assert_eq!((s.min, s.max), (1.0, 4.0));
        assert_relative_eq!(s.deciles[4], 2.5);
        assert_relative_eq!(s.deciles[0], 1.3, max_relative = 1e-12);
        assert!(Summary::of(&[]).is_none());
        assert_eq!(Summary::of(&[7.0]).unwrap().std, 0.0);
    }

    #[test]
    fn histogram() {
        let h = Histogram::new(&[0.0, 0.1, 0.9, 1.0], 2).unwrap();
        assert_eq!(h.counts, vec![2, 2]);
        let area: f64 = h.density.iter().map(|d| d * 0.5).sum();
        assert_relative_eq!(area, 1.0);

        let single = Histogram::new(&[3.0], 5).unwrap();
        assert_eq!(single.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert!(Histogram::new(&[1.0], 0).is_none());
    }

    #[test]
    fn slope() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.8)).collect();
        assert_relative_eq!(loglog_slope(&xs, &ys).unwrap(), 0.8, max_relative = 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
    }
}
