use serde::Serialize;

use crate::model::ModelParams;
use crate::sim::{PathEnsemble, PathSample};

pub const HISTOGRAM_BINS: usize = 61;

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().copied().collect::<NeumaierSum>().value() / n as f64;
        let se = if n > 1 {
            (sample_variance_about(xs, mean) / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, se, n }
    }

    /// Estimate of `E[a - b]` from paired samples.
    pub fn paired(a: &[f64], b: &[f64]) -> Self {
        assert_eq!(a.len(), b.len(), "paired samples must have equal length");
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Self::from_samples(&d)
    }

    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

fn sample_variance_about(xs: &[f64], mean: f64) -> f64 {
    let n = xs.len();
    xs.iter()
        .map(|x| (x - mean) * (x - mean))
        .collect::<NeumaierSum>()
        .value()
        / (n - 1) as f64
}

/// Unbiased sample variance with a fourth-moment standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub var: f64,
    pub se: f64,
}

impl VarianceEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n < 4 {
            return Self {
                var: f64::NAN,
                se: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = xs.iter().copied().collect::<NeumaierSum>().value() / nf;
        let var = sample_variance_about(xs, mean);
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).collect::<NeumaierSum>().value() / nf;
        let se2 = (m4 - var * var * (nf - 3.0) / (nf - 1.0)) / nf;
        Self {
            var,
            se: se2.max(0.0).sqrt(),
        }
    }
}

/// Uniform-bin histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// `bins` uniform bins on `mean +- 4 sd`; a degenerate sample lands in the middle bin.
    pub fn around_mean(xs: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let est = Estimate::from_samples(xs);
        let sd = if xs.len() > 1 { est.se * (xs.len() as f64).sqrt() } else { 0.0 };
        let mut counts = vec![0u64; bins];
        if !(sd > 0.0) {
            counts[bins / 2] = xs.len() as u64;
            return Self {
                lo: est.mean,
                hi: est.mean,
                counts,
            };
        }
        let (lo, hi) = (est.mean - 4.0 * sd, est.mean + 4.0 * sd);
        let width = (hi - lo) / bins as f64;
        for &x in xs {
            if x >= lo && x <= hi {
                let i = (((x - lo) / width) as usize).min(bins - 1);
                counts[i] += 1;
            }
        }
        Self { lo, hi, counts }
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let n = self.counts.len();
        let w = (self.hi - self.lo) / n as f64;
        (0..n).map(|i| self.lo + (i as f64 + 0.5) * w).collect()
    }

    /// Counts normalised to a probability density.
    pub fn density(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        self.counts
            .iter()
            .map(|&c| if w > 0.0 && total > 0 { c as f64 / (total as f64 * w) } else { 0.0 })
            .collect()
    }
}

/// Linear-interpolation quantile of an unsorted sample.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = (v.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let i = h.floor() as usize;
    let j = (i + 1).min(v.len() - 1);
    v[i] + (h - i as f64) * (v[j] - v[i])
}

/// Cross-sectional statistics of one quantity at one recorded time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSection {
    pub t: f64,
    pub mean: f64,
    pub q05: f64,
    pub q95: f64,
    pub histogram: Histogram,
}

/// Statistics of `f(sample)` at every recorded time of the ensemble.
pub fn cross_sections(ensemble: &PathEnsemble, f: impl Fn(&PathSample) -> f64) -> Vec<CrossSection> {
    let times = ensemble.record_times();
    (0..times.len())
        .map(|i| {
            let v = ensemble.column(i, &f);
            CrossSection {
                t: times[i],
                mean: Estimate::from_samples(&v).mean,
                q05: quantile(&v, 0.05),
                q95: quantile(&v, 0.95),
                histogram: Histogram::around_mean(&v, HISTOGRAM_BINS),
            }
        })
        .collect()
}

/// Inventory statistics at every recorded time of the ensemble.
pub fn inventory_stats(ensemble: &PathEnsemble) -> Vec<CrossSection> {
    cross_sections(ensemble, |s| s.q)
}

/// Cross-sectional statistics of `A` at one recorded time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ASlice {
    pub t: f64,
    pub mean: Estimate,
    pub variance: VarianceEstimate,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AProcessStats {
    /// Left-Riemann estimate of `E[integral_0^T A_t^2 dt]`.
    pub integral_a2: Estimate,
    pub slices: Vec<ASlice>,
}

/// `A = (b beta + 2 phi) q + beta (p - s)`.
pub fn a_value(params: &ModelParams, q: f64, p: f64, s: f64) -> f64 {
    (params.b() * params.beta() + 2.0 * params.phi()) * q + params.beta() * (p - s)
}

/// Statistics of `A` at the recorded times nearest to each of `times`.
pub fn a_process_stats(ensemble: &PathEnsemble, params: &ModelParams, times: &[f64]) -> AProcessStats {
    let integral: Vec<f64> = ensemble.paths().iter().map(|p| p.a_integral).collect();
    let rec = ensemble.record_times();
    let slices = times
        .iter()
        .map(|&t| {
            let i = nearest(&rec, t);
            let a = ensemble.column(i, |s| a_value(params, s.q, s.p, s.s));
            ASlice {
                t: rec[i],
                mean: Estimate::from_samples(&a),
                variance: VarianceEstimate::from_samples(&a),
                histogram: Histogram::around_mean(&a, HISTOGRAM_BINS),
            }
        })
        .collect();
    AProcessStats {
        integral_a2: Estimate::from_samples(&integral),
        slices,
    }
}

fn nearest(grid: &[f64], t: f64) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let s: NeumaierSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn estimate_basics() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert_relative_eq!(e.se, (5.0f64 / 3.0 / 4.0).sqrt(), max_relative = 1e-15);
        assert!(e.within(2.5 + 0.9 * e.se, 1.0));
        let p = Estimate::paired(&[3.0, 5.0], &[1.0, 2.0]);
        assert_eq!(p.mean, 2.5);
    }

    #[test]
    fn variance_of_two_point_sample() {
        let xs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let v = VarianceEstimate::from_samples(&xs);
        assert_relative_eq!(v.var, 1000.0 / 999.0, max_relative = 1e-14);
        assert!(v.se < 1e-3);
    }

    #[test]
    fn histogram_and_quantiles() {
        let xs: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        assert_relative_eq!(quantile(&xs, 0.05), 5.0, max_relative = 1e-15);
        assert_relative_eq!(quantile(&xs, 0.95), 95.0, max_relative = 1e-15);
        let h = Histogram::around_mean(&xs, HISTOGRAM_BINS);
        assert_eq!(h.counts.len(), 61);
        assert_eq!(h.counts.iter().sum::<u64>(), 101);
        let centers = h.bin_centers();
        assert_relative_eq!(centers[30], 50.0, max_relative = 1e-12);
        let w = (h.hi - h.lo) / 61.0;
        assert_relative_eq!(h.density().iter().sum::<f64>() * w, 1.0, max_relative = 1e-12);

        let flat = Histogram::around_mean(&[2.0; 10], HISTOGRAM_BINS);
        assert_eq!((flat.lo, flat.hi), (2.0, 2.0));
        assert_eq!(flat.counts[30], 10);
    }
}
