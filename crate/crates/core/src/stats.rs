//! Verification statistics on projected paths: increment-variance profiles,
//! a log-log Hurst estimator and moment-based Gaussianity z-tests.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flows::{PathEnsemble, TimeChange};
use crate::gaussian::pow2h;
use crate::hurst::HurstParam;
#[allow(unused_imports)]
use num_traits::Float as _;

pub const MIN_HURST_SAMPLES: usize = 1000;
pub const MIN_HURST_POINTS: usize = 8;
pub const MIN_GAUSSIANITY_SAMPLES: usize = 1000;

/// `(1/n) Σ_s (X_s(t_j) − X_s(t_i))²`.
pub fn increment_second_moment(paths: &PathEnsemble, i: usize, j: usize) -> f64 {
    let n = paths.n_samples();
    let mut acc = 0.0;
    for s in 0..n {
        let p = paths.path(s);
        let d = p[j] - p[i];
        acc += d * d;
    }
    acc / n as f64
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfileEntry {
    pub s: f64,
    pub t: f64,
    pub theta_s: f64,
    pub theta_t: f64,
    /// `|θ_t − θ_s|^{2H}`.
    pub predicted: f64,
    pub observed: f64,
    /// Chi-square standard error `observed·√(2/n)`.
    pub stderr: f64,
}

impl ProfileEntry {
    pub fn within(&self, k: f64) -> bool {
        (self.observed - self.predicted).abs() <= k * self.stderr
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarianceProfile {
    pub n_samples: usize,
    pub entries: Vec<ProfileEntry>,
}

impl VarianceProfile {
    /// Share of pairs whose observed variance is within `k` standard errors
    /// of the prediction; 1 for an empty profile.
    pub fn fraction_within(&self, k: f64) -> f64 {
        if self.entries.is_empty() {
            return 1.0;
        }
        self.entries.iter().filter(|e| e.within(k)).count() as f64 / self.entries.len() as f64
    }
}

/// Predicted against observed increment variance for every grid pair
/// `i < j`, or every `⌈pairs / max_pairs⌉`-th pair when capped.
pub fn variance_profile(paths: &PathEnsemble, h: HurstParam, max_pairs: Option<usize>) -> VarianceProfile {
    let tc = paths.time_change();
    let k = tc.len();
    let total = k * k.saturating_sub(1) / 2;
    let stride = match max_pairs {
        Some(m) if m > 0 && total > m => total.div_ceil(m),
        _ => 1,
    };
    let root = (2.0 / paths.n_samples() as f64).sqrt();
    let mut entries = Vec::with_capacity(total / stride + 1);
    let mut counter = 0usize;
    for i in 0..k {
        for j in i + 1..k {
            counter += 1;
            if !(counter - 1).is_multiple_of(stride) {
                continue;
            }
            let observed = increment_second_moment(paths, i, j);
            entries.push(ProfileEntry {
                s: tc.grid[i],
                t: tc.grid[j],
                theta_s: tc.values[i],
                theta_t: tc.values[j],
                predicted: pow2h((tc.values[j] - tc.values[i]).abs(), h),
                observed,
                stderr: observed * root,
            });
        }
    }
    VarianceProfile { n_samples: paths.n_samples(), entries }
}

/// Half the least-squares slope of `ln E[(X_t − X_s)²]` against
/// `ln |θ_t − θ_s|`, over grid pairs `(i, i + ℓ)` at lags `ℓ = 1, 2, 4, …`.
pub fn hurst_estimate(paths: &PathEnsemble) -> Result<f64> {
    let n = paths.n_samples();
    if n < MIN_HURST_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_HURST_SAMPLES, got: n });
    }
    let tc: &TimeChange = paths.time_change();
    let mut distinct: Vec<f64> = tc.values.clone();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::ConstantTimeChange);
    }
    if distinct.len() < MIN_HURST_POINTS {
        return Err(Error::InvalidGrid(alloc::format!(
            "{} distinct time-change values, need {MIN_HURST_POINTS}",
            distinct.len()
        )));
    }
    let k = tc.len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut lag = 1;
    while lag < k {
        for i in 0..k - lag {
            let dtheta = (tc.values[i + lag] - tc.values[i]).abs();
            if dtheta <= 0.0 {
                continue;
            }
            let v = increment_second_moment(paths, i, i + lag);
            if v <= 0.0 {
                return Err(Error::ZeroVariance);
            }
            xs.push(dtheta.ln());
            ys.push(v.ln());
        }
        lag *= 2;
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::ConstantTimeChange);
    }
    Ok(0.5 * sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianityReport {
    pub n: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub skewness_z: f64,
    pub kurtosis_z: f64,
    pub passed: bool,
}

/// Threshold on both moment z-scores.
pub const GAUSSIANITY_Z: f64 = 4.0;

/// Skewness and excess kurtosis against their asymptotic standard errors
/// `√(6/n)` and `√(24/n)`; passes when both `|z| < 4`.
pub fn gaussianity_check(samples: &[f64]) -> Result<GaussianityReport> {
    let n = samples.len();
    if n < MIN_GAUSSIANITY_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_GAUSSIANITY_SAMPLES, got: n });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= f64::MIN_POSITIVE || m2 <= 1e-28 * mean * mean {
        return Err(Error::ZeroVariance);
    }
    let skewness = m3 / (m2 * m2.sqrt());
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let skewness_z = skewness / (6.0 / nf).sqrt();
    let kurtosis_z = excess_kurtosis / (24.0 / nf).sqrt();
    Ok(GaussianityReport {
        n,
        skewness,
        excess_kurtosis,
        skewness_z,
        kurtosis_z,
        passed: skewness_z.abs() < GAUSSIANITY_Z && kurtosis_z.abs() < GAUSSIANITY_Z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::uniform_grid;
    use crate::rng::row_stream;
    use alloc::vec;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    fn brownian_paths(theta: &[f64], n: usize, seed: u64) -> PathEnsemble {
        let k = theta.len();
        let mut values = Vec::with_capacity(n * k);
        for s in 0..n {
            let mut rng = row_stream(seed, 0, s as u64);
            let mut x = 0.0;
            let mut prev = 0.0;
            for &th in theta {
                let z: f64 = StandardNormal.sample(&mut rng);
                x += z * (th - prev).sqrt();
                prev = th;
                values.push(x);
            }
        }
        let tc = TimeChange { grid: theta.to_vec(), values: theta.to_vec() };
        PathEnsemble::new(tc, n, values).unwrap()
    }

    #[test]
    fn brownian_profile_and_hurst() {
        let theta = uniform_grid(0.0, 1.0, 17);
        let p = brownian_paths(&theta, 4000, 3);
        let h = HurstParam::new(0.5).unwrap();
        let prof = variance_profile(&p, h, None);
        assert_eq!(prof.entries.len(), 17 * 16 / 2);
        assert!(prof.fraction_within(4.0) >= 0.95);
        let est = hurst_estimate(&p).unwrap();
        assert!((est - 0.5).abs() < 0.05, "{est}");
    }

    #[test]
    fn profile_subsampling_and_symmetry() {
        let theta = uniform_grid(0.0, 1.0, 10);
        let p = brownian_paths(&theta, 10, 1);
        let h = HurstParam::new(0.3).unwrap();
        let capped = variance_profile(&p, h, Some(10));
        assert!(capped.entries.len() <= 10);
        for e in &variance_profile(&p, h, None).entries {
            assert!(e.predicted > 0.0);
            assert_eq!(e.predicted, pow2h((e.theta_s - e.theta_t).abs(), h));
        }
    }

    #[test]
    fn constant_flow_profile_is_all_zero() {
        let tc = TimeChange { grid: uniform_grid(0.0, 1.0, 4), values: vec![2.0; 4] };
        let p = PathEnsemble::new(tc, 3, vec![1.5; 12]).unwrap();
        let prof = variance_profile(&p, HurstParam::new(0.3).unwrap(), None);
        assert!(prof.entries.iter().all(|e| e.predicted == 0.0 && e.observed == 0.0));
        assert_eq!(prof.fraction_within(4.0), 1.0);
    }

    #[test]
    fn hurst_rejects_degenerate_inputs() {
        let tc = TimeChange { grid: uniform_grid(0.0, 1.0, 10), values: vec![1.0; 10] };
        let p = PathEnsemble::new(tc, 1000, vec![0.0; 10_000]).unwrap();
        assert_eq!(hurst_estimate(&p), Err(Error::ConstantTimeChange));
        let theta = uniform_grid(0.0, 1.0, 10);
        let tc = TimeChange { grid: theta.clone(), values: theta };
        let p = PathEnsemble::new(tc, 1000, vec![3.0; 10_000]).unwrap();
        assert_eq!(hurst_estimate(&p), Err(Error::ZeroVariance));
        let few = brownian_paths(&uniform_grid(0.0, 1.0, 10), 10, 0);
        assert!(matches!(hurst_estimate(&few), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn hurst_is_scale_invariant() {
        let theta: Vec<f64> = uniform_grid(0.0, 1.0, 12).iter().map(|t| t * t).collect();
        let p = brownian_paths(&theta, 1500, 9);
        let a = hurst_estimate(&p).unwrap();
        let b = hurst_estimate(&p.scaled(3.7)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gaussianity_examples() {
        let mut rng = row_stream(5, 1, 0);
        let normal: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(gaussianity_check(&normal).unwrap().passed);
        let expo: Vec<f64> = (0..20_000).map(|_| Exp1.sample(&mut rng)).collect();
        let rep = gaussianity_check(&expo).unwrap();
        assert!(!rep.passed);
        assert!(rep.skewness_z > 4.0 && (rep.skewness - 2.0).abs() < 0.3);
        assert_eq!(gaussianity_check(&[1.0; 2000]), Err(Error::ZeroVariance));
        assert!(matches!(gaussianity_check(&[1.0; 10]), Err(Error::TooFewSamples { .. })));
    }
}
