use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Seed of replica `r`: the `r`-th output of a SplitMix64 stream started
/// at `base`. Distinct replicas get statistically independent ChaCha keys.
pub fn replica_seed(base: u64, r: u64) -> u64 {
    let mut z = base.wrapping_add(r.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> Interval {
    assert!(trials > 0 && successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Interval {
        low: if successes == 0 { 0.0 } else { (center - half).max(0.0) },
        high: if successes == trials { 1.0 } else { (center + half).min(1.0) },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub probability: f64,
    pub interval: Interval,
    pub exceeding: usize,
    pub samples: usize,
}

/// Fraction of `samples` strictly above `lambda`, with its Wilson 95% interval.
pub fn estimate_exceedance(samples: &[f64], lambda: f64) -> Result<Exceedance> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda = {lambda} must be positive")));
    }
    let exceeding = samples.iter().filter(|&&d| d > lambda).count();
    Ok(Exceedance {
        probability: exceeding as f64 / samples.len() as f64,
        interval: wilson_interval(exceeding, samples.len(), Z95),
        exceeding,
        samples: samples.len(),
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean with a normal-approximation 95% interval.
pub fn mean_interval(xs: &[f64]) -> (f64, Interval) {
    let m = mean(xs);
    let n = xs.len() as f64;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let half = Z95 * (var / n).sqrt();
    (m, Interval { low: m - half, high: m + half })
}

/// Second moment `E X²` of a centered quantity, with a normal-approximation
/// 95% interval from the spread of `X²`.
pub fn second_moment_interval(xs: &[f64]) -> (f64, Interval) {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    mean_interval(&sq)
}

/// Unbiased sample variance with a normal-approximation 95% interval from
/// the fourth central moment, `se² ≈ (m₄ − s⁴)/n`.
pub fn variance_interval(xs: &[f64]) -> (f64, Interval) {
    let n = xs.len() as f64;
    let m = mean(xs);
    if xs.len() < 2 {
        return (0.0, Interval { low: 0.0, high: 0.0 });
    }
    let s2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let half = Z95 * ((m4 - s2 * s2).max(0.0) / n).sqrt();
    (s2, Interval { low: (s2 - half).max(0.0), high: s2 + half })
}

/// Median by sorting; even lengths average the middle pair.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Distribution-free 95% interval for the median from binomial order
/// statistics (normal approximation of the ranks).
pub fn median_interval(xs: &[f64]) -> Interval {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let half = Z95 * n.sqrt() / 2.0;
    let lo = ((n / 2.0 - half).floor().max(1.0) as usize).min(v.len()) - 1;
    let hi = ((n / 2.0 + half).ceil() as usize).clamp(1, v.len()) - 1;
    Interval { low: v[lo], high: v[hi] }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_cases() {
        let all_below = estimate_exceedance(&[0.1, 0.2, 0.3], 1.0).unwrap();
        assert_eq!(all_below.probability, 0.0);
        assert_eq!(all_below.interval.low, 0.0);
        assert!(all_below.interval.high > 0.0 && all_below.interval.high < 1.0);
        let all_above = estimate_exceedance(&[2.0, 3.0], 1.0).unwrap();
        assert_eq!(all_above.probability, 1.0);
        assert_eq!(all_above.interval.high, 1.0);
        let half: Vec<f64> = (0..100).map(|i| if i < 50 { 2.0 } else { 0.5 }).collect();
        let e = estimate_exceedance(&half, 1.0).unwrap();
        assert_eq!(e.probability, 0.5);
        assert!(e.interval.contains(0.5));
        assert!(e.interval.width() < 0.21);
        // independent evaluation of the score formula at n = 100
        let (p, n, z) = (0.5f64, 100.0f64, Z95);
        let c = (p + z * z / (2.0 * n)) / (1.0 + z * z / n);
        let h = z / (1.0 + z * z / n) * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
        assert!((e.interval.low - (c - h)).abs() < 1e-15 && (e.interval.high - (c + h)).abs() < 1e-15);
        assert!(estimate_exceedance(&[], 1.0).is_err());
        assert!(estimate_exceedance(&[1.0], 0.0).is_err());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let s: Vec<u64> = (0..1000).map(|r| replica_seed(42, r)).collect();
        let mut d = s.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 1000);
        assert_eq!(replica_seed(42, 7), s[7]);
        assert_ne!(replica_seed(43, 7), s[7]);
    }

    #[test]
    fn order_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let xs: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let ci = median_interval(&xs);
        assert!(ci.contains(median(&xs)));
        assert!(ci.low < 99.5 && ci.high > 99.5);
    }

    #[test]
    fn variance_of_a_two_point_law() {
        // ±1 with equal weight: s² = n/(n−1), m₄ = 1, so the interval is degenerate-narrow
        let xs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (v, ci) = variance_interval(&xs);
        assert!((v - 1000.0 / 999.0).abs() < 1e-12);
        assert!(ci.contains(v) && ci.width() < 0.01);
        let (m, ci) = mean_interval(&xs);
        assert_eq!(m, 0.0);
        assert!((ci.high - Z95 * (1000.0f64 / 999.0 / 1000.0).sqrt()).abs() < 1e-12);
    }
}
