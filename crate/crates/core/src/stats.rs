//! Summary statistics and significance tests.
//!
//! * [`summarize`]: mean, sample SD (`n - 1` denominator), median, non-excess
//!   kurtosis `m4 / m2^2` from population central moments, min and max.
//! * [`welch_t_test`]: unequal-variance two-sample t test with Welch-Satterthwaite
//!   degrees of freedom. Student-t tails come from `statrs`, which evaluates the
//!   regularized incomplete beta function by continued fraction.
//! * [`wilcoxon_signed_rank`]: paired test. Zero differences are dropped, tied
//!   absolute differences get averaged ranks. Up to 25 remaining pairs the null
//!   distribution of `W+` is enumerated exactly (dynamic programming over doubled
//!   ranks); above that a normal approximation with tie and continuity corrections
//!   is used. When every pair is tied the p value is 1.
//! * [`confidence_band`]: pointwise mean with a Student-t interval.
//!
//! Two-sided p values count outcomes at least as far from the null centre as the
//! observed one. One-sided alternatives refer to `xs` relative to `ys`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

/// Largest number of non-zero differences handled by exact enumeration.
pub const WILCOXON_EXACT_MAX: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("need at least {needed} observations, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("non-finite observation {0}")]
    NonFinite(f64),
    #[error("confidence level must be in (0, 1), got {0}")]
    InvalidLevel(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    /// NaN when `n < 2`.
    pub sd: f64,
    pub median: f64,
    /// NaN when `n < 2` or the sample has zero spread.
    pub kurtosis: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    WelchT,
    WilcoxonSignedRankExact,
    WilcoxonSignedRankNormal,
}

impl TestMethod {
    pub fn name(self) -> &'static str {
        match self {
            TestMethod::WelchT => "welch-t",
            TestMethod::WilcoxonSignedRankExact => "wilcoxon-signed-rank-exact",
            TestMethod::WilcoxonSignedRankNormal => "wilcoxon-signed-rank-normal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
    /// `xs` tends to exceed `ys`.
    Greater,
    /// `xs` tends to fall below `ys`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Welch: t. Wilcoxon: `W+`, the rank sum of positive differences.
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    /// Signed effect, positive when `xs` is larger. Welch: difference of means.
    /// Wilcoxon: `W+ - W-`.
    pub effect: f64,
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    match xs.iter().find(|x| !x.is_finite()) {
        Some(&x) => Err(StatsError::NonFinite(x)),
        None => Ok(()),
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn summarize(xs: &[f64]) -> Result<SampleSummary, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(xs)?;
    let n = xs.len();
    let m = mean(xs);
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let (sd, kurtosis) = if n < 2 {
        (f64::NAN, f64::NAN)
    } else {
        let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
        let k = if m2 > 0.0 { m4 / (m2 * m2) } else { f64::NAN };
        (variance(xs).sqrt(), k)
    };
    Ok(SampleSummary {
        n,
        mean: m,
        sd,
        median,
        kurtosis,
        min: sorted[0],
        max: sorted[n - 1],
    })
}

fn tail_p(stat: f64, alternative: Alternative, cdf: impl Fn(f64) -> f64, sf: impl Fn(f64) -> f64) -> f64 {
    let p = match alternative {
        Alternative::TwoSided => 2.0 * sf(stat.abs()),
        Alternative::Greater => sf(stat),
        Alternative::Less => cdf(stat),
    };
    p.clamp(0.0, 1.0)
}

pub fn welch_t_test(xs: &[f64], ys: &[f64], alternative: Alternative) -> Result<TestResult, StatsError> {
    for s in [xs, ys] {
        if s.len() < 2 {
            return Err(StatsError::TooFewSamples {
                needed: 2,
                got: s.len(),
            });
        }
        check_finite(s)?;
    }
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let diff = mean(xs) - mean(ys);
    let (qx, qy) = (variance(xs) / nx, variance(ys) / ny);
    let se2 = qx + qy;
    let result = |statistic, p_value| TestResult {
        statistic,
        p_value,
        method: TestMethod::WelchT,
        effect: diff,
    };
    if se2 == 0.0 {
        // Both samples are constant: the means either coincide or are separated
        // with no uncertainty.
        if diff == 0.0 {
            return Ok(result(0.0, 1.0));
        }
        let t = diff.signum() * f64::INFINITY;
        let p = match alternative {
            Alternative::TwoSided => 0.0,
            Alternative::Greater => (diff < 0.0) as u8 as f64,
            Alternative::Less => (diff > 0.0) as u8 as f64,
        };
        return Ok(result(t, p));
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (qx * qx / (nx - 1.0) + qy * qy / (ny - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    Ok(result(t, tail_p(t, alternative, |x| dist.cdf(x), |x| dist.sf(x))))
}

/// Averaged ranks of `values` (1-based), doubled so they stay integers.
fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j share rank ((i + 1) + (j + 1)) / 2.
        let doubled = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        i = j + 1;
    }
    ranks
}

/// Tie group sizes of `values`.
fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.chunk_by(|a, b| a == b).map(|c| c.len()).collect()
}

pub fn wilcoxon_signed_rank(xs: &[f64], ys: &[f64], alternative: Alternative) -> Result<TestResult, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    check_finite(xs)?;
    check_finite(ys)?;
    let diffs: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).filter(|&d| d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            method: TestMethod::WilcoxonSignedRankExact,
            effect: 0.0,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let total2: u64 = ranks.iter().sum();
    let w2: u64 = ranks.iter().zip(&diffs).filter(|(_, &d)| d > 0.0).map(|(r, _)| r).sum();
    let w_plus = w2 as f64 / 2.0;
    let effect = w2 as f64 - total2 as f64 / 2.0;

    if n <= WILCOXON_EXACT_MAX {
        // counts[s] = number of sign assignments whose doubled W+ equals s.
        let mut counts = vec![0u64; total2 as usize + 1];
        counts[0] = 1;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] > 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let observed = (2 * w2 as i64 - total2 as i64).abs();
        let extreme: u64 = counts
            .iter()
            .enumerate()
            .filter(|&(s, _)| match alternative {
                Alternative::TwoSided => (2 * s as i64 - total2 as i64).abs() >= observed,
                Alternative::Greater => s as u64 >= w2,
                Alternative::Less => s as u64 <= w2,
            })
            .map(|(_, &c)| c)
            .sum();
        let p = extreme as f64 / (1u64 << n) as f64;
        return Ok(TestResult {
            statistic: w_plus,
            p_value: p.clamp(0.0, 1.0),
            method: TestMethod::WilcoxonSignedRankExact,
            effect,
        });
    }

    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let ties: f64 = tie_sizes(&abs).iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let sigma = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0).sqrt();
    let dev = w_plus - mu;
    let std_normal = Normal::standard();
    let p = match alternative {
        Alternative::TwoSided => 2.0 * std_normal.sf(((dev.abs() - 0.5).max(0.0)) / sigma),
        Alternative::Greater => std_normal.sf((dev - 0.5) / sigma),
        Alternative::Less => std_normal.cdf((dev + 0.5) / sigma),
    };
    Ok(TestResult {
        statistic: w_plus,
        p_value: p.clamp(0.0, 1.0),
        method: TestMethod::WilcoxonSignedRankNormal,
        effect,
    })
}

/// Pointwise mean of several equally long curves with a Student-t confidence band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Band {
    pub fn half_width(&self, i: usize) -> f64 {
        (self.upper[i] - self.lower[i]) / 2.0
    }
}

pub fn confidence_band(curves: &[Vec<f64>], level: f64) -> Result<Band, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    if curves.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: curves.len(),
        });
    }
    let len = curves[0].len();
    if let Some(c) = curves.iter().find(|c| c.len() != len) {
        return Err(StatsError::LengthMismatch {
            left: len,
            right: c.len(),
        });
    }
    for c in curves {
        check_finite(c)?;
    }
    let n = curves.len() as f64;
    let quantile = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + level / 2.0);
    let mut band = Band {
        mean: Vec::with_capacity(len),
        lower: Vec::with_capacity(len),
        upper: Vec::with_capacity(len),
    };
    let mut column = Vec::with_capacity(curves.len());
    for i in 0..len {
        column.clear();
        column.extend(curves.iter().map(|c| c[i]));
        let m = mean(&column);
        let half = quantile * (variance(&column) / n).sqrt();
        band.mean.push(m);
        band.lower.push(m - half);
        band.upper.push(m + half);
    }
    Ok(band)
}
