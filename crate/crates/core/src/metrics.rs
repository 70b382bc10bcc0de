//! Performance metrics, regime windows and the paired block bootstrap.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::{mean, sample_std, Real};

pub const TRADING_DAYS: f64 = 252.0;
pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("equity curve needs at least 2 points, got {0}")]
    TooShort(usize),
    #[error("equity curve value {value} at index {index} is not positive")]
    NonPositive { index: usize, value: f64 },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("window `{0}` covers fewer than 2 curve points")]
    EmptyWindow(String),
    #[error("window `{label}` starts on {start} but does not end after it ({end})")]
    BadWindow {
        label: String,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("bootstrap needs at least 1000 resamples, got {0}")]
    TooFewResamples(usize),
    #[error("return series is empty")]
    EmptySeries,
}

/// The six headline metrics plus the annualized return behind CR.
/// Ratios with a zero denominator carry `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTable<T> {
    pub sharpe: T,
    pub sortino: T,
    pub calmar: T,
    pub total_return: T,
    pub max_drawdown: T,
    pub volatility: T,
    pub annualized_return: T,
    pub n_returns: usize,
    pub period: Option<(NaiveDate, NaiveDate)>,
}

/// JSON number, or the string `"inf"` / `"-inf"` for infinities.
pub fn serialize_sentinel<S: Serializer>(x: f64, s: S) -> Result<S::Ok, S::Error> {
    if x == f64::INFINITY {
        s.serialize_str("inf")
    } else if x == f64::NEG_INFINITY {
        s.serialize_str("-inf")
    } else {
        s.serialize_f64(x)
    }
}

struct Sentinel(f64);

impl Serialize for Sentinel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serialize_sentinel(self.0, s)
    }
}

impl<T: Real> Serialize for MetricTable<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("MetricTable", 10)?;
        st.serialize_field("sr", &Sentinel(self.sharpe.to_f64_lossy()))?;
        st.serialize_field("sor", &Sentinel(self.sortino.to_f64_lossy()))?;
        st.serialize_field("cr", &Sentinel(self.calmar.to_f64_lossy()))?;
        st.serialize_field("tr", &Sentinel(self.total_return.to_f64_lossy()))?;
        st.serialize_field("mdd", &Sentinel(self.max_drawdown.to_f64_lossy()))?;
        st.serialize_field("vol", &Sentinel(self.volatility.to_f64_lossy()))?;
        st.serialize_field("annualized_return", &Sentinel(self.annualized_return.to_f64_lossy()))?;
        st.serialize_field("n_returns", &self.n_returns)?;
        st.serialize_field("start", &self.period.map(|p| p.0))?;
        st.serialize_field("end", &self.period.map(|p| p.1))?;
        st.end()
    }
}

/// Simple daily returns `V_t / V_{t−1} − 1`.
pub fn daily_returns<T: Real>(curve: &[T]) -> Vec<T> {
    curve.windows(2).map(|w| w[1] / w[0] - T::one()).collect()
}

/// Worst peak-to-trough decline as a fraction of the peak.
pub fn max_drawdown<T: Real>(curve: &[T]) -> T {
    let mut peak = T::neg_infinity();
    let mut worst = T::zero();
    for &v in curve {
        if v > peak {
            peak = v;
        }
        let dd = (peak - v) / peak;
        if dd > worst {
            worst = dd;
        }
    }
    worst
}

fn check_curve<T: Real>(curve: &[T]) -> Result<(), MetricsError> {
    if curve.len() < 2 {
        return Err(MetricsError::TooShort(curve.len()));
    }
    if let Some((index, v)) = curve
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > T::zero() && v.is_finite()))
    {
        return Err(MetricsError::NonPositive {
            index,
            value: v.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Metrics of an equity curve with daily risk-free rate `rf_daily`.
pub fn compute_metrics<T: Real>(curve: &[T], rf_daily: T) -> Result<MetricTable<T>, MetricsError> {
    check_curve(curve)?;
    let returns = daily_returns(curve);
    let n = returns.len();
    let ann = T::lit(TRADING_DAYS);
    let sqrt_ann = ann.sqrt();
    let total_return = curve[n] / curve[0] - T::one();
    let annualized_return = (T::one() + total_return).powf(ann / T::from_count(n)) - T::one();
    let std = sample_std(&returns).unwrap_or(T::zero());
    let excess = mean(&returns) - rf_daily;
    let sharpe = if std < T::lit(1e-12) {
        T::zero()
    } else {
        excess / std * sqrt_ann
    };
    let downside_ss = returns.iter().fold(T::zero(), |acc, &r| {
        let d = (r - rf_daily).min(T::zero());
        acc + d * d
    });
    let downside = (downside_ss / T::from_count(n)).sqrt();
    let sortino = if downside > T::zero() {
        excess / downside * sqrt_ann
    } else if excess > T::zero() {
        T::infinity()
    } else {
        T::zero()
    };
    let max_drawdown = max_drawdown(curve);
    let calmar = if max_drawdown > T::zero() {
        annualized_return / max_drawdown
    } else if annualized_return > T::zero() {
        T::infinity()
    } else {
        T::zero()
    };
    Ok(MetricTable {
        sharpe,
        sortino,
        calmar,
        total_return,
        max_drawdown,
        volatility: std * sqrt_ann,
        annualized_return,
        n_returns: n,
        period: None,
    })
}

/// A named inclusive date range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeWindow {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl RegimeWindow {
    pub fn new(label: &str, start: NaiveDate, end: NaiveDate) -> Result<Self, MetricsError> {
        if start >= end {
            return Err(MetricsError::BadWindow {
                label: label.to_string(),
                start,
                end,
            });
        }
        Ok(Self {
            label: label.to_string(),
            start,
            end,
        })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid preset date")
}

/// Rising, falling and volatile market windows.
pub fn regime_presets() -> Vec<RegimeWindow> {
    vec![
        RegimeWindow {
            label: "rising".into(),
            start: ymd(2020, 4, 1),
            end: ymd(2021, 8, 31),
        },
        RegimeWindow {
            label: "falling".into(),
            start: ymd(2022, 1, 1),
            end: ymd(2022, 6, 30),
        },
        RegimeWindow {
            label: "volatile".into(),
            start: ymd(2022, 5, 1),
            end: ymd(2023, 1, 31),
        },
    ]
}

pub fn regime_preset(label: &str) -> Option<RegimeWindow> {
    regime_presets().into_iter().find(|w| w.label == label)
}

/// Metrics of the sub-curve inside each window, computed independently.
pub fn regime_slice<T: Real>(
    dates: &[NaiveDate],
    curve: &[T],
    rf_daily: T,
    windows: &[RegimeWindow],
) -> Result<Vec<(String, MetricTable<T>)>, MetricsError> {
    if dates.len() != curve.len() {
        return Err(MetricsError::LengthMismatch(dates.len(), curve.len()));
    }
    windows
        .iter()
        .map(|w| {
            let idx: Vec<usize> = (0..dates.len()).filter(|&i| w.contains(dates[i])).collect();
            if idx.len() < 2 {
                return Err(MetricsError::EmptyWindow(w.label.clone()));
            }
            let sub: Vec<T> = idx.iter().map(|&i| curve[i]).collect();
            let mut table = compute_metrics(&sub, rf_daily)?;
            table.period = Some((dates[idx[0]], dates[idx[idx.len() - 1]]));
            Ok((w.label.clone(), table))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapStatistic {
    /// `mean(B − A)`.
    MeanExcess,
    /// Daily Sharpe of B minus daily Sharpe of A.
    SharpeDiff,
}

/// `⌈n^(1/3)⌉`.
pub fn default_block_len(n: usize) -> usize {
    ((n as f64).cbrt().ceil() as usize).max(1)
}

fn daily_sharpe(xs: &[f64]) -> f64 {
    match sample_std(xs) {
        Some(sd) if sd >= 1e-12 => mean(xs) / sd,
        _ => 0.0,
    }
}

fn statistic(stat: BootstrapStatistic, a: &[f64], b: &[f64]) -> f64 {
    match stat {
        BootstrapStatistic::MeanExcess => a.iter().zip(b).map(|(x, y)| y - x).sum::<f64>() / a.len() as f64,
        BootstrapStatistic::SharpeDiff => daily_sharpe(b) - daily_sharpe(a),
    }
}

/// Stationary-bootstrap index path: continue the current block with
/// probability `1 − 1/block_len`, else jump to a uniform start (wrapping).
pub fn stationary_indices(n: usize, block_len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let p_new = 1.0 / block_len.max(1) as f64;
    let mut out = Vec::with_capacity(n);
    let mut i = rng.random_range(0..n);
    for k in 0..n {
        if k > 0 {
            i = if rng.random_bool(p_new) {
                rng.random_range(0..n)
            } else {
                (i + 1) % n
            };
        }
        out.push(i);
    }
    out
}

/// Two-sided p-value of a zero difference between paired series, from the
/// re-centered bootstrap distribution: `(#{|θ* − θ̂| ≥ |θ̂|} + 1)/(B + 1)`.
/// Resample `k` draws from its own ChaCha stream of `seed`.
pub fn bootstrap_test(
    a: &[f64],
    b: &[f64],
    stat: BootstrapStatistic,
    resamples: usize,
    block_len: Option<usize>,
    seed: u64,
) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    if resamples < 1000 {
        return Err(MetricsError::TooFewResamples(resamples));
    }
    let n = a.len();
    let block = block_len.unwrap_or_else(|| default_block_len(n));
    let observed = statistic(stat, a, b);
    let mut ra = vec![0.0; n];
    let mut rb = vec![0.0; n];
    let mut extreme = 0usize;
    for k in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        for (j, i) in stationary_indices(n, block, &mut rng).into_iter().enumerate() {
            ra[j] = a[i];
            rb[j] = b[i];
        }
        let theta = statistic(stat, &ra, &rb);
        if (theta - observed).abs() >= observed.abs() {
            extreme += 1;
        }
    }
    Ok((extreme + 1) as f64 / (resamples + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drawdown_example() {
        let curve = [100.0f64, 120.0, 90.0, 110.0];
        let m = compute_metrics(&curve, 0.0).unwrap();
        assert_eq!(m.max_drawdown, 0.25);
        assert!((m.total_return - 0.10).abs() < 1e-15);
    }

    #[test]
    fn monotone_and_constant_curves() {
        let up = [100.0, 101.0, 103.0, 104.0];
        let m = compute_metrics(&up, 0.0).unwrap();
        assert_eq!(m.max_drawdown, 0.0);
        assert_eq!(m.calmar, f64::INFINITY);
        assert_eq!(m.sortino, f64::INFINITY);

        let flat = [50.0; 5];
        let m = compute_metrics(&flat, 0.0).unwrap();
        assert_eq!(
            (m.total_return, m.volatility, m.sharpe, m.max_drawdown),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn rejects_bad_curves() {
        assert_eq!(compute_metrics(&[1.0f64], 0.0), Err(MetricsError::TooShort(1)));
        assert!(matches!(
            compute_metrics(&[1.0, 0.0], 0.0),
            Err(MetricsError::NonPositive { index: 1, .. })
        ));
    }

    #[test]
    fn sentinel_serialization() {
        let m = compute_metrics(&[100.0, 101.0, 102.0], 0.0).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"cr\":\"inf\""), "{json}");
    }

    #[test]
    fn presets_match_spec_dates() {
        let p = regime_presets();
        assert_eq!((p[1].start, p[1].end), (ymd(2022, 1, 1), ymd(2022, 6, 30)));
        assert!(regime_preset("volatile").is_some());
    }

    #[test]
    fn full_range_window_equals_whole_curve() {
        let dates: Vec<NaiveDate> = (0..6).map(|i| ymd(2020, 4, 1) + chrono::Days::new(i)).collect();
        let curve = [100.0, 99.0, 104.0, 101.0, 107.0, 106.0];
        let w = RegimeWindow::new("all", dates[0], dates[5]).unwrap();
        let sliced = regime_slice(&dates, &curve, 0.0, &[w]).unwrap();
        let mut whole = compute_metrics(&curve, 0.0).unwrap();
        whole.period = Some((dates[0], dates[5]));
        assert_eq!(sliced[0].1, whole);
    }

    #[test]
    fn bootstrap_identical_series() {
        let a: Vec<f64> = (0..50).map(|i| ((i * 7919) % 13) as f64 / 100.0 - 0.06).collect();
        let p = bootstrap_test(&a, &a, BootstrapStatistic::MeanExcess, 1000, None, 1).unwrap();
        assert!(p >= 0.9);
        assert!(bootstrap_test(&a, &a[1..], BootstrapStatistic::MeanExcess, 1000, None, 1).is_err());
    }
}
