//! Forecast, sentiment and regime signals. Every signal at day `t` is a
//! function of data dated at or before `t`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::market_data::{Bar, MarketSlice};

/// Bars in a forecaster input window.
pub const FORECAST_WINDOW: usize = 60;
/// Trading days the forecast horizon covers.
pub const FORECAST_HORIZON: usize = 30;
pub const NEUTRAL_SENTIMENT: f64 = 50.0;
const MOMENTUM_CLAMP: f64 = 0.5;

/// Expected fractional price change over the next 30 trading days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub date: NaiveDate,
    pub value: f64,
}

/// Continuous regime score; negative reads as bearish.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeIndicator {
    pub date: NaiveDate,
    pub score: f64,
}

impl RegimeIndicator {
    pub fn is_bearish(&self) -> bool {
        self.score < 0.0
    }
}

/// A price forecaster fed the trailing 60-bar window ending at `t`.
///
/// Implementations must be pure functions of the window.
pub trait Forecaster: Send + Sync {
    /// `None` when fewer than [`FORECAST_WINDOW`] bars are supplied. Longer
    /// inputs are cut to their trailing window.
    fn forecast(&self, history: &[Bar]) -> Option<Forecast>;
}

/// Thirty times the mean daily log return of the window, clamped to ±0.5.
#[derive(Debug, Clone, Copy, Default)]
pub struct MomentumForecaster;

impl Forecaster for MomentumForecaster {
    fn forecast(&self, history: &[Bar]) -> Option<Forecast> {
        if history.len() < FORECAST_WINDOW {
            return None;
        }
        let window = &history[history.len() - FORECAST_WINDOW..];
        let n = (window.len() - 1) as f64;
        let total: f64 = window.windows(2).map(|w| (w[1].close / w[0].close).ln()).sum();
        let value = (FORECAST_HORIZON as f64 * total / n).clamp(-MOMENTUM_CLAMP, MOMENTUM_CLAMP);
        Some(Forecast {
            date: window[window.len() - 1].date,
            value,
        })
    }
}

/// Mean of the day's scores; neutral when there are none.
pub fn aggregate_sentiment(scores: &[f64]) -> f64 {
    if scores.is_empty() {
        return NEUTRAL_SENTIMENT;
    }
    (scores.iter().sum::<f64>() / scores.len() as f64).clamp(0.0, 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimeParams {
    pub w_f: f64,
    pub w_s: f64,
    pub tanh_scale: f64,
    pub use_vix: bool,
    pub w_v: f64,
}

impl Default for RegimeParams {
    fn default() -> Self {
        Self {
            w_f: 0.5,
            w_s: 0.5,
            tanh_scale: 0.05,
            use_vix: false,
            w_v: 0.5,
        }
    }
}

/// `w_f·tanh(f/scale) + w_s·(sent − 50)/50`, optionally `− w_v·(vix − 20)/20`.
pub fn regime_score(
    date: NaiveDate,
    forecast: f64,
    sentiment: f64,
    vix: f64,
    params: &RegimeParams,
) -> RegimeIndicator {
    let mut score = params.w_f * (forecast / params.tanh_scale).tanh()
        + params.w_s * (sentiment - NEUTRAL_SENTIMENT) / NEUTRAL_SENTIMENT;
    if params.use_vix {
        score -= params.w_v * (vix - 20.0) / 20.0;
    }
    RegimeIndicator { date, score }
}

/// Signals available to the agents on one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailySignals {
    pub date: NaiveDate,
    /// Zero when the forecaster had too little history.
    pub forecast: f64,
    pub forecast_missing: bool,
    pub sentiment: f64,
    pub vix: f64,
    pub regime: RegimeIndicator,
}

/// Signals for every slice, each computed from data up to its own date.
pub fn compute_signals(
    slices: &[MarketSlice],
    forecaster: &dyn Forecaster,
    params: &RegimeParams,
) -> Vec<DailySignals> {
    let bars: Vec<Bar> = slices.iter().map(|s| s.bar).collect();
    slices
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let fc = forecaster.forecast(&bars[..=t]);
            let forecast = fc.map_or(0.0, |f| f.value);
            DailySignals {
                date: s.date,
                forecast,
                forecast_missing: fc.is_none(),
                sentiment: s.sentiment,
                vix: s.vix,
                regime: regime_score(s.date, forecast, s.sentiment, s.vix, params),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Days;

    fn series(log_rets: impl Fn(usize) -> f64, n: usize) -> Vec<Bar> {
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let mut p = 100.0;
        (0..n)
            .map(|i| {
                if i > 0 {
                    p *= log_rets(i).exp();
                }
                Bar {
                    date: d0 + Days::new(i as u64),
                    open: p,
                    high: p,
                    low: p,
                    close: p,
                    volume: 1,
                }
            })
            .collect()
    }

    #[test]
    fn momentum_limits() {
        let f = MomentumForecaster;
        assert_eq!(f.forecast(&series(|_| 0.0, 60)).unwrap().value, 0.0);
        assert!(f.forecast(&series(|_| 0.002, 60)).unwrap().value > 0.0);
        let steady = f.forecast(&series(|_| 0.001, 60)).unwrap().value;
        assert!((steady - 0.03).abs() < 1e-12, "{steady}");
        let alt = f
            .forecast(&series(|i| if i % 2 == 0 { 0.001 } else { -0.001 }, 61))
            .unwrap()
            .value;
        assert!(alt.abs() < 1e-3);
        assert_eq!(f.forecast(&series(|_| 0.05, 60)).unwrap().value, 0.5);
        assert!(f.forecast(&series(|_| 0.0, 59)).is_none());
    }

    #[test]
    fn momentum_is_pure() {
        let w = series(|i| ((i * 7919) % 13) as f64 * 1e-3 - 6e-3, 60);
        assert_eq!(MomentumForecaster.forecast(&w), MomentumForecaster.forecast(&w));
    }

    #[test]
    fn sentiment_mean() {
        assert_eq!(aggregate_sentiment(&[80.0, 60.0]), 70.0);
        assert_eq!(aggregate_sentiment(&[]), 50.0);
        assert_eq!(aggregate_sentiment(&[30.0]), 30.0);
    }

    #[test]
    fn regime_signs() {
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let p = RegimeParams::default();
        assert_eq!(regime_score(d, 0.0, 50.0, 20.0, &p).score, 0.0);
        assert!(!regime_score(d, 0.0, 50.0, 20.0, &p).is_bearish());
        assert!(regime_score(d, 0.02, 65.0, 20.0, &p).score > 0.0);
        assert!(regime_score(d, -0.05, 20.0, 20.0, &p).is_bearish());
        let with_vix = RegimeParams { use_vix: true, ..p };
        assert!(regime_score(d, 0.0, 50.0, 40.0, &with_vix).is_bearish());
    }

    #[test]
    fn regime_strictly_increasing() {
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let p = RegimeParams::default();
        for i in 0..50 {
            let f = -0.3 + i as f64 * 0.012;
            let s = i as f64 * 2.0;
            assert!(regime_score(d, f + 1e-3, 50.0, 20.0, &p).score > regime_score(d, f, 50.0, 20.0, &p).score);
            assert!(regime_score(d, 0.0, s + 0.5, 20.0, &p).score > regime_score(d, 0.0, s, 20.0, &p).score);
        }
    }
}
