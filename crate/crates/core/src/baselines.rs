//! Comparison strategies: buy-and-hold, a KDJ crossover with an RSI filter,
//! and the hedging ablations. Each is a decision rule for the coordinator's
//! trade and hedge phases.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{HedgeRatio, TradingAction};
use crate::coordinator::{DayView, Decision, HedgeRule, TradeRule};
use crate::error::Result;
use crate::market_data::MarketSlice;
use crate::rl::LearnerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    BuyAndHold,
    KdjRsi,
    StandaloneRl,
    ClassicDelta,
    NoHedge,
    SingleHedger(LearnerKind),
    DeltaHedge,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 9] = [
        StrategyKind::BuyAndHold,
        StrategyKind::KdjRsi,
        StrategyKind::StandaloneRl,
        StrategyKind::ClassicDelta,
        StrategyKind::NoHedge,
        StrategyKind::SingleHedger(LearnerKind::ClippedPg),
        StrategyKind::SingleHedger(LearnerKind::AdvantageAc),
        StrategyKind::SingleHedger(LearnerKind::DeterministicAc),
        StrategyKind::DeltaHedge,
    ];

    /// Whether the strategy needs a trained trading policy.
    pub fn uses_trading_policy(self) -> bool {
        !matches!(self, StrategyKind::BuyAndHold | StrategyKind::KdjRsi)
    }

    /// Hedging candidates trained each cycle.
    pub fn hedging_candidates(self, ensemble: &[LearnerKind]) -> Vec<LearnerKind> {
        match self {
            StrategyKind::DeltaHedge => ensemble.to_vec(),
            StrategyKind::SingleHedger(kind) => vec![kind],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::BuyAndHold => f.write_str("buy_and_hold"),
            StrategyKind::KdjRsi => f.write_str("kdj_rsi"),
            StrategyKind::StandaloneRl => f.write_str("standalone_rl"),
            StrategyKind::ClassicDelta => f.write_str("classic_delta"),
            StrategyKind::NoHedge => f.write_str("no_hedge"),
            StrategyKind::SingleHedger(k) => write!(f, "single_hedger:{k}"),
            StrategyKind::DeltaHedge => f.write_str("deltahedge"),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let kind = match s {
            "buy_and_hold" => StrategyKind::BuyAndHold,
            "kdj_rsi" => StrategyKind::KdjRsi,
            "standalone_rl" => StrategyKind::StandaloneRl,
            "classic_delta" => StrategyKind::ClassicDelta,
            "no_hedge" => StrategyKind::NoHedge,
            "deltahedge" => StrategyKind::DeltaHedge,
            other => {
                let learner = other
                    .strip_prefix("single_hedger:")
                    .and_then(LearnerKind::parse)
                    .ok_or_else(|| format!("unknown strategy `{other}`"))?;
                StrategyKind::SingleHedger(learner)
            }
        };
        Ok(kind)
    }
}

/// Fully invests on the first day, then holds.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuyAndHold;

impl TradeRule for BuyAndHold {
    fn trade(&self, view: &DayView<'_>) -> Result<Decision<TradingAction>> {
        let a = if view.day == 0 { 1.0 } else { 0.0 };
        Ok(Decision::silent(TradingAction::new(a)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdjParams {
    pub period: usize,
    pub k_smooth: usize,
    pub d_smooth: usize,
}

impl Default for KdjParams {
    fn default() -> Self {
        Self {
            period: 9,
            k_smooth: 3,
            d_smooth: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsiParams {
    pub period: usize,
    pub upper: f64,
    pub lower: f64,
}

impl Default for RsiParams {
    fn default() -> Self {
        Self {
            period: 14,
            upper: 70.0,
            lower: 30.0,
        }
    }
}

/// `(K, D)` per bar, `None` until `period` bars are available. RSV is 50
/// on a flat window; K and D start from 50.
pub fn kdj(slices: &[MarketSlice], p: &KdjParams) -> Vec<Option<(f64, f64)>> {
    let mut out = Vec::with_capacity(slices.len());
    let (mut k, mut d) = (50.0, 50.0);
    let (ka, da) = (1.0 / p.k_smooth as f64, 1.0 / p.d_smooth as f64);
    for t in 0..slices.len() {
        if t + 1 < p.period {
            out.push(None);
            continue;
        }
        let window = &slices[t + 1 - p.period..=t];
        let lo = window.iter().map(|s| s.bar.low).fold(f64::INFINITY, f64::min);
        let hi = window.iter().map(|s| s.bar.high).fold(f64::NEG_INFINITY, f64::max);
        let rsv = if hi > lo {
            (slices[t].close() - lo) / (hi - lo) * 100.0
        } else {
            50.0
        };
        k = (1.0 - ka) * k + ka * rsv;
        d = (1.0 - da) * d + da * k;
        out.push(Some((k, d)));
    }
    out
}

/// Wilder RSI per bar, `None` until `period + 1` closes are available.
/// A window without moves reads 50.
pub fn rsi(closes: &[f64], period: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; closes.len()];
    if closes.len() <= period {
        return out;
    }
    let moves: Vec<f64> = closes.windows(2).map(|w| w[1] - w[0]).collect();
    let n = period as f64;
    let mut gain = moves[..period].iter().map(|m| m.max(0.0)).sum::<f64>() / n;
    let mut loss = moves[..period].iter().map(|m| (-m).max(0.0)).sum::<f64>() / n;
    let value = |g: f64, l: f64| {
        if l == 0.0 {
            if g == 0.0 {
                50.0
            } else {
                100.0
            }
        } else {
            100.0 - 100.0 / (1.0 + g / l)
        }
    };
    out[period] = Some(value(gain, loss));
    for t in period + 1..closes.len() {
        let m = moves[t - 1];
        gain = (gain * (n - 1.0) + m.max(0.0)) / n;
        loss = (loss * (n - 1.0) + (-m).max(0.0)) / n;
        out[t] = Some(value(gain, loss));
    }
    out
}

/// Signal on the last bar of `slices`: `1` on a K-over-D cross with RSI
/// below the upper threshold, `-1` on a K-under-D cross with RSI above the
/// lower threshold, else `0`.
pub fn kdj_rsi_signal(slices: &[MarketSlice], kp: &KdjParams, rp: &RsiParams) -> f64 {
    let t = slices.len();
    if t < 2 {
        return 0.0;
    }
    let kd = kdj(slices, kp);
    let closes: Vec<f64> = slices.iter().map(MarketSlice::close).collect();
    let r = rsi(&closes, rp.period);
    let (Some((k0, d0)), Some((k1, d1)), Some(rsi_t)) = (kd[t - 2], kd[t - 1], r[t - 1]) else {
        return 0.0;
    };
    if k0 <= d0 && k1 > d1 && rsi_t < rp.upper {
        1.0
    } else if k0 >= d0 && k1 < d1 && rsi_t > rp.lower {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KdjRsi {
    pub kdj: KdjParams,
    pub rsi: RsiParams,
}

impl TradeRule for KdjRsi {
    fn trade(&self, view: &DayView<'_>) -> Result<Decision<TradingAction>> {
        let a = kdj_rsi_signal(view.history(), &self.kdj, &self.rsi);
        Ok(Decision::silent(TradingAction::new(a)?))
    }
}

/// `α = 1` while the regime indicator is bearish, no new puts otherwise.
pub fn classic_delta_alpha(regime_score: f64) -> Option<HedgeRatio> {
    (regime_score < 0.0).then(HedgeRatio::full)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ClassicDelta;

impl HedgeRule for ClassicDelta {
    fn hedge(&self, view: &DayView<'_>) -> Result<Decision<Option<HedgeRatio>>> {
        Ok(Decision::silent(classic_delta_alpha(view.signals().regime.score)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::Bar;
    use chrono::NaiveDate;

    fn slices(closes: &[f64]) -> Vec<MarketSlice> {
        let d0 = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        closes
            .iter()
            .enumerate()
            .map(|(i, &c)| MarketSlice {
                date: d0 + chrono::Days::new(i as u64),
                bar: Bar {
                    date: d0 + chrono::Days::new(i as u64),
                    open: c,
                    high: c,
                    low: c,
                    close: c,
                    volume: 1,
                },
                puts: Vec::new(),
                sentiment: 50.0,
                vix: 20.0,
            })
            .collect()
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.to_string().parse::<StrategyKind>().unwrap(), k);
        }
        assert_eq!(
            "single_hedger:ppo".parse::<StrategyKind>().unwrap(),
            StrategyKind::SingleHedger(LearnerKind::ClippedPg)
        );
        assert!("martingale".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn flat_series_never_signals() {
        let s = slices(&[100.0; 40]);
        for t in 1..=s.len() {
            assert_eq!(
                kdj_rsi_signal(&s[..t], &KdjParams::default(), &RsiParams::default()),
                0.0
            );
        }
        assert_eq!(rsi(&[5.0; 20], 14)[19], Some(50.0));
    }

    #[test]
    fn classic_delta_boundaries() {
        assert_eq!(classic_delta_alpha(-0.2), Some(HedgeRatio::full()));
        assert_eq!(classic_delta_alpha(0.2), None);
        assert_eq!(classic_delta_alpha(0.0), None);
    }
}
