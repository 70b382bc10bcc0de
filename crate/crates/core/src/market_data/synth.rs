//! Seeded four-feed datasets: GBM closes, a daily ATM put ladder priced by
//! Black–Scholes, noisy neutral sentiment and a VIX proxy tracking the
//! generating volatility.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Bar, DataError, OptionQuote, OptionRight, SentimentRecord, VixRecord};
use crate::options_pricing::{bs_put_delta, bs_put_price, year_fraction, PricingInputs};

const TRADING_DAYS: f64 = 252.0;

/// A stretch of days with its own drift and volatility (both annualized).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeShock {
    pub start_day: usize,
    pub days: usize,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub n_days: usize,
    pub s0: f64,
    /// Annualized drift.
    pub mu: f64,
    /// Annualized volatility.
    pub sigma: f64,
    /// Annualized rate used to price the chain.
    pub rate: f64,
    pub start: NaiveDate,
    pub shocks: Vec<RegimeShock>,
    /// Strikes on each side of ATM.
    pub strikes_each_side: usize,
    /// Strike spacing as a fraction of spot.
    pub strike_spacing: f64,
    pub expiry_days: u64,
    pub option_volume: u64,
    pub open_interest: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 7,
            n_days: 1500,
            s0: 100.0,
            mu: 0.08,
            sigma: 0.2,
            rate: 0.0,
            start: NaiveDate::from_ymd_opt(2016, 1, 4).expect("valid date"),
            shocks: Vec::new(),
            strikes_each_side: 5,
            strike_spacing: 0.01,
            expiry_days: 30,
            option_volume: 1_000,
            open_interest: 5_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub bars: Vec<Bar>,
    pub options: Vec<OptionQuote>,
    pub sentiment: Vec<SentimentRecord>,
    pub vix: Vec<VixRecord>,
}

fn is_weekend(d: NaiveDate) -> bool {
    matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
}

fn next_weekday(mut d: NaiveDate) -> NaiveDate {
    while is_weekend(d) {
        d = d + Days::new(1);
    }
    d
}

/// Weekday calendar of `n` trading days starting at (or after) `start`.
pub fn weekday_calendar(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = next_weekday(start);
    while out.len() < n {
        out.push(d);
        d = next_weekday(d + Days::new(1));
    }
    out
}

fn regime_at(params: &SynthParams, day: usize) -> (f64, f64) {
    params
        .shocks
        .iter()
        .rev()
        .find(|s| day >= s.start_day && day < s.start_day + s.days)
        .map_or((params.mu, params.sigma), |s| (s.mu, s.sigma))
}

fn round_cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn synth_generate(params: &SynthParams) -> Result<Dataset, DataError> {
    if params.n_days < 2 {
        return Err(DataError::Synth(format!(
            "n_days must be at least 2, got {}",
            params.n_days
        )));
    }
    if !(params.s0.is_finite() && params.s0 > 0.0) {
        return Err(DataError::Synth(format!("s0 must be positive, got {}", params.s0)));
    }
    let vols_ok = std::iter::once(params.sigma)
        .chain(params.shocks.iter().map(|s| s.sigma))
        .all(|v| v.is_finite() && v > 0.0);
    if !vols_ok {
        return Err(DataError::Synth("sigma must be positive".into()));
    }
    if params.strike_spacing.is_nan() || params.strike_spacing <= 0.0 {
        return Err(DataError::Synth("strike spacing must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let dates = weekday_calendar(params.start, params.n_days);
    let dt = 1.0 / TRADING_DAYS;
    let mut out = Dataset::default();
    let mut close = params.s0;

    for (day, &date) in dates.iter().enumerate() {
        let (mu, sigma) = regime_at(params, day);
        let open = close;
        if day > 0 {
            let z: f64 = rng.sample(StandardNormal);
            close = open * ((mu - 0.5 * sigma * sigma) * dt + sigma * dt.sqrt() * z).exp();
        }
        let wick_hi: f64 = rng.sample::<f64, _>(StandardNormal).abs();
        let wick_lo: f64 = rng.sample::<f64, _>(StandardNormal).abs();
        let wick = 0.25 * sigma * dt.sqrt();
        let volume = 1_000_000 + rng.random_range(0..200_000u64);
        out.bars.push(Bar {
            date,
            open,
            high: open.max(close) * (1.0 + wick * wick_hi),
            low: open.min(close) * (1.0 - wick * wick_lo).max(0.5),
            close,
            volume,
        });

        let expiry = next_weekday(date + Days::new(params.expiry_days));
        let t = year_fraction::<f64>((expiry - date).num_days());
        let side = params.strikes_each_side as i64;
        for k in -side..=side {
            let strike = round_cents(close * (1.0 + params.strike_spacing * k as f64));
            let inputs = PricingInputs::new(close, strike, t, params.rate, sigma)
                .map_err(|e| DataError::Synth(e.to_string()))?;
            let theo = bs_put_price(&inputs);
            let half = 0.5 * (0.01 * theo).max(0.02);
            out.options.push(OptionQuote {
                date,
                expiry,
                strike,
                right: OptionRight::Put,
                bid: (theo - half).max(0.0),
                ask: theo + half,
                delta: Some(bs_put_delta(&inputs)),
                volume: params.option_volume,
                open_interest: params.open_interest,
            });
        }

        let noise: f64 = rng.random_range(-15.0..15.0);
        out.sentiment.push(SentimentRecord {
            date,
            score: (50.0 + noise).clamp(0.0, 100.0),
        });
        let vix_noise: f64 = rng.sample(StandardNormal);
        out.vix.push(VixRecord {
            date,
            level: (sigma * 100.0 + vix_noise).max(1.0),
        });
    }
    out.options.sort_by(|a, b| {
        (a.date, a.expiry)
            .cmp(&(b.date, b.expiry))
            .then(a.strike.total_cmp(&b.strike))
    });
    Ok(out)
}
