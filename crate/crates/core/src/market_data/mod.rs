//! Input feeds: daily bars, the put/call chain, sentiment scores and VIX.
//!
//! Loaders validate every row and reject the file on the first violation,
//! reporting the offending line. [`align_calendar`] turns the four feeds into
//! one [`MarketSlice`] per bar date, and [`synth`] generates seeded datasets
//! with the same schema.

mod align;
mod io;
pub mod synth;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::{align_calendar, SignalRequirement};
pub use io::{
    load_bars, load_option_chain, load_sentiment, load_vix, read_bars, read_option_chain, read_sentiment, read_vix,
    write_bars, write_option_chain, write_sentiment, write_vix,
};
pub use synth::{synth_generate, Dataset, RegimeShock, SynthParams};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: header mismatch, expected `{expected}`, found `{found}`")]
    Header {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}:{line}: malformed row: {message}")]
    Malformed { path: String, line: u64, message: String },
    #[error("{path}:{line}: {message}")]
    Invalid { path: String, line: u64, message: String },
    #[error("{path}:{line}: duplicate entry for {date}")]
    Duplicate { path: String, line: u64, date: NaiveDate },
    #[error("{path}:{line}: date {date} is not after the previous row")]
    NonMonotone { path: String, line: u64, date: NaiveDate },
    #[error("bar series is empty")]
    EmptyBars,
    #[error("{feed} feed is empty but the run requires it")]
    MissingFeed { feed: &'static str },
    #[error("invalid synthetic data parameters: {0}")]
    Synth(String),
}

/// One daily OHLCV bar. The close is the price the engine trades at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionRight {
    Put,
    Call,
}

impl OptionRight {
    pub fn as_str(self) -> &'static str {
        match self {
            OptionRight::Put => "put",
            OptionRight::Call => "call",
        }
    }
}

/// A dated option quote. Prices are per share of underlying.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub date: NaiveDate,
    pub expiry: NaiveDate,
    pub strike: f64,
    pub right: OptionRight,
    pub bid: f64,
    pub ask: f64,
    pub delta: Option<f64>,
    pub volume: u64,
    pub open_interest: u64,
}

impl OptionQuote {
    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }

    /// Calendar days to expiry.
    pub fn dte(&self) -> i64 {
        (self.expiry - self.date).num_days()
    }

    /// Contracts that can be executed today.
    pub fn liquidity(&self) -> u64 {
        self.volume.min(self.open_interest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentRecord {
    pub date: NaiveDate,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VixRecord {
    pub date: NaiveDate,
    pub level: f64,
}

/// Everything the engine sees on one trading day.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSlice {
    pub date: NaiveDate,
    pub bar: Bar,
    /// Put quotes dated today; may be empty.
    pub puts: Vec<OptionQuote>,
    pub sentiment: f64,
    pub vix: f64,
}

impl MarketSlice {
    pub fn close(&self) -> f64 {
        self.bar.close
    }
}
