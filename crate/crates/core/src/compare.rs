//! Side-by-side comparison of finished backtests: a metric table per
//! strategy, regime sub-tables and bootstrap p-values against a reference.

use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::config::RunConfig;
use crate::coordinator::BacktestReport;
use crate::error::{Error, Result};
use crate::market_data::DataError;
use crate::metrics::{
    bootstrap_test, compute_metrics, daily_returns, regime_slice, BootstrapStatistic, MetricTable, RegimeWindow,
};

/// The parts of a report a comparison needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSeries {
    pub strategy: String,
    pub dates: Vec<NaiveDate>,
    pub equity: Vec<f64>,
    pub rf_daily: f64,
}

impl ReportSeries {
    pub fn from_report(report: &BacktestReport, rf_daily: f64) -> Self {
        Self {
            strategy: report.strategy.to_string(),
            dates: report.dates(),
            equity: report.equity(),
            rf_daily,
        }
    }

    /// Reads `report.json` and `equity.csv` from a report directory.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let json_path = dir.join("report.json");
        let text = std::fs::read_to_string(&json_path).map_err(|source| Error::Io {
            path: json_path.display().to_string(),
            source,
        })?;
        let bad = |message: String| DataError::Invalid {
            path: json_path.display().to_string(),
            line: 0,
            message,
        };
        let json: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let strategy = json["strategy"]
            .as_str()
            .ok_or_else(|| bad("missing `strategy`".into()))?
            .to_string();
        let rf_daily = match json["config"].as_str() {
            Some(c) => RunConfig::from_toml(c, &json_path.display().to_string())?.rl.rf_daily(),
            None => 0.0,
        };
        let csv_path = dir.join("equity.csv");
        let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| DataError::Malformed {
            path: csv_path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        let (mut dates, mut equity) = (Vec::new(), Vec::new());
        for (i, rec) in reader.records().enumerate() {
            let malformed = |message: String| DataError::Malformed {
                path: csv_path.display().to_string(),
                line: i as u64 + 2,
                message,
            };
            let rec = rec.map_err(|e| malformed(e.to_string()))?;
            let date = rec
                .get(0)
                .unwrap_or_default()
                .parse::<NaiveDate>()
                .map_err(|e| malformed(e.to_string()))?;
            let value = rec
                .get(1)
                .unwrap_or_default()
                .parse::<f64>()
                .map_err(|e| malformed(e.to_string()))?;
            dates.push(date);
            equity.push(value);
        }
        Ok(Self {
            strategy,
            dates,
            equity,
            rf_daily,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub metrics: MetricTable<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PValueRow {
    pub reference: String,
    pub strategy: String,
    pub mean_excess: f64,
    pub sharpe_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeTable {
    pub label: String,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub p_values: Vec<PValueRow>,
    pub regimes: Vec<RegimeTable>,
}

/// Compares reports over identical dates. `reference` names the strategy
/// the others are tested against; it defaults to the first report.
pub fn compare(
    reports: &[ReportSeries],
    reference: Option<&str>,
    windows: &[RegimeWindow],
    resamples: usize,
    seed: u64,
) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::Run("compare needs at least two reports".into()));
    }
    for r in &reports[1..] {
        if r.dates != reports[0].dates {
            return Err(DataError::Invalid {
                path: r.strategy.clone(),
                line: 0,
                message: format!("date range differs from `{}`", reports[0].strategy),
            }
            .into());
        }
    }
    let ref_idx = match reference {
        Some(name) => reports.iter().position(|r| r.strategy == name).unwrap_or(0),
        None => 0,
    };
    let rows = reports
        .iter()
        .map(|r| {
            Ok(ComparisonRow {
                strategy: r.strategy.clone(),
                metrics: compute_metrics(&r.equity, r.rf_daily)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let base = daily_returns(&reports[ref_idx].equity);
    let mut p_values = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        if i == ref_idx {
            continue;
        }
        let other = daily_returns(&r.equity);
        p_values.push(PValueRow {
            reference: reports[ref_idx].strategy.clone(),
            strategy: r.strategy.clone(),
            mean_excess: bootstrap_test(&other, &base, BootstrapStatistic::MeanExcess, resamples, None, seed)?,
            sharpe_diff: bootstrap_test(&other, &base, BootstrapStatistic::SharpeDiff, resamples, None, seed)?,
        });
    }
    let regimes = windows
        .iter()
        .filter_map(|w| {
            let rows: Option<Vec<ComparisonRow>> = reports
                .iter()
                .map(|r| {
                    let mut t = regime_slice(&r.dates, &r.equity, r.rf_daily, std::slice::from_ref(w)).ok()?;
                    Some(ComparisonRow {
                        strategy: r.strategy.clone(),
                        metrics: t.pop()?.1,
                    })
                })
                .collect();
            rows.map(|rows| RegimeTable {
                label: w.label.clone(),
                rows,
            })
        })
        .collect();
    Ok(Comparison {
        rows,
        p_values,
        regimes,
    })
}

fn fmt_value(x: f64, percent: bool) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if percent {
        format!("{:.2}", x * 100.0)
    } else {
        format!("{x:.4}")
    }
}

/// `strategy,SR,SoR,CR,TR(%),MDD(%),Vol(%)`.
pub fn write_table<W: std::io::Write>(dst: W, rows: &[ComparisonRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(dst);
    w.write_record(["strategy", "SR", "SoR", "CR", "TR(%)", "MDD(%)", "Vol(%)"])?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.strategy.clone(),
            fmt_value(m.sharpe, false),
            fmt_value(m.sortino, false),
            fmt_value(m.calmar, false),
            fmt_value(m.total_return, true),
            fmt_value(m.max_drawdown, true),
            fmt_value(m.volatility, true),
        ])?;
    }
    w.flush()
}

/// `reference,strategy,p_mean_excess,p_sharpe_diff`.
pub fn write_p_values<W: std::io::Write>(dst: W, rows: &[PValueRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(dst);
    w.write_record(["reference", "strategy", "p_mean_excess", "p_sharpe_diff"])?;
    for r in rows {
        w.write_record([
            r.reference.clone(),
            r.strategy.clone(),
            r.mean_excess.to_string(),
            r.sharpe_diff.to_string(),
        ])?;
    }
    w.flush()
}
