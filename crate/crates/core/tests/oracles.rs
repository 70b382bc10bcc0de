mod common;

use chrono::Days;
use common::{bar_slice, context, dataset, date, small_config};
use deltahedge_core::baselines::{kdj, rsi, KdjParams};
use deltahedge_core::coordinator::run_backtest;
use deltahedge_core::metrics::{compute_metrics, max_drawdown};
use deltahedge_core::portfolio::{portfolio_value, PortfolioState};

const HIGH: [f64; 20] = [
    106., 98., 106., 99., 107., 108., 107., 105., 105., 95., 101., 107., 100., 105., 95., 96., 95., 100., 102., 98.,
];
const LOW: [f64; 20] = [
    102., 96., 103., 98., 105., 104., 104., 101., 100., 94., 99., 103., 96., 103., 92., 96., 93., 97., 101., 95.,
];
const CLOSE: [f64; 20] = [
    103., 98., 105., 99., 106., 105., 105., 104., 102., 94., 101., 106., 97., 104., 94., 96., 95., 99., 101., 97.,
];

// Exact rational recursion, rounded once at the end.
const KD: [(f64, f64); 12] = [
    (50.0, 50.0),
    (33.333333333333336, 44.44444444444444),
    (38.888888888888886, 42.592592592592595),
    (54.4973544973545, 46.560846560846564),
    (43.47442680776014, 45.53203997648442),
    (52.79247501469724, 47.952184989222026),
    (39.63942778757593, 45.18126592200666),
    (35.31517408060618, 41.89256864153983),
    (30.210116053737455, 37.99841777893904),
    (35.695632924713856, 37.230822827530645),
    (43.797088616475904, 39.4195780905124),
    (40.30917018876171, 39.71610878992884),
];
const RSI14: [f64; 6] = [
    44.0,
    45.56331006979063,
    44.88855307895731,
    48.19347542219624,
    49.814003953204804,
    46.66971770814754,
];

#[test]
fn kdj_matches_hand_computed_series() {
    let start = date(2024, 1, 1);
    let slices: Vec<_> = (0..20)
        .map(|i| bar_slice(start + Days::new(i as u64), HIGH[i], LOW[i], CLOSE[i]))
        .collect();
    let out = kdj(
        &slices,
        &KdjParams {
            period: 9,
            k_smooth: 3,
            d_smooth: 3,
        },
    );
    assert!(out[..8].iter().all(Option::is_none));
    for (got, want) in out[8..].iter().zip(KD) {
        let (k, d) = got.expect("warm");
        assert!(
            (k - want.0).abs() < 1e-9 && (d - want.1).abs() < 1e-9,
            "{k} {d} vs {want:?}"
        );
    }
}

#[test]
fn wilder_rsi_matches_hand_computed_series() {
    let out = rsi(&CLOSE, 14);
    assert!(out[..14].iter().all(Option::is_none));
    for (got, want) in out[14..].iter().zip(RSI14) {
        assert!((got.unwrap() - want).abs() < 1e-9);
    }
}

#[test]
fn drawdown_peak_to_trough() {
    assert!((max_drawdown(&[100.0f64, 120.0, 90.0, 110.0]) - 0.25).abs() < 1e-15);
    assert_eq!(max_drawdown(&[1.0f64, 2.0, 3.0]), 0.0);
}

#[test]
fn buy_and_hold_closed_form() {
    let cfg = small_config("buy_and_hold", 0);
    let data = dataset(260, 3, Vec::new());
    let market = context(&data, &cfg);
    let report = run_backtest(&cfg, &market).unwrap();
    let start = 120;
    let p0 = market.slice(start).close();
    let c = cfg.run.initial_cash;
    let unit = p0 * (1.0 + cfg.costs.equity_rate);
    let n = (c / unit).floor();
    let residual = c - n * p0 - cfg.costs.equity_rate * p0 * n;
    assert_eq!(report.rows.len(), market.len() - start);
    for (k, row) in report.rows.iter().enumerate() {
        let close = market.slice(start + k).close();
        assert_eq!(row.shares as f64, n);
        let want = residual + n * close;
        assert!(
            (row.value - want).abs() <= 1e-9 * want,
            "day {k}: {} vs {want}",
            row.value
        );
    }
}

#[test]
fn equity_curve_reconstructs_from_holdings() {
    let cfg = small_config("classic_delta", 200);
    let data = dataset(300, 5, Vec::new());
    let market = context(&data, &cfg);
    let report = run_backtest(&cfg, &market).unwrap();
    assert!(
        report.trades.iter().any(|t| t.spec.is_some()),
        "the run should trade puts"
    );
    let start = market.len() - report.rows.len();
    let mut prev: Option<f64> = None;
    for (k, row) in report.rows.iter().enumerate() {
        let slice = market.slice(start + k);
        let equity = row.cash + row.shares as f64 * slice.close();
        assert!(row.value >= equity - 1e-9 * row.value || row.contracts == 0);
        if row.contracts == 0 {
            let state = PortfolioState {
                date: slice.date,
                cash: row.cash,
                shares: row.shares,
                positions: Vec::new(),
            };
            let v = portfolio_value(&state, slice, &cfg.engine_params().marks);
            assert!((v - row.value).abs() <= 1e-9 * v);
        }
        match prev {
            None => assert!(row.ret.is_none()),
            Some(p) => assert!((row.ret.unwrap() - (row.value / p - 1.0)).abs() < 1e-12),
        }
        prev = Some(row.value);
    }
    let compounded = report
        .rows
        .iter()
        .filter_map(|r| r.ret)
        .fold(report.rows[0].value, |v, r| v * (1.0 + r));
    let last = report.rows.last().unwrap().value;
    assert!((compounded - last).abs() <= 1e-9 * last);
    let m = compute_metrics(&report.equity(), cfg.engine_params().rf_daily).unwrap();
    assert!((m.total_return - (last / report.rows[0].value - 1.0)).abs() < 1e-12);
}
