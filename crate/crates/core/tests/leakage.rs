mod common;

use common::{context, dataset, small_config};
use deltahedge_core::coordinator::{run_backtest, HoldTrader};
use deltahedge_core::ensemble::{run_cycle, RetrainSchedule};
use deltahedge_core::market_data::Dataset;
use deltahedge_core::rl::LearnerKind;

/// Distorts every feed dated on or after `cut`.
fn mutate_after(data: &Dataset, cut: usize) -> Dataset {
    let cut_date = data.bars[cut].date;
    let mut out = data.clone();
    for b in out.bars.iter_mut().filter(|b| b.date >= cut_date) {
        b.open *= 0.6;
        b.high *= 0.6;
        b.low *= 0.6;
        b.close *= 0.6;
    }
    for q in out.options.iter_mut().filter(|q| q.date >= cut_date) {
        q.bid *= 3.0;
        q.ask *= 3.0;
        q.volume = 1;
    }
    for s in out.sentiment.iter_mut().filter(|s| s.date >= cut_date) {
        s.score = 100.0 - s.score;
    }
    for v in out.vix.iter_mut().filter(|v| v.date >= cut_date) {
        v.level *= 2.5;
    }
    out
}

#[test]
fn cycle_selection_ignores_data_from_deployment_on() {
    let cfg = small_config("deltahedge", 300);
    let data = dataset(200, 21, Vec::new());
    let deploy = 150;
    let a = context(&data, &cfg);
    let b = context(&mutate_after(&data, deploy), &cfg);
    let kinds = [
        LearnerKind::ClippedPg,
        LearnerKind::AdvantageAc,
        LearnerKind::DeterministicAc,
    ];
    let settings = cfg.training_settings();
    let schedule = RetrainSchedule::default();
    let run = |m| {
        run_cycle(
            &cfg.engine_params(),
            m,
            &schedule,
            deploy,
            &HoldTrader,
            &kinds,
            &settings,
            5,
        )
        .unwrap()
        .unwrap()
    };
    let (x, y) = (run(&a), run(&b));
    assert_eq!(x.selected, y.selected);
    for (p, q) in x.results.iter().zip(&y.results) {
        assert_eq!(p.validation_returns, q.validation_returns);
        assert_eq!(p.policy, q.policy);
    }
}

#[test]
fn backtest_prefix_ignores_later_data() {
    for strategy in ["deltahedge", "kdj_rsi", "classic_delta"] {
        let cfg = small_config(strategy, 200);
        let data = dataset(320, 4, Vec::new());
        let cut = 250;
        let a = run_backtest(&cfg, &context(&data, &cfg)).unwrap();
        let b = run_backtest(&cfg, &context(&mutate_after(&data, cut), &cfg)).unwrap();
        let keep = cut - 120;
        assert_eq!(a.rows[..keep], b.rows[..keep], "{strategy}");
        assert_ne!(a.rows[keep..], b.rows[keep..], "{strategy}: mutation had no effect");
        let cut_date = data.bars[cut].date;
        let sel = |r: &deltahedge_core::coordinator::BacktestReport| {
            r.selections
                .iter()
                .filter(|s| s.cycle_start < cut_date)
                .cloned()
                .collect::<Vec<_>>()
        };
        assert_eq!(sel(&a), sel(&b), "{strategy}");
    }
}
