mod common;

use common::{check_conservation, context, dataset, small_config, FuzzDay};
use deltahedge_core::market_data::{Bar, MarketSlice, OptionQuote, OptionRight};
use deltahedge_core::portfolio::{settle_expiries, PortfolioState, Position, PutSpec};
use proptest::prelude::*;

fn fuzz_day() -> impl Strategy<Value = FuzzDay> {
    (-1.0f64..=1.0, 0usize..64, -30i64..30, any::<bool>()).prop_map(|(action, pick, contracts, sell_held)| FuzzDay {
        action,
        pick,
        contracts,
        sell_held,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn value_changes_decompose(days in prop::collection::vec(fuzz_day(), 1..90), cash in 1_000.0f64..500_000.0) {
        let cfg = small_config("buy_and_hold", 0);
        let market = context(&dataset(120, 9, Vec::new()), &cfg);
        prop_assert_eq!(check_conservation(&market, 5, cash, &days), Ok(()));
    }
}

fn expiry_slice(close: f64) -> MarketSlice {
    let date = common::date(2024, 3, 15);
    MarketSlice {
        date,
        bar: Bar {
            date,
            open: close,
            high: close,
            low: close,
            close,
            volume: 1,
        },
        puts: vec![OptionQuote {
            date,
            expiry: common::date(2024, 4, 15),
            strike: 100.0,
            right: OptionRight::Put,
            bid: 1.0,
            ask: 1.1,
            delta: None,
            volume: 10,
            open_interest: 10,
        }],
        sentiment: 50.0,
        vix: 20.0,
    }
}

fn holding(strike: f64, contracts: u64) -> PortfolioState {
    let slice = expiry_slice(1.0);
    let mut s = PortfolioState::new(slice.date, 1_000.0);
    s.positions.push(Position {
        spec: PutSpec {
            strike,
            expiry: slice.date,
            multiplier: 100,
        },
        contracts,
        entry_premium: 2.0,
    });
    s
}

#[test]
fn in_the_money_expiry_pays_intrinsic() {
    let (after, paid) = settle_expiries(&holding(100.0, 3), &expiry_slice(92.5));
    assert_eq!(paid, 3.0 * 100.0 * 7.5);
    assert_eq!(after.cash, 1_000.0 + 2_250.0);
    assert!(after.positions.is_empty());
}

#[test]
fn out_of_the_money_expiry_pays_nothing() {
    let (after, paid) = settle_expiries(&holding(100.0, 3), &expiry_slice(100.0));
    assert_eq!(paid, 0.0);
    assert_eq!(after.cash, 1_000.0);
    assert!(after.positions.is_empty());
}
