use deltahedge_core::agents::{
    attention_weights, exchange_context, fractional_put_contracts, target_put_contracts, HedgeRatio,
};
use proptest::prelude::*;

fn message() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 8)
}

proptest! {
    #[test]
    fn context_ignores_inbox_order(msgs in prop::collection::vec(message(), 1..6), query in message(), rot in 0usize..6) {
        let refs: Vec<&[f64]> = msgs.iter().map(Vec::as_slice).collect();
        let mut permuted = refs.clone();
        let len = permuted.len();
        permuted.rotate_left(rot % len);
        permuted.reverse();
        let a = exchange_context(&refs, &query);
        let b = exchange_context(&permuted, &query);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let w = attention_weights(&refs, &query);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn context_stays_in_message_hull(msgs in prop::collection::vec(message(), 1..6), query in message()) {
        let refs: Vec<&[f64]> = msgs.iter().map(Vec::as_slice).collect();
        let c = exchange_context(&refs, &query);
        for j in 0..8 {
            let lo = msgs.iter().map(|m| m[j]).fold(f64::INFINITY, f64::min);
            let hi = msgs.iter().map(|m| m[j]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(c[j] >= lo - 1e-12 && c[j] <= hi + 1e-12);
        }
    }

    #[test]
    fn full_hedge_neutralizes_delta(shares in 1u64..100_000, delta in -0.99f64..-0.01) {
        let full = HedgeRatio::full();
        let n = fractional_put_contracts(full, shares as f64, delta).unwrap();
        let net = shares as f64 + n * delta;
        prop_assert!(net.abs() <= 4.0 * f64::EPSILON * shares as f64);
        let whole = target_put_contracts(full, shares, delta, 100).unwrap();
        let net = shares as f64 + whole as f64 * 100.0 * delta;
        prop_assert!(net.abs() <= 100.0 * delta.abs() / 2.0 + 1e-9);
    }
}

#[test]
fn single_message_passes_through() {
    let m = [0.5, -1.0, 2.0, 0.0, 0.25, 3.0, -0.5, 1.0];
    assert_eq!(exchange_context(&[&m], &[9.0; 8]), m.to_vec());
}

#[test]
fn hedge_targets_reject_non_negative_delta() {
    assert!(target_put_contracts(HedgeRatio::full(), 100, 0.0, 100).is_err());
    assert_eq!(target_put_contracts(HedgeRatio::none(), 100, -0.5, 100).unwrap(), 0);
    assert_eq!(target_put_contracts(HedgeRatio::full(), 1_000, -0.5, 100).unwrap(), 20);
}
