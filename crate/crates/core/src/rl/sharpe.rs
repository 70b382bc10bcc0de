use std::collections::VecDeque;

use crate::scalar::{mean, sample_std, Real};

/// Below this standard deviation the Sharpe ratio is reported as zero.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Rolling window of daily portfolio returns and the (daily, unannualized)
/// Sharpe ratio over it.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpeTracker<T> {
    window: usize,
    risk_free: T,
    returns: VecDeque<T>,
}

impl<T: Real> SharpeTracker<T> {
    /// `window` is clamped to at least 2.
    pub fn new(window: usize, risk_free_daily: T) -> Self {
        let window = window.max(2);
        Self {
            window,
            risk_free: risk_free_daily,
            returns: VecDeque::with_capacity(window),
        }
    }

    pub fn push(&mut self, r: T) {
        if self.returns.len() == self.window {
            self.returns.pop_front();
        }
        self.returns.push_back(r);
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// `(mean − r_f)/std` over the window; `None` with fewer than two returns.
    pub fn sharpe(&self) -> Option<T> {
        let (a, b) = self.returns.as_slices();
        let xs: Vec<T> = a.iter().chain(b).copied().collect();
        rolling_sharpe(&xs, self.risk_free)
    }

    /// Sharpe ratio with undefined treated as zero.
    pub fn sharpe_or_zero(&self) -> T {
        self.sharpe().unwrap_or_else(T::zero)
    }
}

pub fn rolling_sharpe<T: Real>(returns: &[T], risk_free: T) -> Option<T> {
    let std = sample_std(returns)?;
    if std < T::lit(DEGENERATE_STD) {
        return Some(T::zero());
    }
    Some((mean(returns) - risk_free) / std)
}

/// Shared reward: change in Sharpe ratio since the previous step.
pub fn reward_step<T: Real>(prev: Option<T>, next: Option<T>) -> T {
    next.unwrap_or_else(T::zero) - prev.unwrap_or_else(T::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_and_constant_returns() {
        let mut t = SharpeTracker::<f64>::new(60, 0.0);
        for i in 0..20 {
            t.push(if i % 2 == 0 { 0.01 } else { -0.01 });
        }
        assert!(t.sharpe().unwrap().abs() < 1e-15);
        let mut c = SharpeTracker::<f64>::new(60, 0.0);
        for _ in 0..10 {
            c.push(0.003f64);
        }
        assert_eq!(c.sharpe(), Some(0.0));
        let mut one = SharpeTracker::<f64>::new(60, 0.0);
        one.push(0.01f64);
        assert_eq!(one.sharpe(), None);
        assert_eq!(one.sharpe_or_zero(), 0.0);
    }

    #[test]
    fn window_rolls() {
        let mut t = SharpeTracker::<f64>::new(3, 0.0);
        for r in [5.0, 1.0, 2.0, 3.0] {
            t.push(r);
        }
        assert_eq!(t.len(), 3);
        assert!((t.sharpe().unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn reward_arithmetic() {
        assert_eq!(reward_step(Some(1.0), Some(1.0)), 0.0);
        assert!((reward_step(Some(1.2f64), Some(1.5)) - 0.3).abs() < 1e-15);
        assert_eq!(reward_step(None, Some(0.7)), 0.7);
    }
}
