//! European option pricing: closed-form Black–Scholes (zero dividends),
//! put delta, implied volatility by bisection, and a Cox–Ross–Rubinstein
//! tree used as an independent check on the closed form.

use thiserror::Error;

use crate::market_data::OptionRight;
use crate::scalar::{norm_cdf, Real};

/// Calendar-day year fraction.
pub const DAYS_PER_YEAR: f64 = 365.0;

const IV_LOW: f64 = 1e-4;
const IV_HIGH: f64 = 5.0;
const IV_TOL: f64 = 1e-8;
const IV_MAX_ITER: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum PricingError {
    #[error("invalid pricing inputs: {0}")]
    InvalidInputs(String),
    #[error("price {price} outside no-arbitrage bounds [{lower}, {upper}]")]
    OutOfBounds { price: f64, lower: f64, upper: f64 },
    #[error("price {price} not attainable for volatility in [{IV_LOW}, {IV_HIGH}]")]
    VolOutOfRange { price: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingInputs<T> {
    pub spot: T,
    pub strike: T,
    /// Years.
    pub time_to_expiry: T,
    /// Annualized, continuously compounded.
    pub rate: T,
    /// Annualized volatility.
    pub vol: T,
}

impl<T: Real> PricingInputs<T> {
    pub fn new(spot: T, strike: T, time_to_expiry: T, rate: T, vol: T) -> Result<Self, PricingError> {
        let inputs = Self {
            spot,
            strike,
            time_to_expiry,
            rate,
            vol,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        let finite = [self.spot, self.strike, self.time_to_expiry, self.rate, self.vol]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(PricingError::InvalidInputs("non-finite input".into()));
        }
        if self.spot <= T::zero() || self.strike <= T::zero() {
            return Err(PricingError::InvalidInputs("spot and strike must be positive".into()));
        }
        if self.time_to_expiry < T::zero() || self.vol < T::zero() {
            return Err(PricingError::InvalidInputs(
                "time and volatility must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn with_vol(self, vol: T) -> Self {
        Self { vol, ..self }
    }

    pub fn with_spot(self, spot: T) -> Self {
        Self { spot, ..self }
    }

    fn discounted_strike(&self) -> T {
        self.strike * (-self.rate * self.time_to_expiry).exp()
    }

    /// `(d1, d2)`; only meaningful for `T > 0` and `sigma > 0`.
    fn d1_d2(&self) -> (T, T) {
        let vol_sqrt_t = self.vol * self.time_to_expiry.sqrt();
        let d1 = ((self.spot / self.strike).ln()
            + (self.rate + self.vol * self.vol / T::lit(2.0)) * self.time_to_expiry)
            / vol_sqrt_t;
        (d1, d1 - vol_sqrt_t)
    }

    fn degenerate(&self) -> bool {
        self.time_to_expiry == T::zero() || self.vol == T::zero()
    }
}

/// Converts calendar days to a year fraction.
pub fn year_fraction<T: Real>(calendar_days: i64) -> T {
    T::lit(calendar_days.max(0) as f64 / DAYS_PER_YEAR)
}

pub fn bs_put_price<T: Real>(inputs: &PricingInputs<T>) -> T {
    let k = inputs.strike;
    let s = inputs.spot;
    if inputs.time_to_expiry == T::zero() {
        return (k - s).max(T::zero());
    }
    let kd = inputs.discounted_strike();
    if inputs.vol == T::zero() {
        return (kd - s).max(T::zero());
    }
    let (d1, d2) = inputs.d1_d2();
    (kd * norm_cdf(-d2) - s * norm_cdf(-d1)).max(T::zero())
}

pub fn bs_call_price<T: Real>(inputs: &PricingInputs<T>) -> T {
    let k = inputs.strike;
    let s = inputs.spot;
    if inputs.time_to_expiry == T::zero() {
        return (s - k).max(T::zero());
    }
    let kd = inputs.discounted_strike();
    if inputs.vol == T::zero() {
        return (s - kd).max(T::zero());
    }
    let (d1, d2) = inputs.d1_d2();
    (s * norm_cdf(d1) - kd * norm_cdf(d2)).max(T::zero())
}

pub fn bs_price<T: Real>(inputs: &PricingInputs<T>, right: OptionRight) -> T {
    match right {
        OptionRight::Put => bs_put_price(inputs),
        OptionRight::Call => bs_call_price(inputs),
    }
}

/// Put delta in `[-1, 0]`. At expiry or zero volatility the step function
/// of (forward) moneyness is returned, with `-0.5` exactly at the money.
pub fn bs_put_delta<T: Real>(inputs: &PricingInputs<T>) -> T {
    if inputs.degenerate() {
        let k = if inputs.time_to_expiry == T::zero() {
            inputs.strike
        } else {
            inputs.discounted_strike()
        };
        return if inputs.spot < k {
            -T::one()
        } else if inputs.spot > k {
            T::zero()
        } else {
            T::lit(-0.5)
        };
    }
    let (d1, _) = inputs.d1_d2();
    -norm_cdf(-d1)
}

/// No-arbitrage price bounds `(lower, upper)` for a European option.
pub fn price_bounds<T: Real>(inputs: &PricingInputs<T>, right: OptionRight) -> (T, T) {
    let kd = inputs.discounted_strike();
    match right {
        OptionRight::Put => ((kd - inputs.spot).max(T::zero()), kd),
        OptionRight::Call => ((inputs.spot - kd).max(T::zero()), inputs.spot),
    }
}

/// Volatility reproducing `price`; `inputs.vol` is ignored.
pub fn implied_vol<T: Real>(price: T, inputs: &PricingInputs<T>, right: OptionRight) -> Result<T, PricingError> {
    inputs.validate()?;
    let (lower, upper) = price_bounds(inputs, right);
    if !price.is_finite() || price < lower || price > upper {
        return Err(PricingError::OutOfBounds {
            price: price.to_f64_lossy(),
            lower: lower.to_f64_lossy(),
            upper: upper.to_f64_lossy(),
        });
    }
    if inputs.time_to_expiry == T::zero() {
        return Err(PricingError::VolOutOfRange {
            price: price.to_f64_lossy(),
        });
    }
    let model = |v: T| bs_price(&inputs.with_vol(v), right) - price;
    let (mut lo, mut hi) = (T::lit(IV_LOW), T::lit(IV_HIGH));
    let (f_lo, f_hi) = (model(lo), model(hi));
    if f_lo > T::zero() || f_hi < T::zero() {
        return Err(PricingError::VolOutOfRange {
            price: price.to_f64_lossy(),
        });
    }
    let tol = T::lit(IV_TOL);
    if f_lo.abs() < tol {
        return Ok(lo);
    }
    if f_hi.abs() < tol {
        return Ok(hi);
    }
    let mut mid = (lo + hi) / T::lit(2.0);
    for _ in 0..IV_MAX_ITER {
        mid = (lo + hi) / T::lit(2.0);
        let f = model(mid);
        if f.abs() < tol {
            break;
        }
        if f > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(mid)
}

/// European put on a CRR tree with `steps` periods.
pub fn crr_binomial_put<T: Real>(inputs: &PricingInputs<T>, steps: usize) -> T {
    let k = inputs.strike;
    let s = inputs.spot;
    if inputs.time_to_expiry == T::zero() {
        return (k - s).max(T::zero());
    }
    if inputs.vol == T::zero() {
        return (inputs.discounted_strike() - s).max(T::zero());
    }
    let n = steps.max(1);
    let dt = inputs.time_to_expiry / T::from_count(n);
    let u = (inputs.vol * dt.sqrt()).exp();
    let d = T::one() / u;
    let growth = (inputs.rate * dt).exp();
    let p = (growth - d) / (u - d);
    let q = T::one() - p;
    let disc = T::one() / growth;

    let ratio = u * u;
    let mut spot = s * d.powi(n as i32);
    let mut values: Vec<T> = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        values.push((k - spot).max(T::zero()));
        spot *= ratio;
    }
    for step in (0..n).rev() {
        for j in 0..=step {
            values[j] = disc * (q * values[j] + p * values[j + 1]);
        }
    }
    values[0]
}
