use chrono::NaiveDate;

use super::{Bar, DataError, MarketSlice, OptionQuote, OptionRight, SentimentRecord, VixRecord};
use crate::signals::{aggregate_sentiment, NEUTRAL_SENTIMENT};

/// VIX level substituted when no VIX feed is supplied and none is required.
pub const DEFAULT_VIX: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignalRequirement {
    /// Missing feeds fall back to neutral constants.
    #[default]
    Optional,
    /// Empty sentiment or VIX feeds are an error.
    Required,
}

/// Forward-fills a sparse dated series onto `dates`; the leading gap takes
/// the first observation.
fn as_of<T: Copy>(dates: &[NaiveDate], obs: &[(NaiveDate, T)], default: T) -> Vec<T> {
    let Some(&(_, first)) = obs.first() else {
        return vec![default; dates.len()];
    };
    let mut out = Vec::with_capacity(dates.len());
    let mut j = 0;
    let mut current = first;
    for &d in dates {
        while j < obs.len() && obs[j].0 <= d {
            current = obs[j].1;
            j += 1;
        }
        out.push(current);
    }
    out
}

/// One slice per bar date, with sentiment and VIX carried forward across gaps
/// and put quotes attached by exact date.
pub fn align_calendar(
    bars: &[Bar],
    chain: &[OptionQuote],
    sentiment: &[SentimentRecord],
    vix: &[VixRecord],
    requirement: SignalRequirement,
) -> Result<Vec<MarketSlice>, DataError> {
    if bars.is_empty() {
        return Err(DataError::EmptyBars);
    }
    if requirement == SignalRequirement::Required {
        if sentiment.is_empty() {
            return Err(DataError::MissingFeed { feed: "sentiment" });
        }
        if vix.is_empty() {
            return Err(DataError::MissingFeed { feed: "VIX" });
        }
    }
    let dates: Vec<NaiveDate> = bars.iter().map(|b| b.date).collect();

    let mut daily_sent: Vec<(NaiveDate, f64)> = Vec::new();
    let mut i = 0;
    while i < sentiment.len() {
        let d = sentiment[i].date;
        let start = i;
        while i < sentiment.len() && sentiment[i].date == d {
            i += 1;
        }
        let scores: Vec<f64> = sentiment[start..i].iter().map(|r| r.score).collect();
        daily_sent.push((d, aggregate_sentiment(&scores)));
    }
    let sent = as_of(&dates, &daily_sent, NEUTRAL_SENTIMENT);
    let vix_obs: Vec<(NaiveDate, f64)> = vix.iter().map(|r| (r.date, r.level)).collect();
    let vix = as_of(&dates, &vix_obs, DEFAULT_VIX);

    let mut puts = chain.iter().filter(|q| q.right == OptionRight::Put).peekable();
    let mut out = Vec::with_capacity(bars.len());
    for (k, bar) in bars.iter().enumerate() {
        while puts.peek().is_some_and(|q| q.date < bar.date) {
            puts.next();
        }
        let mut today = Vec::new();
        while let Some(q) = puts.next_if(|q| q.date == bar.date) {
            today.push(*q);
        }
        out.push(MarketSlice {
            date: bar.date,
            bar: *bar,
            puts: today,
            sentiment: sent[k],
            vix: vix[k],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 3, day).unwrap()
    }

    fn bar(day: u32, close: f64) -> Bar {
        Bar {
            date: d(day),
            open: close,
            high: close,
            low: close,
            close,
            volume: 10,
        }
    }

    #[test]
    fn vix_forward_fills() {
        let bars = [bar(4, 100.0), bar(5, 101.0)];
        let vix = [VixRecord {
            date: d(4),
            level: 18.0,
        }];
        let s = align_calendar(&bars, &[], &[], &vix, SignalRequirement::Optional).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].vix, 18.0);
        assert!(s.iter().all(|x| x.puts.is_empty()));
        assert_eq!(s[0].sentiment, NEUTRAL_SENTIMENT);
    }

    #[test]
    fn own_date_values_and_leading_backfill() {
        let bars = [bar(4, 100.0), bar(5, 101.0), bar(6, 99.0)];
        let sent = [
            SentimentRecord {
                date: d(5),
                score: 80.0,
            },
            SentimentRecord {
                date: d(5),
                score: 60.0,
            },
            SentimentRecord {
                date: d(6),
                score: 30.0,
            },
        ];
        let vix = [
            VixRecord {
                date: d(4),
                level: 15.0,
            },
            VixRecord {
                date: d(5),
                level: 16.0,
            },
            VixRecord {
                date: d(6),
                level: 17.0,
            },
        ];
        let s = align_calendar(&bars, &[], &sent, &vix, SignalRequirement::Required).unwrap();
        assert_eq!(
            s.iter().map(|x| x.sentiment).collect::<Vec<_>>(),
            vec![70.0, 70.0, 30.0]
        );
        assert_eq!(s.iter().map(|x| x.vix).collect::<Vec<_>>(), vec![15.0, 16.0, 17.0]);
    }

    #[test]
    fn quotes_attach_by_exact_date_puts_only() {
        let bars = [bar(4, 100.0), bar(6, 101.0)];
        let q = |day: u32, right| OptionQuote {
            date: d(day),
            expiry: d(29),
            strike: 100.0,
            right,
            bid: 1.0,
            ask: 1.1,
            delta: None,
            volume: 5,
            open_interest: 5,
        };
        let chain = [
            q(4, OptionRight::Put),
            q(4, OptionRight::Call),
            q(5, OptionRight::Put),
            q(6, OptionRight::Put),
        ];
        let s = align_calendar(&bars, &chain, &[], &[], SignalRequirement::Optional).unwrap();
        assert_eq!(s[0].puts.len(), 1);
        assert_eq!(s[1].puts.len(), 1);
        assert_eq!(s[1].puts[0].date, d(6));
    }

    #[test]
    fn required_feeds() {
        let bars = [bar(4, 100.0)];
        assert!(matches!(
            align_calendar(&bars, &[], &[], &[], SignalRequirement::Required),
            Err(DataError::MissingFeed { feed: "sentiment" })
        ));
        assert!(matches!(
            align_calendar(&[], &[], &[], &[], SignalRequirement::Optional),
            Err(DataError::EmptyBars)
        ));
    }
}
