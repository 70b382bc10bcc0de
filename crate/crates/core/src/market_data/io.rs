use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Bar, DataError, OptionQuote, OptionRight, SentimentRecord, VixRecord};

const BAR_HEADER: &[&str] = &["date", "open", "high", "low", "close", "volume"];
const OPTION_HEADER: &[&str] = &[
    "date",
    "expiry",
    "strike",
    "right",
    "bid",
    "ask",
    "delta",
    "volume",
    "open_interest",
];
const SENTIMENT_HEADER: &[&str] = &["date", "score"];
const VIX_HEADER: &[&str] = &["date", "level"];

#[derive(Deserialize)]
struct BarRow {
    date: NaiveDate,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
    volume: i64,
}

#[derive(Deserialize)]
struct OptionRow {
    date: NaiveDate,
    expiry: NaiveDate,
    strike: f64,
    right: String,
    bid: f64,
    ask: f64,
    delta: Option<f64>,
    volume: i64,
    open_interest: i64,
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses every data row of a CSV source, handing each to `f` with its line.
fn parse_rows<R, T, F>(src: R, name: &str, header: &[&str], mut f: F) -> Result<(), DataError>
where
    R: Read,
    T: DeserializeOwned,
    F: FnMut(T, u64) -> Result<(), DataError>,
{
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(src);
    let found = rdr
        .headers()
        .map_err(|e| DataError::Malformed {
            path: name.to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(DataError::Header {
            path: name.to_string(),
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Malformed {
            path: name.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: T = record.deserialize(Some(&found)).map_err(|e| DataError::Malformed {
            path: name.to_string(),
            line,
            message: e.to_string(),
        })?;
        f(row, line)?;
    }
    Ok(())
}

fn invalid(name: &str, line: u64, message: impl Into<String>) -> DataError {
    DataError::Invalid {
        path: name.to_string(),
        line,
        message: message.into(),
    }
}

fn positive_price(name: &str, line: u64, field: &str, x: f64) -> Result<(), DataError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            name,
            line,
            format!("{field} must be a positive price, got {x}"),
        ))
    }
}

fn non_negative_count(name: &str, line: u64, field: &str, x: i64) -> Result<u64, DataError> {
    u64::try_from(x).map_err(|_| invalid(name, line, format!("{field} is negative ({x})")))
}

/// Strictly increasing dates; equal dates report as duplicates.
fn strictly_after(name: &str, line: u64, prev: Option<NaiveDate>, date: NaiveDate) -> Result<(), DataError> {
    match prev {
        Some(p) if p == date => Err(DataError::Duplicate {
            path: name.to_string(),
            line,
            date,
        }),
        Some(p) if p > date => Err(DataError::NonMonotone {
            path: name.to_string(),
            line,
            date,
        }),
        _ => Ok(()),
    }
}

fn not_before(name: &str, line: u64, prev: Option<NaiveDate>, date: NaiveDate) -> Result<(), DataError> {
    match prev {
        Some(p) if p > date => Err(DataError::NonMonotone {
            path: name.to_string(),
            line,
            date,
        }),
        _ => Ok(()),
    }
}

pub fn read_bars<R: Read>(src: R, name: &str) -> Result<Vec<Bar>, DataError> {
    let mut out: Vec<Bar> = Vec::new();
    parse_rows(src, name, BAR_HEADER, |row: BarRow, line| {
        strictly_after(name, line, out.last().map(|b| b.date), row.date)?;
        for (field, x) in [
            ("open", row.open),
            ("high", row.high),
            ("low", row.low),
            ("close", row.close),
        ] {
            positive_price(name, line, field, x)?;
        }
        let volume = non_negative_count(name, line, "volume", row.volume)?;
        if row.low > row.open.min(row.close) {
            return Err(invalid(name, line, format!("low {} above min(open, close)", row.low)));
        }
        if row.high < row.open.max(row.close) {
            return Err(invalid(name, line, format!("high {} below max(open, close)", row.high)));
        }
        out.push(Bar {
            date: row.date,
            open: row.open,
            high: row.high,
            low: row.low,
            close: row.close,
            volume,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_option_chain<R: Read>(src: R, name: &str) -> Result<Vec<OptionQuote>, DataError> {
    let mut out: Vec<OptionQuote> = Vec::new();
    let mut seen: HashSet<(NaiveDate, NaiveDate, u64, OptionRight)> = HashSet::new();
    parse_rows(src, name, OPTION_HEADER, |row: OptionRow, line| {
        not_before(name, line, out.last().map(|q| q.date), row.date)?;
        let right = match row.right.to_ascii_lowercase().as_str() {
            "put" | "p" => OptionRight::Put,
            "call" | "c" => OptionRight::Call,
            other => return Err(invalid(name, line, format!("unknown right `{other}`"))),
        };
        positive_price(name, line, "strike", row.strike)?;
        if !(row.bid.is_finite() && row.ask.is_finite() && row.bid >= 0.0 && row.bid <= row.ask) {
            return Err(invalid(
                name,
                line,
                format!("quote violates 0 <= bid <= ask (bid {}, ask {})", row.bid, row.ask),
            ));
        }
        if row.expiry < row.date {
            return Err(invalid(name, line, format!("expiry {} before quote date", row.expiry)));
        }
        if let Some(d) = row.delta {
            let ok = match right {
                OptionRight::Put => (-1.0..=0.0).contains(&d),
                OptionRight::Call => (0.0..=1.0).contains(&d),
            };
            if !ok {
                return Err(invalid(
                    name,
                    line,
                    format!("delta {d} out of range for {}", right.as_str()),
                ));
            }
        }
        let volume = non_negative_count(name, line, "volume", row.volume)?;
        let open_interest = non_negative_count(name, line, "open_interest", row.open_interest)?;
        if !seen.insert((row.date, row.expiry, row.strike.to_bits(), right)) {
            return Err(DataError::Duplicate {
                path: name.to_string(),
                line,
                date: row.date,
            });
        }
        out.push(OptionQuote {
            date: row.date,
            expiry: row.expiry,
            strike: row.strike,
            right,
            bid: row.bid,
            ask: row.ask,
            delta: row.delta,
            volume,
            open_interest,
        });
        Ok(())
    })?;
    // Canonical order within a date.
    out.sort_by(|a, b| {
        (a.date, a.expiry, a.right)
            .cmp(&(b.date, b.expiry, b.right))
            .then(a.strike.total_cmp(&b.strike))
    });
    Ok(out)
}

/// Sentiment rows may repeat a date (one row per scored headline batch);
/// they are averaged during alignment.
pub fn read_sentiment<R: Read>(src: R, name: &str) -> Result<Vec<SentimentRecord>, DataError> {
    let mut out: Vec<SentimentRecord> = Vec::new();
    parse_rows(src, name, SENTIMENT_HEADER, |row: SentimentRecord, line| {
        not_before(name, line, out.last().map(|r| r.date), row.date)?;
        if !(0.0..=100.0).contains(&row.score) {
            return Err(invalid(
                name,
                line,
                format!("sentiment score {} outside [0, 100]", row.score),
            ));
        }
        out.push(row);
        Ok(())
    })?;
    Ok(out)
}

pub fn read_vix<R: Read>(src: R, name: &str) -> Result<Vec<VixRecord>, DataError> {
    let mut out: Vec<VixRecord> = Vec::new();
    parse_rows(src, name, VIX_HEADER, |row: VixRecord, line| {
        strictly_after(name, line, out.last().map(|r| r.date), row.date)?;
        if !(row.level.is_finite() && row.level > 0.0) {
            return Err(invalid(
                name,
                line,
                format!("VIX level must be positive, got {}", row.level),
            ));
        }
        out.push(row);
        Ok(())
    })?;
    Ok(out)
}

pub fn load_bars(path: impl AsRef<Path>) -> Result<Vec<Bar>, DataError> {
    let path = path.as_ref();
    read_bars(open(path)?, &path.display().to_string())
}

pub fn load_option_chain(path: impl AsRef<Path>) -> Result<Vec<OptionQuote>, DataError> {
    let path = path.as_ref();
    read_option_chain(open(path)?, &path.display().to_string())
}

pub fn load_sentiment(path: impl AsRef<Path>) -> Result<Vec<SentimentRecord>, DataError> {
    let path = path.as_ref();
    read_sentiment(open(path)?, &path.display().to_string())
}

pub fn load_vix(path: impl AsRef<Path>) -> Result<Vec<VixRecord>, DataError> {
    let path = path.as_ref();
    read_vix(open(path)?, &path.display().to_string())
}

#[derive(Serialize)]
struct OptionOut<'a> {
    date: NaiveDate,
    expiry: NaiveDate,
    strike: f64,
    right: &'a str,
    bid: f64,
    ask: f64,
    delta: Option<f64>,
    volume: u64,
    open_interest: u64,
}

fn write_all<W: Write, T: Serialize>(dst: W, header: &[&str], rows: impl Iterator<Item = T>) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(dst);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
}

pub fn write_bars<W: Write>(dst: W, bars: &[Bar]) -> std::io::Result<()> {
    write_all(dst, BAR_HEADER, bars.iter())
}

pub fn write_option_chain<W: Write>(dst: W, quotes: &[OptionQuote]) -> std::io::Result<()> {
    write_all(
        dst,
        OPTION_HEADER,
        quotes.iter().map(|q| OptionOut {
            date: q.date,
            expiry: q.expiry,
            strike: q.strike,
            right: q.right.as_str(),
            bid: q.bid,
            ask: q.ask,
            delta: q.delta,
            volume: q.volume,
            open_interest: q.open_interest,
        }),
    )
}

pub fn write_sentiment<W: Write>(dst: W, records: &[SentimentRecord]) -> std::io::Result<()> {
    write_all(dst, SENTIMENT_HEADER, records.iter())
}

pub fn write_vix<W: Write>(dst: W, records: &[VixRecord]) -> std::io::Result<()> {
    write_all(dst, VIX_HEADER, records.iter())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BARS: &str = "date,open,high,low,close,volume
2024-01-02,100,101,99,100.5,1000
2024-01-03,100.5,102,100,101.5,1200
2024-01-04,101.5,103,101,102,900
";

    #[test]
    fn loads_well_formed_bars() {
        let bars = read_bars(BARS.as_bytes(), "bars.csv").unwrap();
        assert_eq!(bars.len(), 3);
        assert!(bars.windows(2).all(|w| w[0].date < w[1].date));
        assert_eq!(bars[2].close, 102.0);
    }

    #[test]
    fn duplicate_date_names_the_date() {
        let src = "date,open,high,low,close,volume
2024-01-02,100,101,99,100.5,1000
2024-01-02,100,101,99,100.5,1000
";
        let err = read_bars(src.as_bytes(), "bars.csv").unwrap_err();
        assert!(matches!(err, DataError::Duplicate { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("2024-01-02"));
    }

    #[test]
    fn high_below_close_names_the_row() {
        let src = "date,open,high,low,close,volume
2024-01-02,100,101,99,100.5,1000
2024-01-03,100,101,99,101.5,1000
";
        let err = read_bars(src.as_bytes(), "bars.csv").unwrap_err();
        assert!(matches!(err, DataError::Invalid { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_negative_volume_and_decreasing_dates() {
        let neg = "date,open,high,low,close,volume\n2024-01-02,100,101,99,100.5,-1\n";
        assert!(matches!(
            read_bars(neg.as_bytes(), "b").unwrap_err(),
            DataError::Invalid { line: 2, .. }
        ));
        let back = "date,open,high,low,close,volume
2024-01-03,100,101,99,100.5,1
2024-01-02,100,101,99,100.5,1
";
        assert!(matches!(
            read_bars(back.as_bytes(), "b").unwrap_err(),
            DataError::NonMonotone { line: 3, .. }
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let src = "date,open,high,low,close,volume\n2024-01-02,abc,101,99,100.5,1\n";
        let err = read_bars(src.as_bytes(), "bars.csv").unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 2, .. }), "{err}");
        assert!(err.to_string().starts_with("bars.csv:2"));
    }

    #[test]
    fn header_is_required() {
        let src = "2024-01-02,100,101,99,100.5,1\n";
        assert!(matches!(
            read_bars(src.as_bytes(), "b").unwrap_err(),
            DataError::Header { .. }
        ));
    }

    #[test]
    fn option_quotes() {
        let ok = "date,expiry,strike,right,bid,ask,delta,volume,open_interest
2024-01-02,2024-02-01,100,put,4.90,5.10,-0.45,100,500
2024-01-02,2024-02-01,105,put,7.90,8.10,,100,500
";
        let chain = read_option_chain(ok.as_bytes(), "o").unwrap();
        assert_eq!(chain.len(), 2);
        assert_eq!(chain[0].delta, Some(-0.45));
        assert_eq!(chain[1].delta, None);

        let crossed = "date,expiry,strike,right,bid,ask,delta,volume,open_interest
2024-01-02,2024-02-01,100,put,5.20,5.10,,100,500
";
        assert!(matches!(
            read_option_chain(crossed.as_bytes(), "o").unwrap_err(),
            DataError::Invalid { line: 2, .. }
        ));
        let bad_delta = "date,expiry,strike,right,bid,ask,delta,volume,open_interest
2024-01-02,2024-02-01,100,put,4.9,5.10,0.3,100,500
";
        assert!(read_option_chain(bad_delta.as_bytes(), "o").is_err());
    }

    #[test]
    fn sentiment_bounds() {
        let bad = "date,score\n2024-01-02,101\n";
        assert!(matches!(
            read_sentiment(bad.as_bytes(), "s").unwrap_err(),
            DataError::Invalid { line: 2, .. }
        ));
        let ok = "date,score\n2024-01-02,80\n2024-01-02,60\n2024-01-03,0\n";
        assert_eq!(read_sentiment(ok.as_bytes(), "s").unwrap().len(), 3);
    }

    #[test]
    fn vix_must_be_positive() {
        let bad = "date,level\n2024-01-02,0\n";
        assert!(read_vix(bad.as_bytes(), "v").is_err());
    }
}
