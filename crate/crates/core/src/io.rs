//! CSV ingestion of saved price exports and fixture emission.

use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};

use crate::error::{Error, Result};
use crate::series::{Observation, PriceSeries, ReturnSeries};

/// Column names and delimiter of a price export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub date_col: String,
    pub close_col: String,
    pub delimiter: u8,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date_col: "Date".into(),
            close_col: "Close".into(),
            delimiter: b',',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub prices: PriceSeries,
    /// Rows skipped because the close was empty or `null`.
    pub dropped_rows: usize,
}

/// Instrument code implied by a file name (`FR0010001214.csv` gives
/// `FR0010001214`).
pub fn code_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, path, schema)
}

/// Parses a header-bearing CSV; `origin` only labels errors.
pub fn ingest_reader<R: std::io::Read>(reader: R, origin: &Path, schema: &CsvSchema) -> Result<Ingested> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
    };
    let date_idx = column(&schema.date_col)?;
    let close_idx = column(&schema.close_col)?;

    let mut observations = Vec::new();
    let mut dropped_rows = 0;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let date_text = record.get(date_idx).unwrap_or("");
        let close_text = record.get(close_idx).unwrap_or("");
        if close_text.is_empty() || close_text.eq_ignore_ascii_case("null") {
            dropped_rows += 1;
            continue;
        }
        let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d")
            .map_err(|e| parse_err(line, format!("bad date `{date_text}`: {e}")))?;
        let close: f64 = close_text
            .parse()
            .map_err(|e| parse_err(line, format!("bad close `{close_text}`: {e}")))?;
        if !close.is_finite() {
            return Err(parse_err(line, format!("bad close `{close_text}`")));
        }
        observations.push(Observation { date, close });
    }
    if observations.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: observations.len(),
        });
    }
    let prices = PriceSeries::new(code_from_path(origin), observations)?;
    Ok(Ingested {
        prices,
        dropped_rows,
    })
}

/// Writes `Date,Close` rows. Closes are printed in shortest round-trip form so
/// re-ingestion reproduces them exactly.
pub fn write_price_csv(path: &Path, prices: &PriceSeries) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["Date", "Close"])?;
    for obs in prices.observations() {
        wtr.write_record([obs.date.format("%Y-%m-%d").to_string(), obs.close.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// `count` consecutive weekdays starting at `start` (moved forward to a
/// weekday if it falls on a weekend).
pub fn weekdays(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(count)
        .collect()
}

/// Turns a synthetic series into a price path with one row per value.
///
/// Values are rescaled to standard deviation `volatility` and compounded from
/// `base_price`, so the returns read back from the file are the rescaled
/// values from the second onward. Rescaling does not change any scaling
/// exponent.
pub fn prices_from_series(
    series: &ReturnSeries,
    start: NaiveDate,
    base_price: f64,
    volatility: f64,
) -> Result<PriceSeries> {
    let v = series.values();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 0.0 { volatility / sd } else { 1.0 };
    let mut log_price = base_price.ln();
    let observations = weekdays(start, v.len())
        .into_iter()
        .zip(v)
        .map(|(date, x)| {
            log_price += scale * x;
            Observation {
                date,
                close: log_price.exp(),
            }
        })
        .collect();
    PriceSeries::new(series.instrument_id(), observations)
}
