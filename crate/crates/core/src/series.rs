//! Price and return series, the log-return transform and shuffling.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default admission threshold, in returns.
pub const DEFAULT_MIN_LENGTH: usize = 700;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub date: NaiveDate,
    pub close: f64,
}

/// Dated closing prices of one instrument.
///
/// Construction validates that dates are strictly increasing, every close is
/// positive and finite, and there are at least two observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSeries {
    instrument_id: String,
    observations: Vec<Observation>,
}

impl PriceSeries {
    pub fn new(instrument_id: impl Into<String>, observations: Vec<Observation>) -> Result<Self> {
        if observations.len() < 2 {
            return Err(Error::TooShort {
                required: 2,
                actual: observations.len(),
            });
        }
        for obs in &observations {
            if !(obs.close.is_finite() && obs.close > 0.0) {
                return Err(Error::NonPositivePrice {
                    date: obs.date,
                    close: obs.close,
                });
            }
        }
        if let Some(pair) = observations.windows(2).find(|w| w[1].date <= w[0].date) {
            return Err(Error::NonMonotoneDates {
                previous: pair[0].date,
                next: pair[1].date,
            });
        }
        Ok(Self {
            instrument_id: instrument_id.into(),
            observations,
        })
    }

    pub fn instrument_id(&self) -> &str {
        &self.instrument_id
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn closes(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.close)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Log returns of a price series; the input to the fluctuation analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    instrument_id: String,
    values: Vec<f64>,
    source_length: usize,
}

impl ReturnSeries {
    /// Wraps an arbitrary finite sequence, e.g. a synthetic one. The source
    /// length is taken to be one more than the number of values.
    pub fn from_values(instrument_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let source_length = values.len() + 1;
        Ok(Self {
            instrument_id: instrument_id.into(),
            values,
            source_length,
        })
    }

    pub fn instrument_id(&self) -> &str {
        &self.instrument_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source_length(&self) -> usize {
        self.source_length
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            instrument_id: self.instrument_id.clone(),
            values,
            source_length: self.source_length,
        }
    }
}

/// Natural-log returns between consecutive observations.
///
/// Gaps in the calendar are not filled: a return always spans two adjacent
/// rows of the input.
pub fn log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    let obs = prices.observations();
    if obs.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: obs.len(),
        });
    }
    if let Some(bad) = obs.iter().find(|o| !(o.close > 0.0)) {
        return Err(Error::NonPositivePrice {
            date: bad.date,
            close: bad.close,
        });
    }
    let values = obs
        .windows(2)
        .map(|w| w[1].close.ln() - w[0].close.ln())
        .collect::<Vec<_>>();
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(ReturnSeries {
        instrument_id: prices.instrument_id().to_owned(),
        values,
        source_length: obs.len(),
    })
}

/// Length rule for admitting a fund to the analysis.
pub fn admit_series(returns: &ReturnSeries, min_length: usize) -> bool {
    returns.len() >= min_length
}

/// Uniform random permutation of the values (Fisher-Yates driven by ChaCha8
/// seeded from `seed`).
pub fn shuffle(returns: &ReturnSeries, seed: u64) -> ReturnSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = returns.values.clone();
    values.shuffle(&mut rng);
    returns.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(offset: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2013, 11, 4).unwrap() + chrono::Duration::days(offset)
    }

    fn prices(closes: &[f64]) -> PriceSeries {
        let obs = closes
            .iter()
            .enumerate()
            .map(|(i, &close)| Observation {
                date: day(i as i64),
                close,
            })
            .collect();
        PriceSeries::new("TEST", obs).unwrap()
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let r = log_returns(&prices(&[100.0, 100.0, 100.0])).unwrap();
        assert_eq!(r.values(), &[0.0, 0.0]);
        assert_eq!(r.source_length(), 3);
    }

    #[test]
    fn powers_of_e_give_unit_returns() {
        let e = std::f64::consts::E;
        let r = log_returns(&prices(&[1.0, e, e * e])).unwrap();
        for v in r.values() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_evaluated_returns() {
        let r = log_returns(&prices(&[100.0, 105.0, 99.75])).unwrap();
        assert!((r.values()[0] - 1.05f64.ln()).abs() < 1e-15);
        assert!((r.values()[1] - 0.95f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn geometric_sequence_has_constant_return() {
        let closes: Vec<f64> = (0..50).map(|i| 10.0 * 1.01f64.powi(i)).collect();
        let r = log_returns(&prices(&closes)).unwrap();
        for v in r.values() {
            assert!((v - 1.01f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_positive_price_with_date() {
        let obs = vec![
            Observation { date: day(0), close: 1.0 },
            Observation { date: day(1), close: 0.0 },
        ];
        match PriceSeries::new("X", obs) {
            Err(Error::NonPositivePrice { date, .. }) => assert_eq!(date, day(1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_short_and_duplicate_dated_series() {
        let one = vec![Observation { date: day(0), close: 1.0 }];
        assert!(matches!(PriceSeries::new("X", one), Err(Error::TooShort { .. })));
        let dup = vec![
            Observation { date: day(0), close: 1.0 },
            Observation { date: day(0), close: 2.0 },
        ];
        assert!(matches!(
            PriceSeries::new("X", dup),
            Err(Error::NonMonotoneDates { .. })
        ));
    }

    #[test]
    fn admission_boundary() {
        let mk = |n| ReturnSeries::from_values("X", vec![0.0; n]).unwrap();
        assert!(!admit_series(&mk(699), DEFAULT_MIN_LENGTH));
        assert!(admit_series(&mk(700), DEFAULT_MIN_LENGTH));
        assert!(admit_series(&mk(2779), DEFAULT_MIN_LENGTH));
    }

    #[test]
    fn shuffle_single_element_and_determinism() {
        let one = ReturnSeries::from_values("X", vec![3.5]).unwrap();
        assert_eq!(shuffle(&one, 9).values(), &[3.5]);

        let v = ReturnSeries::from_values("X", (0..100).map(f64::from).collect()).unwrap();
        assert_eq!(shuffle(&v, 11), shuffle(&v, 11));
        assert_ne!(shuffle(&v, 11).values(), v.values());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn shuffle_preserves_multiset(values in proptest::collection::vec(-1e3f64..1e3, 1..200), seed: u64) {
                let r = ReturnSeries::from_values("P", values.clone()).unwrap();
                let mut a = shuffle(&r, seed).values().to_vec();
                let mut b = values;
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                prop_assert_eq!(a, b);
            }

            #[test]
            fn returns_telescope(closes in proptest::collection::vec(0.01f64..1e4, 2..300)) {
                let r = log_returns(&prices(&closes)).unwrap();
                prop_assert_eq!(r.len(), closes.len() - 1);
                let sum: f64 = r.values().iter().sum();
                let expected = closes[closes.len() - 1].ln() - closes[0].ln();
                let scale = closes.iter().map(|c| c.ln().abs()).fold(1.0, f64::max);
                prop_assert!((sum - expected).abs() <= 1e-10 * scale);
            }
        }
    }
}
