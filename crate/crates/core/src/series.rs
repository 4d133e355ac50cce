//! Demand series data model, preprocessing and the three-way split.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sampling frequency of a dataset, carrying the seasonal period `m`.
///
/// Serialised as `"monthly"`, `"daily"` or the integer period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(try_from = "PeriodRepr", into = "PeriodRepr")]
pub enum Period {
    #[default]
    Monthly,
    Daily,
    Custom(usize),
}

impl Period {
    pub fn seasonal_period(self) -> usize {
        match self {
            Period::Monthly => 12,
            Period::Daily => 7,
            Period::Custom(m) => m,
        }
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "monthly" => Ok(Period::Monthly),
            "daily" => Ok(Period::Daily),
            other => match other.parse::<usize>() {
                Ok(m) if m > 0 => Ok(Period::Custom(m)),
                _ => Err(Error::Validation(format!(
                    "period must be monthly, daily or a positive integer, got {s:?}"
                ))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PeriodRepr {
    Name(String),
    Length(usize),
}

impl TryFrom<PeriodRepr> for Period {
    type Error = Error;
    fn try_from(r: PeriodRepr) -> Result<Self> {
        match r {
            PeriodRepr::Name(s) => s.parse(),
            PeriodRepr::Length(m) => m.to_string().parse(),
        }
    }
}

impl From<Period> for PeriodRepr {
    fn from(p: Period) -> Self {
        match p {
            Period::Custom(m) => PeriodRepr::Length(m),
            named => PeriodRepr::Name(named.to_string()),
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Monthly => f.write_str("monthly"),
            Period::Daily => f.write_str("daily"),
            Period::Custom(m) => write!(f, "{m}"),
        }
    }
}

/// One item's demand history.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSeries<T = f64> {
    id: String,
    values: Vec<T>,
    period: Period,
}

impl<T: Real> DemandSeries<T> {
    /// Builds a series, rejecting negative, non-finite or empty input.
    pub fn new(id: impl Into<String>, values: Vec<T>, period: Period) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(Error::Malformed(format!("series {id} has no observations")));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    id,
                    position: i + 1,
                    value: v.to_string(),
                });
            }
            if *v < T::zero() {
                return Err(Error::NegativeDemand { id, position: i + 1 });
            }
        }
        Ok(Self { id, values, period })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn period(&self) -> Period {
        self.period
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same id and period over a sub-range of the values.
    pub fn window(&self, range: std::ops::Range<usize>) -> DemandSeries<T> {
        DemandSeries {
            id: self.id.clone(),
            values: self.values[range].to_vec(),
            period: self.period,
        }
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> DemandSeries<U> {
        DemandSeries {
            id: self.id.clone(),
            values: self
                .values
                .iter()
                .map(|v| U::from_f64(v.to_f64_()).expect("representable"))
                .collect(),
            period: self.period,
        }
    }
}

/// Drops leading zeros so the series starts at its first positive demand.
pub fn preprocess<T: Real>(s: &DemandSeries<T>) -> Result<DemandSeries<T>> {
    let first = s
        .values
        .iter()
        .position(|&v| v > T::zero())
        .ok_or_else(|| Error::NoDemand(s.id.clone()))?;
    Ok(s.window(first..s.len()))
}

/// Index ranges of the meta-training, inner-test and final-test segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub len: usize,
    pub horizon: usize,
}

impl SplitPlan {
    /// Number of observations the pool is fitted on during meta-training.
    pub fn meta_train_end(&self) -> usize {
        self.len - 2 * self.horizon
    }

    pub fn meta_train(&self) -> std::ops::Range<usize> {
        0..self.meta_train_end()
    }

    pub fn inner_test(&self) -> std::ops::Range<usize> {
        self.meta_train_end()..self.len - self.horizon
    }

    /// Observations visible to the forecaster at final evaluation.
    pub fn evaluation_history(&self) -> std::ops::Range<usize> {
        0..self.len - self.horizon
    }

    pub fn final_test(&self) -> std::ops::Range<usize> {
        self.len - self.horizon..self.len
    }
}

/// Minimum length so the scale denominators are defined before the inner window.
pub fn min_len_for_split(horizon: usize) -> usize {
    2 * horizon + 2
}

pub fn make_split<T: Real>(s: &DemandSeries<T>, horizon: usize) -> Result<SplitPlan> {
    if horizon == 0 {
        return Err(Error::Validation("horizon must be positive".into()));
    }
    let needed = min_len_for_split(horizon);
    if s.len() < needed {
        return Err(Error::TooShort {
            id: s.id.clone(),
            len: s.len(),
            needed,
        });
    }
    Ok(SplitPlan {
        len: s.len(),
        horizon,
    })
}

/// A named collection of series sharing one period.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T = f64> {
    name: String,
    series: Vec<DemandSeries<T>>,
}

impl<T: Real> Dataset<T> {
    pub fn new(name: impl Into<String>, series: Vec<DemandSeries<T>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &series {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        if let Some(first) = series.first() {
            if series.iter().any(|s| s.period != first.period) {
                return Err(Error::Validation(
                    "all series in a dataset must share one period".into(),
                ));
            }
        }
        Ok(Self {
            name: name.into(),
            series,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn series(&self) -> &[DemandSeries<T>] {
        &self.series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&DemandSeries<T>> {
        self.series.iter().find(|s| s.id == id)
    }
}
