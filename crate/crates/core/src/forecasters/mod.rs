//! The twelve-method forecasting pool.
//!
//! Every method is a pure function of the history and the horizon and
//! returns a flat or iterated `H`-step point forecast together with its
//! in-sample one-step residuals `y_t - ŷ_t`, which the quantile layer uses.

mod aggregation;
mod arima;
mod croston;
mod ets;
mod naive;
mod smoothing;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::DemandSeries;
use crate::stats;

pub use aggregation::{adida, adida_level, imapa};
pub use arima::arima;
pub use croston::{croston, croston_with, opt_croston, sba, tsb, tsb_with, CROSTON_ALPHA};
pub use ets::ets;
pub use naive::{naive, seasonal_naive};
pub use smoothing::{moving_average, moving_average_with, ses, ses_with};

/// Identifier of a pool member. The declaration order is the row order of
/// every [`ForecastMatrix`] and the class order of every meta-model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodId {
    Naive,
    SNaive,
    SES,
    MA,
    ARIMA,
    ETS,
    CRO,
    OptCro,
    SBA,
    TSB,
    ADIDA,
    IMAPA,
}

impl MethodId {
    pub const ALL: [MethodId; 12] = [
        MethodId::Naive,
        MethodId::SNaive,
        MethodId::SES,
        MethodId::MA,
        MethodId::ARIMA,
        MethodId::ETS,
        MethodId::CRO,
        MethodId::OptCro,
        MethodId::SBA,
        MethodId::TSB,
        MethodId::ADIDA,
        MethodId::IMAPA,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Naive => "Naive",
            MethodId::SNaive => "SNaive",
            MethodId::SES => "SES",
            MethodId::MA => "MA",
            MethodId::ARIMA => "ARIMA",
            MethodId::ETS => "ETS",
            MethodId::CRO => "CRO",
            MethodId::OptCro => "OptCro",
            MethodId::SBA => "SBA",
            MethodId::TSB => "TSB",
            MethodId::ADIDA => "ADIDA",
            MethodId::IMAPA => "IMAPA",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation(format!("unknown method {s:?}")))
    }
}

/// Point forecast and in-sample residuals of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit<T> {
    pub forecast: Vec<T>,
    pub residuals: Vec<T>,
}

impl<T: Real> Fit<T> {
    pub(crate) fn flat(level: T, horizon: usize, residuals: Vec<T>) -> Self {
        Fit {
            forecast: vec![level; horizon],
            residuals,
        }
    }

    /// Flat overall-mean forecast, used for very short histories and as the
    /// fallback when a method cannot produce a finite forecast.
    pub fn mean_fallback(y: &[T], horizon: usize) -> Self {
        let m = stats::mean(y);
        Fit::flat(m, horizon, y.iter().map(|&v| v - m).collect())
    }

    fn is_finite(&self) -> bool {
        self.forecast.iter().chain(&self.residuals).all(|v| v.is_finite())
    }
}

/// Per-series forecasts of the pool: one row per method, one column per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastMatrix<T = f64> {
    pub series_id: String,
    pub horizon: usize,
    pub methods: Vec<MethodId>,
    pub values: Vec<Vec<T>>,
    pub residuals: Vec<Vec<T>>,
}

impl<T: Real> ForecastMatrix<T> {
    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }

    pub fn row(&self, m: MethodId) -> Option<&[T]> {
        self.methods
            .iter()
            .position(|&x| x == m)
            .map(|i| self.values[i].as_slice())
    }

    /// Keeps only `keep`, in pool order.
    pub fn restrict(&self, keep: &[MethodId]) -> ForecastMatrix<T> {
        let idx: Vec<usize> = self
            .methods
            .iter()
            .enumerate()
            .filter(|(_, m)| keep.contains(m))
            .map(|(i, _)| i)
            .collect();
        ForecastMatrix {
            series_id: self.series_id.clone(),
            horizon: self.horizon,
            methods: idx.iter().map(|&i| self.methods[i]).collect(),
            values: idx.iter().map(|&i| self.values[i].clone()).collect(),
            residuals: idx.iter().map(|&i| self.residuals[i].clone()).collect(),
        }
    }

    /// CSV with one row per method and one column per horizon step.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["method".to_string()];
        header.extend((1..=self.horizon).map(|h| format!("h{h}")));
        wtr.write_record(&header)?;
        for (m, row) in self.methods.iter().zip(&self.values) {
            let mut rec = vec![m.name().to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn is_constant<T: Real>(y: &[T]) -> bool {
    y.windows(2).all(|w| w[0] == w[1])
}

pub(crate) fn residuals_from<T: Real>(y: &[T], start: usize, fitted: &[T]) -> Vec<T> {
    y[start..]
        .iter()
        .zip(fitted)
        .map(|(&obs, &fit)| obs - fit)
        .collect()
}

/// Naive and seasonal naive rows.
pub fn forecast_naive_family<T: Real>(s: &DemandSeries<T>, horizon: usize) -> [Fit<T>; 2] {
    let y = s.values();
    [
        naive(y, horizon),
        seasonal_naive(y, s.period().seasonal_period(), horizon),
    ]
}

/// SES, MA, ETS and ARIMA rows, in that order.
pub fn forecast_smoothing_family<T: Real>(s: &DemandSeries<T>, horizon: usize) -> [Fit<T>; 4] {
    let y = s.values();
    [
        ses(y, horizon),
        moving_average(y, horizon),
        ets(y, horizon),
        arima(y, horizon),
    ]
}

/// CRO, OptCro, SBA and TSB rows.
pub fn forecast_croston_family<T: Real>(s: &DemandSeries<T>, horizon: usize) -> [Result<Fit<T>>; 4] {
    let y = s.values();
    [
        croston(y, horizon),
        opt_croston(y, horizon),
        sba(y, horizon),
        tsb(y, horizon),
    ]
}

/// ADIDA and IMAPA rows.
pub fn forecast_aggregation_family<T: Real>(s: &DemandSeries<T>, horizon: usize) -> [Result<Fit<T>>; 2] {
    let y = s.values();
    [adida(y, horizon), imapa(y, horizon)]
}

/// Runs the whole pool on `s`.
///
/// A method that fails or yields a non-finite value is replaced by the flat
/// overall-mean forecast and the substitution is logged. Forecasts are
/// clamped at zero; residuals are left as fitted.
pub fn forecast_all<T: Real>(s: &DemandSeries<T>, horizon: usize) -> ForecastMatrix<T> {
    let y = s.values();
    let [n, sn] = forecast_naive_family(s, horizon);
    let [ses, ma, ets, arima] = forecast_smoothing_family(s, horizon);
    let [cro, optcro, sba, tsb] = forecast_croston_family(s, horizon);
    let [adida, imapa] = forecast_aggregation_family(s, horizon);
    let fits: [Result<Fit<T>>; 12] = [
        Ok(n),
        Ok(sn),
        Ok(ses),
        Ok(ma),
        Ok(arima),
        Ok(ets),
        cro,
        optcro,
        sba,
        tsb,
        adida,
        imapa,
    ];

    let mut values = Vec::with_capacity(12);
    let mut residuals = Vec::with_capacity(12);
    for (method, fit) in MethodId::ALL.into_iter().zip(fits) {
        let fit = match fit {
            Ok(f) if f.is_finite() && f.forecast.len() == horizon => f,
            Ok(_) => {
                log::warn!("{}: {method} produced a non-finite forecast, using mean", s.id());
                Fit::mean_fallback(y, horizon)
            }
            Err(e) => {
                log::warn!("{}: {method} failed ({e}), using mean", s.id());
                Fit::mean_fallback(y, horizon)
            }
        };
        let mut res = fit.residuals;
        if res.is_empty() {
            res = Fit::mean_fallback(y, horizon).residuals;
        }
        values.push(fit.forecast.into_iter().map(|v| v.max(T::zero())).collect());
        residuals.push(res);
    }
    ForecastMatrix {
        series_id: s.id().to_string(),
        horizon,
        methods: MethodId::ALL.to_vec(),
        values,
        residuals,
    }
}
