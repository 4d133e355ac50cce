//! Temporal aggregation: ADIDA forecasts the series summed into
//! non-overlapping buckets and spreads the bucket forecast evenly; IMAPA
//! averages ADIDA over every level `1..=a`.

use super::smoothing::{ses_alpha, ses_path};
use super::{is_constant, Fit};
use crate::error::Result;
use crate::features::idi;
use crate::scalar::Real;
use crate::stats;

/// Aggregation level `max(1, round(mean inter-demand interval))`.
pub fn adida_level<T: Real>(y: &[T]) -> Result<usize> {
    let level = idi(y)?.round().to_usize().unwrap_or(1).max(1);
    Ok(level.min(y.len()))
}

struct LevelFit<T> {
    /// Per-period forecast after disaggregation.
    forecast: T,
    /// First original-frequency index with a fitted value.
    start: usize,
    fitted: Vec<T>,
}

/// SES on end-anchored buckets of length `level`; the incomplete head
/// bucket is dropped.
fn fit_level<T: Real>(y: &[T], level: usize) -> LevelFit<T> {
    let n_buckets = y.len() / level;
    let head = y.len() - n_buckets * level;
    let buckets: Vec<T> = y[head..].chunks(level).map(|c| c.iter().copied().sum()).collect();
    let lt = T::from_usize_(level);
    // bucket-level one-step fits, starting at `first_bucket`
    let (bucket_forecast, first_bucket, bucket_fitted) = if is_constant(&buckets) {
        (buckets[0], 1, vec![buckets[0]; n_buckets - 1])
    } else if buckets.len() < 3 {
        let m = stats::mean(&buckets);
        (m, 0, vec![m; n_buckets])
    } else {
        let (level_t, fitted) = ses_path(&buckets, ses_alpha(&buckets));
        (level_t, 1, fitted)
    };
    let fitted = bucket_fitted
        .iter()
        .flat_map(|&b| std::iter::repeat_n(b / lt, level))
        .collect();
    LevelFit {
        forecast: bucket_forecast / lt,
        start: head + first_bucket * level,
        fitted,
    }
}

pub fn adida<T: Real>(y: &[T], horizon: usize) -> Result<Fit<T>> {
    let level = adida_level(y)?;
    let fit = fit_level(y, level);
    let residuals = y[fit.start..]
        .iter()
        .zip(&fit.fitted)
        .map(|(&o, &f)| o - f)
        .collect();
    Ok(Fit::flat(fit.forecast, horizon, residuals))
}

pub fn imapa<T: Real>(y: &[T], horizon: usize) -> Result<Fit<T>> {
    let top = adida_level(y)?;
    let fits: Vec<LevelFit<T>> = (1..=top).map(|a| fit_level(y, a)).collect();
    let k = T::from_usize_(fits.len());
    let forecast = fits.iter().map(|f| f.forecast).sum::<T>() / k;
    // residuals where every level has a fitted value
    let start = fits.iter().map(|f| f.start).max().unwrap_or(y.len());
    let residuals = (start..y.len())
        .map(|t| {
            let avg = fits.iter().map(|f| f.fitted[t - f.start]).sum::<T>() / k;
            y[t] - avg
        })
        .collect();
    Ok(Fit::flat(forecast, horizon, residuals))
}
