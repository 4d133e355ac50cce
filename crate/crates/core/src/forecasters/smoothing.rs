use super::{is_constant, residuals_from, Fit};
use crate::optim::{argmin_first, unit_grid};
use crate::scalar::Real;
use crate::stats;

/// Level path of simple exponential smoothing started at `y[0]`.
///
/// Returns the final level and the one-step fitted values for
/// `y[1..]`.
pub(crate) fn ses_path<T: Real>(y: &[T], alpha: T) -> (T, Vec<T>) {
    let mut level = y[0];
    let mut fitted = Vec::with_capacity(y.len().saturating_sub(1));
    for &obs in &y[1..] {
        fitted.push(level);
        level = alpha * obs + (T::one() - alpha) * level;
    }
    (level, fitted)
}

fn mse<T: Real>(y: &[T], start: usize, fitted: &[T]) -> T {
    if fitted.is_empty() {
        return T::zero();
    }
    let sse: T = y[start..]
        .iter()
        .zip(fitted)
        .map(|(&o, &f)| (o - f) * (o - f))
        .sum();
    sse / T::from_usize_(fitted.len())
}

/// SES with a fixed smoothing parameter.
pub fn ses_with<T: Real>(y: &[T], alpha: T, horizon: usize) -> Fit<T> {
    let (level, fitted) = ses_path(y, alpha);
    Fit::flat(level, horizon, residuals_from(y, 1, &fitted))
}

/// Smoothing parameter minimising the in-sample one-step MSE over the grid.
pub(crate) fn ses_alpha<T: Real>(y: &[T]) -> T {
    argmin_first(unit_grid::<T>(), |&a| {
        let (_, fitted) = ses_path(y, a);
        mse(y, 1, &fitted)
    })
    .map(|(a, _)| a)
    .unwrap_or_else(|| T::lit(0.1))
}

/// SES with the smoothing parameter chosen on the grid; fewer than three
/// observations give the flat mean.
pub fn ses<T: Real>(y: &[T], horizon: usize) -> Fit<T> {
    if is_constant(y) {
        return Fit::flat(y[0], horizon, vec![T::zero(); y.len() - 1]);
    }
    if y.len() < 3 {
        return Fit::mean_fallback(y, horizon);
    }
    ses_with(y, ses_alpha(y), horizon)
}

/// One-step moving-average fitted values for window `k`, for `y[k..]`.
fn ma_fitted<T: Real>(y: &[T], k: usize) -> Vec<T> {
    let kt = T::from_usize_(k);
    let mut sum: T = y[..k].iter().copied().sum();
    let mut out = Vec::with_capacity(y.len() - k);
    for t in k..y.len() {
        out.push(sum / kt);
        sum += y[t] - y[t - k];
    }
    out
}

/// Moving average of the last `k` observations.
pub fn moving_average_with<T: Real>(y: &[T], k: usize, horizon: usize) -> Fit<T> {
    let k = k.clamp(1, y.len());
    let level = stats::mean(&y[y.len() - k..]);
    let residuals = if k < y.len() {
        residuals_from(y, k, &ma_fitted(y, k))
    } else {
        Vec::new()
    };
    Fit::flat(level, horizon, residuals)
}

/// Window length in `2..=min(24, T - 1)` minimising in-sample one-step MSE,
/// each window scored on the points it can predict; ties go to the shorter.
pub(crate) fn ma_order<T: Real>(y: &[T]) -> usize {
    let kmax = 24.min(y.len() - 1);
    argmin_first(2..=kmax, |&k| mse(y, k, &ma_fitted(y, k)))
        .map(|(k, _)| k)
        .unwrap_or(2)
}

pub fn moving_average<T: Real>(y: &[T], horizon: usize) -> Fit<T> {
    if is_constant(y) {
        return Fit::flat(y[0], horizon, vec![T::zero(); y.len() - 1]);
    }
    if y.len() < 3 {
        return Fit::mean_fallback(y, horizon);
    }
    moving_average_with(y, ma_order(y), horizon)
}
