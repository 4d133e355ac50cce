//! Croston-type methods: separate smoothing of non-zero demand sizes and
//! of the intervals between them (CRO, OptCro, SBA), and the TSB variant
//! which smooths the demand probability instead.

use super::Fit;
use crate::error::{Error, Result};
use crate::optim::{argmin_first, unit_grid};
use crate::scalar::Real;

/// Fixed smoothing parameter of the unoptimised variants.
pub const CROSTON_ALPHA: f64 = 0.1;

struct CrostonPath<T> {
    rate: T,
    /// One-step fitted rates for `y[start..]`.
    start: usize,
    fitted: Vec<T>,
}

/// Size/interval recursions. The first two demands initialise the state:
/// the interval starts at the first observed gap.
fn croston_path<T: Real>(y: &[T], alpha_size: T, alpha_interval: T) -> Option<CrostonPath<T>> {
    let mut demands = y.iter().enumerate().filter(|(_, &v)| v > T::zero());
    let (d0, &z0) = demands.next()?;
    let (d1, &z1) = demands.next()?;
    let mut size = z0 + alpha_size * (z1 - z0);
    let mut interval = T::from_usize_(d1 - d0);
    let mut last = d1;
    let mut fitted = Vec::with_capacity(y.len() - d1 - 1);
    for (t, &obs) in y.iter().enumerate().skip(d1 + 1) {
        fitted.push(size / interval);
        if obs > T::zero() {
            size += alpha_size * (obs - size);
            interval += alpha_interval * (T::from_usize_(t - last) - interval);
            last = t;
        }
    }
    Some(CrostonPath {
        rate: size / interval,
        start: d1 + 1,
        fitted,
    })
}

fn residuals<T: Real>(y: &[T], start: usize, fitted: &[T], factor: T) -> Vec<T> {
    y[start..]
        .iter()
        .zip(fitted)
        .map(|(&o, &f)| o - factor * f)
        .collect()
}

#[cfg(test)]
fn mse<T: Real>(y: &[T], start: usize, fitted: &[T]) -> T {
    if fitted.is_empty() {
        return T::zero();
    }
    let s: T = y[start..]
        .iter()
        .zip(fitted)
        .map(|(&o, &f)| (o - f) * (o - f))
        .sum();
    s / T::from_usize_(fitted.len())
}

/// Rate estimate for a history with a single demand.
fn single_demand<T: Real>(y: &[T], horizon: usize, factor: T) -> Result<Fit<T>> {
    let size = y
        .iter()
        .copied()
        .find(|&v| v > T::zero())
        .ok_or_else(|| Error::NoDemand(String::new()))?;
    let rate = factor * size / T::from_usize_(y.len());
    Ok(Fit::flat(rate, horizon, y.iter().map(|&v| v - rate).collect()))
}

fn croston_fit<T: Real>(y: &[T], a_size: T, a_int: T, factor: T, horizon: usize) -> Result<Fit<T>> {
    match croston_path(y, a_size, a_int) {
        Some(p) => Ok(Fit::flat(
            factor * p.rate,
            horizon,
            residuals(y, p.start, &p.fitted, factor),
        )),
        None => single_demand(y, horizon, factor),
    }
}

/// Croston with both smoothing parameters set to `alpha`.
pub fn croston_with<T: Real>(y: &[T], alpha: T, horizon: usize) -> Result<Fit<T>> {
    croston_fit(y, alpha, alpha, T::one(), horizon)
}

pub fn croston<T: Real>(y: &[T], horizon: usize) -> Result<Fit<T>> {
    croston_with(y, T::lit(CROSTON_ALPHA), horizon)
}

/// Syntetos–Boylan approximation: Croston scaled by `1 - alpha / 2`.
pub fn sba<T: Real>(y: &[T], horizon: usize) -> Result<Fit<T>> {
    let alpha = T::lit(CROSTON_ALPHA);
    croston_fit(y, alpha, alpha, T::one() - alpha / T::lit(2.0), horizon)
}

/// In-sample one-step MSE of the Croston rate for the given parameters.
///
/// Streams the recursion of `croston_path` without storing the fitted
/// values; the grid search calls this ~10^4 times per series.
pub(crate) fn croston_mse<T: Real>(y: &[T], a_size: T, a_int: T) -> Option<T> {
    let mut demands = y.iter().enumerate().filter(|(_, &v)| v > T::zero());
    let (d0, &z0) = demands.next()?;
    let (d1, &z1) = demands.next()?;
    let mut size = z0 + a_size * (z1 - z0);
    let mut interval = T::from_usize_(d1 - d0);
    let mut last = d1;
    let mut total = T::zero();
    let mut f = size / interval;
    for (t, &obs) in y.iter().enumerate().skip(d1 + 1) {
        total += (obs - f) * (obs - f);
        if obs > T::zero() {
            size += a_size * (obs - size);
            interval += a_int * (T::from_usize_(t - last) - interval);
            last = t;
            f = size / interval;
        }
    }
    let n = y.len() - d1 - 1;
    Some(if n == 0 {
        T::zero()
    } else {
        total / T::from_usize_(n)
    })
}

/// Croston with `(alpha_size, alpha_interval)` chosen jointly on the grid.
pub fn opt_croston<T: Real>(y: &[T], horizon: usize) -> Result<Fit<T>> {
    let grid = unit_grid::<T>().flat_map(|a| unit_grid::<T>().map(move |b| (a, b)));
    match argmin_first(grid, |&(a, b)| croston_mse(y, a, b).unwrap_or(T::infinity())) {
        Some(((a, b), _)) => croston_fit(y, a, b, T::one(), horizon),
        None => single_demand(y, horizon, T::one()),
    }
}

struct TsbPath<T> {
    forecast: T,
    fitted: Vec<T>,
}

/// Probability/size recursions; the probability starts at the overall
/// demand frequency and the size at the first demand.
fn tsb_path<T: Real>(y: &[T], alpha_size: T, beta_prob: T) -> Option<TsbPath<T>> {
    let first = y.iter().copied().find(|&v| v > T::zero())?;
    let hits = y.iter().filter(|&&v| v > T::zero()).count();
    let mut prob = T::from_usize_(hits) / T::from_usize_(y.len());
    let mut size = first;
    let mut fitted = Vec::with_capacity(y.len().saturating_sub(1));
    for &obs in &y[1..] {
        fitted.push(prob * size);
        if obs > T::zero() {
            prob += beta_prob * (T::one() - prob);
            size += alpha_size * (obs - size);
        } else {
            prob -= beta_prob * prob;
        }
    }
    Some(TsbPath {
        forecast: prob * size,
        fitted,
    })
}

pub fn tsb_with<T: Real>(y: &[T], alpha_size: T, beta_prob: T, horizon: usize) -> Result<Fit<T>> {
    let p = tsb_path(y, alpha_size, beta_prob).ok_or_else(|| Error::NoDemand(String::new()))?;
    Ok(Fit::flat(
        p.forecast,
        horizon,
        residuals(y, 1, &p.fitted, T::one()),
    ))
}

/// Streaming counterpart of `tsb_path` returning the in-sample MSE.
pub(crate) fn tsb_mse<T: Real>(y: &[T], a: T, b: T) -> Option<T> {
    let first = y.iter().copied().find(|&v| v > T::zero())?;
    let hits = y.iter().filter(|&&v| v > T::zero()).count();
    let mut prob = T::from_usize_(hits) / T::from_usize_(y.len());
    let mut size = first;
    let mut total = T::zero();
    for &obs in &y[1..] {
        let f = prob * size;
        total += (obs - f) * (obs - f);
        if obs > T::zero() {
            prob += b * (T::one() - prob);
            size += a * (obs - size);
        } else {
            prob -= b * prob;
        }
    }
    let n = y.len() - 1;
    Some(if n == 0 {
        T::zero()
    } else {
        total / T::from_usize_(n)
    })
}

/// TSB with both parameters chosen on the grid.
pub fn tsb<T: Real>(y: &[T], horizon: usize) -> Result<Fit<T>> {
    let grid = unit_grid::<T>().flat_map(|a| unit_grid::<T>().map(move |b| (a, b)));
    let ((a, b), _) = argmin_first(grid, |&(a, b)| tsb_mse(y, a, b).unwrap_or(T::infinity()))
        .ok_or_else(|| Error::NoDemand(String::new()))?;
    tsb_with(y, a, b, horizon)
}
