//! Additive-error exponential smoothing over a restricted model set
//! `{(A,N,N), (A,A,N), (A,Ad,N)}` selected by AICc.

use super::smoothing::{ses_alpha, ses_path};
use super::{is_constant, residuals_from, Fit};
use crate::optim::nelder_mead;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trend {
    Additive,
    Damped,
}

const PHI_MIN: f64 = 0.8;
const PHI_MAX: f64 = 0.98;

struct Candidate<T> {
    aicc: T,
    forecast: Vec<T>,
    residuals: Vec<T>,
}

/// Trend recursions started at `l0 = y[0]`, `b0 = y[1] - y[0]`.
/// Returns (level, trend, fitted values for `y[1..]`).
fn trend_path<T: Real>(y: &[T], alpha: T, beta: T, phi: T) -> (T, T, Vec<T>) {
    let mut level = y[0];
    let mut trend = y[1] - y[0];
    let mut fitted = Vec::with_capacity(y.len() - 1);
    for &obs in &y[1..] {
        let pred = level + phi * trend;
        fitted.push(pred);
        let err = obs - pred;
        level = pred + alpha * err;
        trend = phi * trend + beta * err;
    }
    (level, trend, fitted)
}

fn sse<T: Real>(y: &[T], fitted: &[T]) -> T {
    y[1..].iter().zip(fitted).map(|(&o, &f)| (o - f) * (o - f)).sum()
}

/// AICc from the Gaussian log-likelihood; `None` when the sample is too
/// small for the parameter count.
pub(crate) fn aicc<T: Real>(sse: T, n: usize, k: usize) -> Option<T> {
    if n <= k + 1 {
        return None;
    }
    let nt = T::from_usize_(n);
    let kt = T::from_usize_(k);
    let sigma2 = (sse / nt).max(T::min_positive_value());
    let aic = nt * sigma2.ln() + T::lit(2.0) * kt;
    Some(aic + T::lit(2.0) * kt * (kt + T::one()) / (nt - kt - T::one()))
}

fn fit_trend<T: Real>(y: &[T], kind: Trend, horizon: usize) -> Option<Candidate<T>> {
    let objective = |p: &[T]| {
        let (alpha, beta) = (p[0], p[1]);
        let phi = if kind == Trend::Damped { p[2] } else { T::one() };
        let smoothing_ok = alpha > T::zero() && alpha < T::one() && beta > T::zero() && beta < alpha;
        let phi_ok = kind != Trend::Damped || (phi >= T::lit(PHI_MIN) && phi <= T::lit(PHI_MAX));
        if !(smoothing_ok && phi_ok) {
            return T::infinity();
        }
        let (_, _, fitted) = trend_path(y, alpha, beta, phi);
        sse(y, &fitted)
    };
    let (start, steps): (Vec<T>, Vec<T>) = match kind {
        Trend::Additive => (vec![T::lit(0.3), T::lit(0.05)], vec![T::lit(0.1), T::lit(0.02)]),
        Trend::Damped => (
            vec![T::lit(0.3), T::lit(0.05), T::lit(0.9)],
            vec![T::lit(0.1), T::lit(0.02), T::lit(0.03)],
        ),
    };
    let (p, best) = nelder_mead(&start, &steps, 400, T::lit(1e-10), objective);
    if !best.is_finite() {
        return None;
    }
    let (alpha, beta) = (p[0], p[1]);
    let phi = if kind == Trend::Damped { p[2] } else { T::one() };
    let (level, trend, fitted) = trend_path(y, alpha, beta, phi);
    let params = if kind == Trend::Damped { 5 } else { 4 };
    let aicc = aicc(best, fitted.len(), params + 1)?;
    let mut damp = T::zero();
    let mut power = T::one();
    let forecast = (0..horizon)
        .map(|_| {
            power *= phi;
            damp += power;
            level + damp * trend
        })
        .collect();
    Some(Candidate {
        aicc,
        forecast,
        residuals: residuals_from(y, 1, &fitted),
    })
}

fn fit_level<T: Real>(y: &[T], horizon: usize) -> Option<Candidate<T>> {
    let alpha = ses_alpha(y);
    let (level, fitted) = ses_path(y, alpha);
    let aicc = aicc(sse(y, &fitted), fitted.len(), 3)?;
    Some(Candidate {
        aicc,
        forecast: vec![level; horizon],
        residuals: residuals_from(y, 1, &fitted),
    })
}

pub fn ets<T: Real>(y: &[T], horizon: usize) -> Fit<T> {
    if is_constant(y) {
        return Fit::flat(y[0], horizon, vec![T::zero(); y.len() - 1]);
    }
    if y.len() < 3 {
        return Fit::mean_fallback(y, horizon);
    }
    let candidates = [
        fit_level(y, horizon),
        fit_trend(y, Trend::Additive, horizon),
        fit_trend(y, Trend::Damped, horizon),
    ];
    let mut best: Option<Candidate<T>> = None;
    for c in candidates.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| c.aicc < b.aicc) {
            best = Some(c);
        }
    }
    match best {
        Some(c) => Fit {
            forecast: c.forecast,
            residuals: c.residuals,
        },
        None => Fit::mean_fallback(y, horizon),
    }
}
