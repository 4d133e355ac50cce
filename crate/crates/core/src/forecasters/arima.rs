//! Non-seasonal ARIMA(p, d, q) over `p, q ∈ {0, 1, 2}`, `d ∈ {0, 1}`, with
//! and without a constant, fitted by conditional least squares and ranked
//! by AICc.

use super::ets::aicc;
use super::{is_constant, Fit};
use crate::optim::nelder_mead;
use crate::scalar::Real;
use crate::stats;

#[derive(Debug, Clone, Copy)]
struct Order {
    p: usize,
    d: usize,
    q: usize,
    constant: bool,
}

impl Order {
    fn n_params(&self) -> usize {
        self.p + self.q + usize::from(self.constant)
    }
}

/// Root condition for `1 - a1 z - a2 z^2` (order at most two).
fn stable<T: Real>(a: &[T]) -> bool {
    match a {
        [] => true,
        [a1] => a1.abs() < T::one(),
        [a1, a2] => *a2 + *a1 < T::one() && *a2 - *a1 < T::one() && a2.abs() < T::one(),
        _ => false,
    }
}

struct Coefs<'a, T> {
    c: T,
    ar: &'a [T],
    ma: &'a [T],
}

fn unpack<T: Real>(order: Order, params: &[T]) -> Coefs<'_, T> {
    let off = usize::from(order.constant);
    Coefs {
        c: if order.constant { params[0] } else { T::zero() },
        ar: &params[off..off + order.p],
        ma: &params[off + order.p..off + order.p + order.q],
    }
}

/// Conditional innovations for `w[p..]`, with pre-sample innovations zero.
fn innovations<T: Real>(w: &[T], coefs: &Coefs<'_, T>) -> Vec<T> {
    let p = coefs.ar.len();
    let mut e = vec![T::zero(); w.len()];
    for t in p..w.len() {
        let mut pred = coefs.c;
        for (i, &phi) in coefs.ar.iter().enumerate() {
            pred += phi * w[t - 1 - i];
        }
        for (j, &theta) in coefs.ma.iter().enumerate() {
            if t > j {
                pred += theta * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
    }
    e.drain(..p);
    e
}

fn css<T: Real>(w: &[T], order: Order, params: &[T]) -> T {
    let coefs = unpack(order, params);
    let neg_ma: Vec<T> = coefs.ma.iter().map(|&t| -t).collect();
    if !stable(coefs.ar) || !stable(&neg_ma) {
        return T::infinity();
    }
    innovations(w, &coefs).iter().map(|&e| e * e).sum()
}

struct Candidate<T> {
    aicc: T,
    forecast: Vec<T>,
    residuals: Vec<T>,
}

fn fit_order<T: Real>(y: &[T], order: Order, horizon: usize) -> Option<Candidate<T>> {
    let w: Vec<T> = if order.d == 1 {
        y.windows(2).map(|p| p[1] - p[0]).collect()
    } else {
        y.to_vec()
    };
    let n_eff = w.len().checked_sub(order.p)?;
    let k = order.n_params();
    // sigma^2 counts as one more parameter
    if n_eff <= k + 2 {
        return None;
    }
    let scale = stats::sample_sd(&w).max(T::lit(1e-8));
    let mut start = Vec::with_capacity(k);
    let mut steps = Vec::with_capacity(k);
    if order.constant {
        start.push(stats::mean(&w));
        steps.push(scale * T::lit(0.1));
    }
    for _ in 0..order.p + order.q {
        start.push(T::zero());
        steps.push(T::lit(0.1));
    }
    let (params, sse) = if k == 0 {
        (Vec::new(), css(&w, order, &[]))
    } else {
        nelder_mead(&start, &steps, 300 + 150 * k, T::lit(1e-12), |p| {
            css(&w, order, p)
        })
    };
    if !sse.is_finite() {
        return None;
    }
    let score = aicc(sse, n_eff, k + 1)?;
    let coefs = unpack(order, &params);
    let e = innovations(&w, &coefs);

    // iterate the difference-scale recursion with future innovations at zero
    let mut wf = w.clone();
    let mut ef: Vec<T> = vec![T::zero(); order.p];
    ef.extend_from_slice(&e);
    for _ in 0..horizon {
        let t = wf.len();
        let mut pred = coefs.c;
        for (i, &phi) in coefs.ar.iter().enumerate() {
            pred += phi * wf[t - 1 - i];
        }
        for (j, &theta) in coefs.ma.iter().enumerate() {
            if t > j {
                pred += theta * ef[t - 1 - j];
            }
        }
        wf.push(pred);
        ef.push(T::zero());
    }
    let steps_ahead = &wf[w.len()..];
    let forecast = if order.d == 1 {
        let mut last = *y.last()?;
        steps_ahead
            .iter()
            .map(|&dw| {
                last += dw;
                last
            })
            .collect()
    } else {
        steps_ahead.to_vec()
    };
    Some(Candidate {
        aicc: score,
        forecast,
        residuals: e,
    })
}

pub fn arima<T: Real>(y: &[T], horizon: usize) -> Fit<T> {
    if is_constant(y) {
        return Fit::flat(y[0], horizon, vec![T::zero(); y.len() - 1]);
    }
    if y.len() < 3 {
        return Fit::mean_fallback(y, horizon);
    }
    let mut best: Option<Candidate<T>> = None;
    for d in 0..=1 {
        for p in 0..=2 {
            for q in 0..=2 {
                for constant in [false, true] {
                    let order = Order { p, d, q, constant };
                    if let Some(c) = fit_order(y, order, horizon) {
                        if best.as_ref().is_none_or(|b| c.aicc < b.aicc) {
                            best = Some(c);
                        }
                    }
                }
            }
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
