//! Small descriptive statistics helpers.

use crate::scalar::Real;

pub fn mean<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    xs.iter().copied().sum::<T>() / T::from_usize_(xs.len())
}

/// Sample variance with the `n - 1` denominator; zero for fewer than two points.
pub fn sample_variance<T: Real>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let m = mean(xs);
    let ss: T = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    ss / T::from_usize_(xs.len() - 1)
}

pub fn sample_sd<T: Real>(xs: &[T]) -> T {
    sample_variance(xs).sqrt()
}

/// Quantile of an already sorted sample with linear interpolation between
/// order statistics at index `(n - 1) * u` (Hyndman & Fan type 7).
pub fn quantile_sorted<T: Real>(sorted: &[T], u: T) -> T {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = T::from_usize_(n - 1) * u;
    let lo = pos.floor();
    let lo_idx = lo.to_usize().unwrap_or(0).min(n - 1);
    let hi_idx = (lo_idx + 1).min(n - 1);
    let frac = pos - lo;
    if frac == T::zero() || lo_idx == hi_idx {
        return sorted[lo_idx];
    }
    sorted[lo_idx] + frac * (sorted[hi_idx] - sorted[lo_idx])
}

/// Type-7 quantile of an unsorted sample.
pub fn quantile<T: Real>(xs: &[T], u: T) -> T {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    quantile_sorted(&sorted, u)
}

/// Median; mean of the middle two for even lengths.
pub fn median<T: Real>(xs: &[T]) -> T {
    quantile(xs, T::lit(0.5))
}

/// Least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn ols_slope<T: Real>(ys: &[T]) -> T {
    let n = ys.len();
    if n < 2 {
        return T::zero();
    }
    let xbar = T::from_usize_(n - 1) / T::lit(2.0);
    let ybar = mean(ys);
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (i, &y) in ys.iter().enumerate() {
        let dx = T::from_usize_(i) - xbar;
        sxy += dx * (y - ybar);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson<T: Real>(a: &[T], b: &[T]) -> Option<T> {
    debug_assert_eq!(a.len(), b.len());
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = T::zero();
    let mut saa = T::zero();
    let mut sbb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= T::zero() || sbb <= T::zero() {
        return None;
    }
    Some(sab / (saa.sqrt() * sbb.sqrt()))
}
