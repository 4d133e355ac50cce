use super::{residuals_from, Fit};
use crate::scalar::Real;

/// Repeats the last observation.
pub fn naive<T: Real>(y: &[T], horizon: usize) -> Fit<T> {
    let last = *y.last().expect("non-empty history");
    let residuals = if y.len() > 1 {
        residuals_from(y, 1, &y[..y.len() - 1])
    } else {
        Vec::new()
    };
    Fit::flat(last, horizon, residuals)
}

/// Repeats the last seasonal cycle; plain naive when the history is shorter
/// than one period.
pub fn seasonal_naive<T: Real>(y: &[T], m: usize, horizon: usize) -> Fit<T> {
    let n = y.len();
    if m == 0 || n < m {
        return naive(y, horizon);
    }
    let forecast = (0..horizon).map(|h| y[n - m + h % m]).collect();
    let residuals = residuals_from(y, m, &y[..n - m]);
    Fit { forecast, residuals }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_repeats_last() {
        assert_eq!(naive(&[1.0, 2.0, 3.0], 2).forecast, vec![3.0, 3.0]);
        assert_eq!(naive(&[4.0], 3).forecast, vec![4.0, 4.0, 4.0]);
        assert_eq!(naive(&[1.0, 2.0, 4.0], 1).residuals, vec![1.0, 2.0]);
    }

    #[test]
    fn seasonal_naive_index_arithmetic() {
        let y: Vec<f64> = (1..=13).map(f64::from).collect();
        let m = 12;
        let fit = seasonal_naive(&y, m, 2);
        // oracle: 1-based y_{T-m+h} for h <= m
        let t = y.len();
        let oracle: Vec<f64> = (1..=2).map(|h| y[t - m + h - 1]).collect();
        assert_eq!(fit.forecast, oracle);
        assert_eq!(fit.forecast, vec![2.0, 3.0]);
    }

    #[test]
    fn seasonal_naive_wraps_and_falls_back() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(seasonal_naive(&y, 2, 5).forecast, vec![3.0, 4.0, 3.0, 4.0, 3.0]);
        assert_eq!(seasonal_naive(&y, 12, 2).forecast, vec![4.0, 4.0]);
    }
}
