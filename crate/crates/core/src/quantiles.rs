//! Quantile forecasts from point forecasts shifted by empirical residual
//! quantiles. Residuals follow `e_t = y_t - ŷ_t`, so upper quantiles raise
//! the forecast.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stats;

/// Quantile levels evaluated throughout the pipeline.
pub const QUANTILE_LEVELS: [f64; 4] = [0.750, 0.835, 0.975, 0.995];

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileForecast<T = f64> {
    pub u: T,
    pub values: Vec<T>,
}

/// Type-7 empirical quantile of the residuals.
pub fn residual_quantile<T: Real>(residuals: &[T], u: T) -> Result<T> {
    if residuals.is_empty() {
        return Err(Error::NoResiduals);
    }
    if !(u > T::zero() && u < T::one()) {
        return Err(Error::Validation(format!("quantile level {u} outside (0, 1)")));
    }
    Ok(stats::quantile(residuals, u))
}

/// Shifts every step by the same residual quantile and clamps at zero.
pub fn quantile_forecast<T: Real>(point: &[T], residuals: &[T], u: T) -> Result<QuantileForecast<T>> {
    let shift = residual_quantile(residuals, u)?;
    Ok(QuantileForecast {
        u,
        values: point.iter().map(|&p| (p + shift).max(T::zero())).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn residual_quantile_cases() {
        assert_eq!(residual_quantile(&[-1.0, 0.0, 1.0], 0.5).unwrap(), 0.0);
        assert_eq!(residual_quantile(&[0.0; 4], 0.9).unwrap(), 0.0);
        // index (4 - 1) * 0.75 = 2.25 -> 3 + 0.25 * (4 - 3)
        assert_eq!(residual_quantile(&[1.0, 2.0, 3.0, 4.0], 0.75).unwrap(), 3.25);
        assert!(matches!(
            residual_quantile::<f64>(&[], 0.5),
            Err(Error::NoResiduals)
        ));
    }

    #[test]
    fn shift_and_clamp() {
        // a single residual of 1.5 has quantile 1.5 at every level
        let q = quantile_forecast(&[2.0, 2.0], &[1.5], 0.975).unwrap();
        assert_eq!(q.values, vec![3.5, 3.5]);
        let q = quantile_forecast(&[0.0, 0.0], &[-2.0], 0.5).unwrap();
        assert_eq!(q.values, vec![0.0, 0.0]);
        let q = quantile_forecast(&[1.0, 2.0, 3.0], &[-1.0, 0.0, 1.0], 0.5).unwrap();
        assert_eq!(q.values, vec![1.0, 2.0, 3.0]);
    }

    proptest! {
        #[test]
        fn monotone_in_level(
            point in prop::collection::vec(0.0f64..10.0, 1..6),
            res in prop::collection::vec(-5.0f64..5.0, 1..30),
            u1 in 0.01f64..0.99,
            u2 in 0.01f64..0.99,
        ) {
            let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            let a = quantile_forecast(&point, &res, lo).unwrap();
            let b = quantile_forecast(&point, &res, hi).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!(x <= y);
            }
        }
    }
}
