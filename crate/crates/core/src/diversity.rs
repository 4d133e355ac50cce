//! Scaled pairwise disagreement between pool members.

use crate::forecasters::{ForecastMatrix, MethodId};
use crate::scalar::Real;

/// Mean squared difference of two forecasts over the horizon, divided by the
/// squared mean absolute level of the history.
pub fn pair_diversity<T: Real>(fi: &[T], fj: &[T], history: &[T]) -> T {
    debug_assert_eq!(fi.len(), fj.len());
    let h = T::from_usize_(fi.len());
    let msd = fi.iter().zip(fj).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / h;
    let scale = history.iter().map(|v| v.abs()).sum::<T>() / T::from_usize_(history.len());
    msd / (scale * scale)
}

/// Canonical pair order: `(i, j)` with `i < j`, lexicographic.
pub fn pair_indices(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityVector<T = f64> {
    pub series_id: String,
    pub methods: Vec<MethodId>,
    pub values: Vec<T>,
}

impl<T: Real> DiversityVector<T> {
    /// Column names `d_<i>_<j>` using pool indices of the methods.
    pub fn column_names(methods: &[MethodId]) -> Vec<String> {
        pair_indices(methods.len())
            .into_iter()
            .map(|(i, j)| format!("d_{}_{}", methods[i].index(), methods[j].index()))
            .collect()
    }
}

pub fn diversity_vector<T: Real>(fm: &ForecastMatrix<T>, history: &[T]) -> DiversityVector<T> {
    let values = pair_indices(fm.n_methods())
        .into_iter()
        .map(|(i, j)| pair_diversity(&fm.values[i], &fm.values[j], history))
        .collect();
    DiversityVector {
        series_id: fm.series_id.clone(),
        methods: fm.methods.clone(),
        values,
    }
}
