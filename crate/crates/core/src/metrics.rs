//! Scaled point and quantile losses and rank summaries.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecasters::MethodId;
use crate::scalar::Real;

fn mean_sq_diff<T: Real>(history: &[T]) -> T {
    history
        .windows(2)
        .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
        .sum::<T>()
        / T::from_usize_(history.len() - 1)
}

fn mean_abs_diff<T: Real>(history: &[T]) -> T {
    history.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<T>() / T::from_usize_(history.len() - 1)
}

/// Root mean squared error scaled by the mean squared first difference of
/// the history.
pub fn rmsse<T: Real>(history: &[T], forecast: &[T], actual: &[T]) -> Result<T> {
    debug_assert_eq!(forecast.len(), actual.len());
    if history.len() < 2 {
        return Err(Error::UndefinedScale);
    }
    let scale = mean_sq_diff(history);
    if scale <= T::zero() {
        return Err(Error::UndefinedScale);
    }
    let mse = forecast
        .iter()
        .zip(actual)
        .map(|(&f, &a)| (a - f) * (a - f))
        .sum::<T>()
        / T::from_usize_(actual.len());
    Ok((mse / scale).sqrt())
}

/// Pinball loss of one quantile forecast; `q == y` takes the
/// under-forecast branch, which is zero.
pub fn pinball<T: Real>(q: T, y: T, u: T) -> T {
    if q <= y {
        u * (y - q)
    } else {
        (T::one() - u) * (q - y)
    }
}

/// Scaled pinball loss at level `u`.
pub fn spl<T: Real>(history: &[T], qforecast: &[T], actual: &[T], u: T) -> Result<T> {
    debug_assert_eq!(qforecast.len(), actual.len());
    if history.len() < 2 {
        return Err(Error::UndefinedScale);
    }
    let scale = mean_abs_diff(history);
    if scale <= T::zero() {
        return Err(Error::UndefinedScale);
    }
    let total: T = qforecast
        .iter()
        .zip(actual)
        .map(|(&q, &y)| pinball(q, y, u))
        .sum();
    Ok(total / (T::from_usize_(actual.len()) * scale))
}

/// Loss used to score base methods and as the meta-learning target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum LossKind {
    #[default]
    Rmsse,
    Spl(f64),
}

impl LossKind {
    pub fn quantile(self) -> Option<f64> {
        match self {
            LossKind::Rmsse => None,
            LossKind::Spl(u) => Some(u),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::Rmsse => f.write_str("rmsse"),
            LossKind::Spl(u) => write!(f, "spl@{u:.3}"),
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "rmsse" {
            return Ok(LossKind::Rmsse);
        }
        if let Some(u) = lower.strip_prefix("spl@") {
            let u: f64 = u
                .parse()
                .map_err(|_| Error::Validation(format!("bad quantile level in {s:?}")))?;
            if u > 0.0 && u < 1.0 {
                return Ok(LossKind::Spl(u));
            }
        }
        Err(Error::Validation(format!(
            "loss must be rmsse or spl@<u> with 0 < u < 1, got {s:?}"
        )))
    }
}

impl TryFrom<String> for LossKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LossKind> for String {
    fn from(l: LossKind) -> String {
        l.to_string()
    }
}

/// Per-series, per-method losses.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix<T = f64> {
    pub loss_kind: LossKind,
    pub series_ids: Vec<String>,
    pub methods: Vec<MethodId>,
    /// `values[n][i]` is the loss of method `i` on series `n`.
    pub values: Vec<Vec<T>>,
}

impl<T: Real> ErrorMatrix<T> {
    /// Mean loss of each method over all series.
    pub fn column_means(&self) -> Vec<T> {
        column_means(&self.values, self.methods.len())
    }
}

pub(crate) fn column_means<T: Real>(rows: &[Vec<T>], m: usize) -> Vec<T> {
    let n = T::from_usize_(rows.len().max(1));
    (0..m).map(|i| rows.iter().map(|r| r[i]).sum::<T>() / n).collect()
}

/// Ranks of one row, ascending, ties sharing their mean rank.
pub fn rank_row<T: Real>(row: &[T]) -> Vec<T> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| {
        row[a]
            .partial_cmp(&row[b])
            .expect("finite losses")
            .then(a.cmp(&b))
    });
    let mut ranks = vec![T::zero(); row.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && row[idx[end]] == row[idx[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = T::from_usize_(start + 1 + end) / T::lit(2.0);
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Mean rank of each column across rows.
pub fn average_rank<T: Real>(rows: &[Vec<T>]) -> Vec<T> {
    let m = rows.first().map_or(0, Vec::len);
    let ranked: Vec<Vec<T>> = rows.iter().map(|r| rank_row(r)).collect();
    column_means(&ranked, m)
}
