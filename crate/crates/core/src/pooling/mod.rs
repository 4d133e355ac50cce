//! Pool shrinking before meta-training.
//!
//! Three selectors are provided: islands (cut the ranked pool at the first
//! outlying performance gap), screened (greedy rejection of methods whose
//! errors are highly correlated with an already kept one) and lasso (keep
//! methods with a non-zero L1-penalised regression coefficient).

mod lasso;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use lasso::{lasso_path, LassoFit, LASSO_FOLDS, LASSO_PATH_LEN, LASSO_TOL};

use crate::combiner::{error_row, InnerFit};
use crate::error::{Error, Result};
use crate::forecasters::MethodId;
use crate::metrics::LossKind;
use crate::stats;

/// Correlation above which a candidate is screened out.
pub const SCREEN_MAX_CORRELATION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PoolingAlgorithm {
    #[default]
    None,
    Islands,
    Screened,
    Lasso,
}

impl fmt::Display for PoolingAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolingAlgorithm::None => "none",
            PoolingAlgorithm::Islands => "islands",
            PoolingAlgorithm::Screened => "screened",
            PoolingAlgorithm::Lasso => "lasso",
        })
    }
}

impl FromStr for PoolingAlgorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PoolingAlgorithm::None),
            "islands" => Ok(PoolingAlgorithm::Islands),
            "screened" => Ok(PoolingAlgorithm::Screened),
            "lasso" => Ok(PoolingAlgorithm::Lasso),
            _ => Err(Error::Validation(format!(
                "pooling must be none, islands, screened or lasso, got {s:?}"
            ))),
        }
    }
}

/// What the islands threshold is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GapMode {
    /// Successive differences of the sorted criterion.
    #[default]
    Gaps,
    /// Distance of each sorted criterion from the best one.
    Cumulative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct PoolDiagnostics {
    /// Per-method criterion, in pool order.
    pub criterion: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaps: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Pairwise error correlations in pool order; `None` for zero variance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlations: Option<Vec<Vec<Option<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolSelection {
    pub algorithm: PoolingAlgorithm,
    /// Retained methods, in pool order.
    pub kept: Vec<MethodId>,
    pub diagnostics: PoolDiagnostics,
}

fn check_pool(methods: &[MethodId], criterion: &[f64]) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::Validation("empty method pool".into()));
    }
    if criterion.len() != methods.len() {
        return Err(Error::DimensionMismatch {
            expected: methods.len(),
            got: criterion.len(),
        });
    }
    Ok(())
}

/// Indices sorted by criterion, ties to the lower index.
fn ranking(criterion: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..criterion.len()).collect();
    idx.sort_by(|&a, &b| criterion[a].total_cmp(&criterion[b]).then(a.cmp(&b)));
    idx
}

fn best_index(criterion: &[f64]) -> usize {
    ranking(criterion)[0]
}

fn in_pool_order(methods: &[MethodId], mut idx: Vec<usize>) -> Vec<MethodId> {
    idx.sort_unstable();
    idx.into_iter().map(|i| methods[i]).collect()
}

/// The full pool.
pub fn pool_none(methods: &[MethodId], criterion: &[f64]) -> Result<PoolSelection> {
    check_pool(methods, criterion)?;
    Ok(PoolSelection {
        algorithm: PoolingAlgorithm::None,
        kept: methods.to_vec(),
        diagnostics: PoolDiagnostics {
            criterion: criterion.to_vec(),
            ..PoolDiagnostics::default()
        },
    })
}

/// Keeps the ranked methods before the first gap at or above
/// `Q3 + 1.5 IQR` of the gaps.
pub fn pool_islands(methods: &[MethodId], criterion: &[f64], mode: GapMode) -> Result<PoolSelection> {
    check_pool(methods, criterion)?;
    let order = ranking(criterion);
    let sorted: Vec<f64> = order.iter().map(|&i| criterion[i]).collect();
    let gaps: Vec<f64> = (0..sorted.len())
        .map(|j| match (j, mode) {
            (0, _) => 0.0,
            (_, GapMode::Gaps) => sorted[j] - sorted[j - 1],
            (_, GapMode::Cumulative) => sorted[j] - sorted[0],
        })
        .collect();
    let q1 = stats::quantile(&gaps, 0.25);
    let q3 = stats::quantile(&gaps, 0.75);
    let tau = q3 + 1.5 * (q3 - q1);
    let cut = if tau > 0.0 {
        (1..gaps.len())
            .find(|&j| gaps[j] > 0.0 && gaps[j] >= tau)
            .unwrap_or(gaps.len())
    } else {
        gaps.len()
    };
    Ok(PoolSelection {
        algorithm: PoolingAlgorithm::Islands,
        kept: in_pool_order(methods, order[..cut].to_vec()),
        diagnostics: PoolDiagnostics {
            criterion: criterion.to_vec(),
            gaps: Some(gaps),
            threshold: Some(tau),
            ..PoolDiagnostics::default()
        },
    })
}

/// Greedy acceptance by criterion, rejecting any method whose errors
/// correlate above the limit with an accepted one.
///
/// A zero-variance error sequence is only accepted as the best method;
/// later candidates are not compared against it.
pub fn pool_screened(methods: &[MethodId], errors: &[Vec<f64>], criterion: &[f64]) -> Result<PoolSelection> {
    check_pool(methods, criterion)?;
    if errors.len() != methods.len() {
        return Err(Error::DimensionMismatch {
            expected: methods.len(),
            got: errors.len(),
        });
    }
    let n = errors[0].len();
    if let Some(bad) = errors.iter().find(|e| e.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    let m = methods.len();
    let mut corr = vec![vec![None; m]; m];
    for i in 0..m {
        corr[i][i] = (stats::sample_variance(&errors[i]) > 0.0).then_some(1.0);
        for j in i + 1..m {
            let r = stats::pearson(&errors[i], &errors[j]);
            corr[i][j] = r;
            corr[j][i] = r;
        }
    }
    let degenerate = |i: usize| !(n >= 2 && stats::sample_variance(&errors[i]) > 0.0);
    let mut accepted: Vec<usize> = Vec::new();
    for i in ranking(criterion) {
        let ok = if accepted.is_empty() {
            true
        } else if degenerate(i) {
            false
        } else {
            accepted
                .iter()
                .filter(|&&a| !degenerate(a))
                .all(|&a| corr[i][a].is_some_and(|r| r <= SCREEN_MAX_CORRELATION))
        };
        if ok {
            accepted.push(i);
        }
    }
    Ok(PoolSelection {
        algorithm: PoolingAlgorithm::Screened,
        kept: in_pool_order(methods, accepted),
        diagnostics: PoolDiagnostics {
            criterion: criterion.to_vec(),
            correlations: Some(corr),
            ..PoolDiagnostics::default()
        },
    })
}

/// Keeps methods with a non-zero coefficient at the cross-validated
/// penalty, plus the best-criterion method.
///
/// `design[r][i]` is method `i`'s forecast at pooled point `r`.
pub fn pool_lasso(
    methods: &[MethodId],
    design: &[Vec<f64>],
    actual: &[f64],
    criterion: &[f64],
    seed: u64,
) -> Result<PoolSelection> {
    check_pool(methods, criterion)?;
    if design.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            got: design.len(),
        });
    }
    if let Some(bad) = design.iter().find(|r| r.len() != methods.len()) {
        return Err(Error::DimensionMismatch {
            expected: methods.len(),
            got: bad.len(),
        });
    }
    let fit = lasso::lasso_select(design, actual, seed);
    let best = best_index(criterion);
    let kept: Vec<usize> = (0..methods.len())
        .filter(|&i| i == best || fit.coefficients[i] != 0.0)
        .collect();
    Ok(PoolSelection {
        algorithm: PoolingAlgorithm::Lasso,
        kept: in_pool_order(methods, kept),
        diagnostics: PoolDiagnostics {
            criterion: criterion.to_vec(),
            coefficients: Some(fit.coefficients),
            lambda: Some(fit.lambda),
            ..PoolDiagnostics::default()
        },
    })
}

/// Mean inner-window RMSSE of each method.
pub fn pool_criterion(fits: &[InnerFit], methods: &[MethodId]) -> Result<Vec<f64>> {
    if fits.is_empty() {
        return Err(Error::NoUsableSeries("no series to pool on".into()));
    }
    let mut total = vec![0.0; methods.len()];
    for fit in fits {
        for (t, e) in total.iter_mut().zip(error_row(fit, LossKind::Rmsse, methods)?) {
            *t += e;
        }
    }
    Ok(total.into_iter().map(|t| t / fits.len() as f64).collect())
}

/// Runs `algorithm` on the inner-window fits of the training series.
pub fn select_pool(
    fits: &[InnerFit],
    methods: &[MethodId],
    algorithm: PoolingAlgorithm,
    gap_mode: GapMode,
    seed: u64,
) -> Result<PoolSelection> {
    let criterion = pool_criterion(fits, methods)?;
    let rows = |f: &InnerFit| f.matrix.restrict(methods);
    match algorithm {
        PoolingAlgorithm::None => pool_none(methods, &criterion),
        PoolingAlgorithm::Islands => pool_islands(methods, &criterion, gap_mode),
        PoolingAlgorithm::Screened => {
            let mut errors = vec![Vec::new(); methods.len()];
            for fit in fits {
                for (e, row) in errors.iter_mut().zip(&rows(fit).values) {
                    e.extend(fit.actual.iter().zip(row).map(|(y, f)| y - f));
                }
            }
            pool_screened(methods, &errors, &criterion)
        }
        PoolingAlgorithm::Lasso => {
            let mut design = Vec::new();
            let mut actual = Vec::new();
            for fit in fits {
                let fm = rows(fit);
                for (h, &y) in fit.actual.iter().enumerate() {
                    design.push(fm.values.iter().map(|r| r[h]).collect());
                    actual.push(y);
                }
            }
            pool_lasso(methods, &design, &actual, &criterion, seed)
        }
    }
}
