//! L1-penalised least squares without intercept by cyclic coordinate
//! descent, with the penalty chosen by K-fold cross-validation.
//!
//! Columns are rescaled to unit mean square (not centred, so a zero
//! coefficient still removes the method entirely); the response is left
//! as is.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::stats;

pub const LASSO_PATH_LEN: usize = 50;
pub const LASSO_FOLDS: usize = 5;
pub const LASSO_TOL: f64 = 1e-8;
const LAMBDA_RATIO: f64 = 1e-4;
const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    /// Coefficients on the original column scale.
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub lambdas: Vec<f64>,
    /// Selection score per path point: CV mean squared error, or training
    /// error when there are too few rows to cross-validate.
    pub path_mse: Vec<f64>,
}

struct Scaled {
    /// Column-major, unit mean square (zero columns left at zero).
    cols: Vec<Vec<f64>>,
    scale: Vec<f64>,
}

#[allow(clippy::needless_range_loop)]
fn scale_columns(x: &[Vec<f64>], rows: &[usize], p: usize) -> Scaled {
    let n = rows.len() as f64;
    let mut cols = Vec::with_capacity(p);
    let mut scale = Vec::with_capacity(p);
    for j in 0..p {
        let col: Vec<f64> = rows.iter().map(|&r| x[r][j]).collect();
        let ms = col.iter().map(|v| v * v).sum::<f64>() / n;
        let s = ms.sqrt();
        if s > 0.0 {
            cols.push(col.iter().map(|v| v / s).collect());
        } else {
            cols.push(vec![0.0; rows.len()]);
        }
        scale.push(s);
    }
    Scaled { cols, scale }
}

fn objective(resid: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = resid.len() as f64;
    resid.iter().map(|r| r * r).sum::<f64>() / (2.0 * n) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    // the margin keeps exactly tied duplicates at zero despite rounding
    let t = lambda * (1.0 + 1e-12);
    if z > t {
        z - lambda
    } else if z < -t {
        z + lambda
    } else {
        0.0
    }
}

/// Warm-started coordinate descent along decreasing `lambdas`; returns the
/// scaled-space coefficients at each point.
#[allow(clippy::needless_range_loop)]
fn descend(data: &Scaled, y: &[f64], lambdas: &[f64]) -> Vec<Vec<f64>> {
    let n = y.len() as f64;
    let p = data.cols.len();
    let mut beta = vec![0.0; p];
    let mut resid = y.to_vec();
    let mut path = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut prev = objective(&resid, &beta, lambda);
        for _ in 0..MAX_SWEEPS {
            let mut max_delta: f64 = 0.0;
            for j in 0..p {
                if data.scale[j] <= 0.0 {
                    continue;
                }
                let col = &data.cols[j];
                let z = beta[j] + col.iter().zip(&resid).map(|(c, r)| c * r).sum::<f64>() / n;
                let b = soft_threshold(z, lambda);
                let delta = b - beta[j];
                if delta != 0.0 {
                    for (r, c) in resid.iter_mut().zip(col) {
                        *r -= delta * c;
                    }
                    beta[j] = b;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            let obj = objective(&resid, &beta, lambda);
            debug_assert!(
                obj <= prev + 1e-10 * prev.abs().max(1.0),
                "lasso objective increased from {prev} to {obj}"
            );
            prev = obj;
            if max_delta < LASSO_TOL {
                break;
            }
        }
        path.push(beta.clone());
    }
    path
}

fn unscale(beta: &[f64], scale: &[f64]) -> Vec<f64> {
    beta.iter()
        .zip(scale)
        .map(|(&b, &s)| if s > 0.0 { b / s } else { 0.0 })
        .collect()
}

fn lambda_grid(data: &Scaled, y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let lambda_max = data
        .cols
        .iter()
        .map(|c| (c.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n).abs())
        .fold(0.0, f64::max);
    (0..LASSO_PATH_LEN)
        .map(|k| lambda_max * LAMBDA_RATIO.powf(k as f64 / (LASSO_PATH_LEN - 1) as f64))
        .collect()
}

/// Coefficient path on the original scale at each of `lambdas`.
pub fn lasso_path(x: &[Vec<f64>], y: &[f64], lambdas: &[f64]) -> Vec<Vec<f64>> {
    let p = x.first().map_or(0, Vec::len);
    let rows: Vec<usize> = (0..y.len()).collect();
    let data = scale_columns(x, &rows, p);
    descend(&data, y, lambdas)
        .iter()
        .map(|b| unscale(b, &data.scale))
        .collect()
}

fn predict(x: &[f64], beta: &[f64]) -> f64 {
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}

pub(crate) fn lasso_select(x: &[Vec<f64>], y: &[f64], seed: u64) -> LassoFit {
    let n = y.len();
    let p = x.first().map_or(0, Vec::len);
    let all: Vec<usize> = (0..n).collect();
    let data = scale_columns(x, &all, p);
    let lambdas = lambda_grid(&data, y);
    if n == 0 || lambdas[0] <= 0.0 {
        return LassoFit {
            coefficients: vec![0.0; p],
            lambda: 0.0,
            path_mse: vec![],
            lambdas: vec![],
        };
    }
    let full: Vec<Vec<f64>> = descend(&data, y, &lambdas)
        .iter()
        .map(|b| unscale(b, &data.scale))
        .collect();

    let (path_mse, pick) = if n >= LASSO_FOLDS {
        let mut perm = all.clone();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut fold_of = vec![0; n];
        for (pos, &r) in perm.iter().enumerate() {
            fold_of[r] = pos % LASSO_FOLDS;
        }
        let fold_sse: Vec<Vec<f64>> = (0..LASSO_FOLDS)
            .into_par_iter()
            .map(|k| {
                let train: Vec<usize> = all.iter().copied().filter(|&r| fold_of[r] != k).collect();
                let test: Vec<usize> = all.iter().copied().filter(|&r| fold_of[r] == k).collect();
                let d = scale_columns(x, &train, p);
                let ty: Vec<f64> = train.iter().map(|&r| y[r]).collect();
                descend(&d, &ty, &lambdas)
                    .iter()
                    .map(|b| {
                        let beta = unscale(b, &d.scale);
                        test.iter().map(|&r| (y[r] - predict(&x[r], &beta)).powi(2)).sum()
                    })
                    .collect()
            })
            .collect();
        let mse: Vec<f64> = (0..lambdas.len())
            .map(|l| fold_sse.iter().map(|f| f[l]).sum::<f64>() / n as f64)
            .collect();
        let best = first_min(&mse);
        (mse, best)
    } else {
        // too few rows to cross-validate: one-standard-error rule on the
        // training error
        let sq: Vec<Vec<f64>> = full
            .iter()
            .map(|b| (0..n).map(|r| (y[r] - predict(&x[r], b)).powi(2)).collect())
            .collect();
        let mse: Vec<f64> = sq.iter().map(|s| stats::mean(s)).collect();
        let best = first_min(&mse);
        let se = if n >= 2 {
            stats::sample_sd(&sq[best]) / (n as f64).sqrt()
        } else {
            0.0
        };
        let pick = (0..=best).find(|&l| mse[l] <= mse[best] + se).unwrap_or(best);
        (mse, pick)
    };
    LassoFit {
        coefficients: full[pick].clone(),
        lambda: lambdas[pick],
        lambdas,
        path_mse,
    }
}

fn first_min(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}
