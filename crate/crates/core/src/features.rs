//! The nine intermittent-demand features and the SBC demand classes.
//!
//! Conventions: standard deviations are sample (`n - 1`) standard
//! deviations throughout, and degenerate inputs map to documented finite
//! sentinels rather than NaN.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::{DemandSeries, Period};
use crate::stats;

pub const FEATURE_NAMES: [&str; 9] = [
    "f1_idi",
    "f2_cv2",
    "f3_entropy",
    "f4_pct_zero",
    "f5_pct_beyond_sigma",
    "f6_linear_chunk_var",
    "f7_change_mean_abs",
    "f8_ratio_last_chunk",
    "f9_pct_zero_end",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T = f64> {
    pub f1_idi: T,
    pub f2_cv2: T,
    pub f3_entropy: T,
    pub f4_pct_zero: T,
    pub f5_pct_beyond_sigma: T,
    pub f6_linear_chunk_var: T,
    pub f7_change_mean_abs: T,
    pub f8_ratio_last_chunk: T,
    pub f9_pct_zero_end: T,
}

impl<T: Real> FeatureVector<T> {
    pub fn to_array(&self) -> [T; 9] {
        [
            self.f1_idi,
            self.f2_cv2,
            self.f3_entropy,
            self.f4_pct_zero,
            self.f5_pct_beyond_sigma,
            self.f6_linear_chunk_var,
            self.f7_change_mean_abs,
            self.f8_ratio_last_chunk,
            self.f9_pct_zero_end,
        ]
    }

    pub fn sbc_class(&self) -> SbcClass {
        sbc_classify(self.f1_idi, self.f2_cv2)
    }
}

/// Chunking parameters of F6 (`chunk_len`) and F8 (`n_chunks`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub chunk_len: usize,
    pub n_chunks: usize,
}

impl FeatureConfig {
    /// Monthly data: `L = 12, K = 4`; daily data: `L = 10, K = 10`; a
    /// custom period `m` uses `L = m, K = 4`.
    pub fn for_period(period: Period) -> Self {
        match period {
            Period::Monthly => FeatureConfig {
                chunk_len: 12,
                n_chunks: 4,
            },
            Period::Daily => FeatureConfig {
                chunk_len: 10,
                n_chunks: 10,
            },
            Period::Custom(m) => FeatureConfig {
                chunk_len: m.max(2),
                n_chunks: 4,
            },
        }
    }
}

/// Mean gap between consecutive non-zero demands (F1). A single demand
/// yields the series length.
pub fn idi<T: Real>(y: &[T]) -> Result<T> {
    let pos: Vec<usize> = y
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > T::zero())
        .map(|(i, _)| i)
        .collect();
    match pos.len() {
        0 => Err(Error::NoDemand(String::new())),
        1 => Ok(T::from_usize_(y.len())),
        k => Ok(T::from_usize_(pos[k - 1] - pos[0]) / T::from_usize_(k - 1)),
    }
}

/// Squared coefficient of variation of the non-zero demands (F2); zero for a
/// single demand.
pub fn cv2<T: Real>(y: &[T]) -> Result<T> {
    let sizes: Vec<T> = y.iter().copied().filter(|&v| v > T::zero()).collect();
    if sizes.is_empty() {
        return Err(Error::NoDemand(String::new()));
    }
    if sizes.len() < 2 {
        return Ok(T::zero());
    }
    let cv = stats::sample_sd(&sizes) / stats::mean(&sizes);
    Ok(cv * cv)
}

/// Embedding dimension of the approximate entropy.
pub const APEN_DIM: usize = 2;
/// Tolerance of the approximate entropy as a multiple of the sample sd.
pub const APEN_TOLERANCE: f64 = 0.2;

/// `Φ_2 - Φ_3` from one pass over template pairs, self-matches included.
fn apen_m2<T: Real>(y: &[T], r: T) -> T {
    let n2 = y.len() - 1;
    let n3 = y.len() - 2;
    let mut c2 = vec![1usize; n2];
    let mut c3 = vec![1usize; n3];
    for i in 0..n2 {
        for j in i + 1..n2 {
            if (y[i] - y[j]).abs() <= r && (y[i + 1] - y[j + 1]).abs() <= r {
                c2[i] += 1;
                c2[j] += 1;
                if j < n3 && (y[i + 2] - y[j + 2]).abs() <= r {
                    c3[i] += 1;
                    c3[j] += 1;
                }
            }
        }
    }
    let phi = |counts: &[usize]| {
        let nt = T::from_usize_(counts.len());
        counts.iter().map(|&c| (T::from_usize_(c) / nt).ln()).sum::<T>() / nt
    };
    phi(&c2) - phi(&c3)
}

/// Approximate entropy with `m = 2`, `r = 0.2 sd` (F3). Not clamped to
/// `[0, 1]`.
pub fn approx_entropy<T: Real>(y: &[T]) -> Result<T> {
    if y.len() < APEN_DIM + 1 {
        return Err(Error::TooShortForEntropy);
    }
    let sd = stats::sample_sd(y);
    if sd <= T::zero() {
        return Ok(T::zero());
    }
    let r = T::lit(APEN_TOLERANCE) * sd;
    Ok(apen_m2(y, r))
}

/// Counting features `(f4, f5, f7, f9)`.
pub fn simple_ratios<T: Real>(y: &[T]) -> (T, T, T, T) {
    let n = T::from_usize_(y.len());
    let zeros = y.iter().filter(|&&v| v == T::zero()).count();
    let mu = stats::mean(y);
    let sd = stats::sample_sd(y);
    let beyond = if sd > T::zero() {
        y.iter().filter(|&&v| (v - mu).abs() > sd).count()
    } else {
        0
    };
    let change = if y.len() >= 2 {
        y.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<T>() / T::from_usize_(y.len() - 1)
    } else {
        T::zero()
    };
    let tail_zeros = y.iter().rev().take_while(|&&v| v == T::zero()).count();
    (
        T::from_usize_(zeros) / n,
        T::from_usize_(beyond) / n,
        change,
        T::from_usize_(tail_zeros) / n,
    )
}

/// Slope of the sample variances of consecutive length-`len` chunks
/// against chunk index (F6). An incomplete final chunk is dropped; fewer
/// than two complete chunks give zero.
pub fn linear_chunk_var<T: Real>(y: &[T], len: usize) -> T {
    if len == 0 || y.len() / len < 2 {
        return T::zero();
    }
    let vars: Vec<T> = y.chunks_exact(len).map(stats::sample_variance).collect();
    stats::ols_slope(&vars)
}

/// Share of the total sum of squares in the last of `k` chunks (F8). The
/// last chunk absorbs the remainder of `T / k`.
pub fn ratio_last_chunk<T: Real>(y: &[T], k: usize) -> T {
    let k = k.clamp(1, y.len());
    let chunk = y.len() / k;
    let total: T = y.iter().map(|&v| v * v).sum();
    if total <= T::zero() {
        return T::zero();
    }
    let last: T = y[(k - 1) * chunk..].iter().map(|&v| v * v).sum();
    last / total
}

pub fn compute_features<T: Real>(y: &[T], cfg: FeatureConfig) -> Result<FeatureVector<T>> {
    let f1 = idi(y)?;
    let f2 = cv2(y)?;
    let f3 = match approx_entropy(y) {
        Ok(v) => v,
        Err(Error::TooShortForEntropy) => T::zero(),
        Err(e) => return Err(e),
    };
    let (f4, f5, f7, f9) = simple_ratios(y);
    Ok(FeatureVector {
        f1_idi: f1,
        f2_cv2: f2,
        f3_entropy: f3,
        f4_pct_zero: f4,
        f5_pct_beyond_sigma: f5,
        f6_linear_chunk_var: linear_chunk_var(y, cfg.chunk_len),
        f7_change_mean_abs: f7,
        f8_ratio_last_chunk: ratio_last_chunk(y, cfg.n_chunks),
        f9_pct_zero_end: f9,
    })
}

pub fn series_features<T: Real>(s: &DemandSeries<T>, cfg: FeatureConfig) -> Result<FeatureVector<T>> {
    compute_features(s.values(), cfg).map_err(|e| match e {
        Error::NoDemand(_) => Error::NoDemand(s.id().to_string()),
        other => other,
    })
}

/// Syntetos–Boylan–Croston demand classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SbcClass {
    Smooth,
    Intermittent,
    Erratic,
    Lumpy,
}

impl SbcClass {
    pub const ALL: [SbcClass; 4] = [
        SbcClass::Smooth,
        SbcClass::Intermittent,
        SbcClass::Erratic,
        SbcClass::Lumpy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SbcClass::Smooth => "smooth",
            SbcClass::Intermittent => "intermittent",
            SbcClass::Erratic => "erratic",
            SbcClass::Lumpy => "lumpy",
        }
    }
}

impl fmt::Display for SbcClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SbcClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SbcClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown class {s:?}")))
    }
}

pub const SBC_IDI_CUTOFF: f64 = 4.0 / 3.0;
pub const SBC_CV2_CUTOFF: f64 = 0.5;

/// Boundary values go to the `<=` side of each cut-off.
pub fn sbc_classify<T: Real>(idi: T, cv2: T) -> SbcClass {
    let sparse = idi > T::lit(SBC_IDI_CUTOFF);
    let volatile = cv2 > T::lit(SBC_CV2_CUTOFF);
    match (sparse, volatile) {
        (false, false) => SbcClass::Smooth,
        (true, false) => SbcClass::Intermittent,
        (false, true) => SbcClass::Erratic,
        (true, true) => SbcClass::Lumpy,
    }
}
