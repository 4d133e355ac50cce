//! Seeded synthetic demand data for tests, examples and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forecasters::{forecast_all, MethodId};
use crate::series::{Dataset, DemandSeries, Period};

/// Positive, low-variation demand in every period.
pub fn smooth_values<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(15.0..25.0)).collect()
}

/// Sporadic demand of nearly constant size.
pub fn intermittent_values<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut y: Vec<f64> = (0..len)
        .map(|_| {
            if rng.gen_bool(0.3) {
                rng.gen_range(3..=5) as f64
            } else {
                0.0
            }
        })
        .collect();
    y[0] = 4.0;
    y
}

/// Sporadic demand whose sizes mix small and very large orders.
pub fn lumpy_values<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let size = |rng: &mut R| {
        if rng.gen_bool(0.5) {
            rng.gen_range(1..=10) as f64
        } else {
            rng.gen_range(50..=100) as f64
        }
    };
    let mut y: Vec<f64> = (0..len)
        .map(|_| if rng.gen_bool(0.3) { size(rng) } else { 0.0 })
        .collect();
    y[0] = size(rng);
    y
}

/// Positive demand with many zeros and high size variation: the erratic
/// corner of the demand plane.
pub fn erratic_values<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.15) {
                0.0
            } else if rng.gen_bool(0.5) {
                rng.gen_range(1..=5) as f64
            } else {
                rng.gen_range(30..=80) as f64
            }
        })
        .collect()
}

/// Pool member with zero error on each cluster of [`separable_clusters`].
pub const CLUSTER_METHODS: [MethodId; 3] = [MethodId::MA, MethodId::TSB, MethodId::ADIDA];

#[derive(Debug, Clone)]
pub struct ClusterFixture {
    pub dataset: Dataset<f64>,
    /// Cluster of each series, in dataset order.
    pub cluster: Vec<usize>,
    pub horizon: usize,
}

impl ClusterFixture {
    pub fn method_of(&self, series: usize) -> MethodId {
        CLUSTER_METHODS[self.cluster[series]]
    }
}

/// Smooth, intermittent and lumpy series (cycled in that order) whose two
/// trailing windows of length `horizon` are exactly the forecasts of the
/// cluster's method. That method is the only exact one on the first of
/// them; on the last, methods repeating a flat tail may tie with it.
pub fn separable_clusters(n_series: usize, history_len: usize, horizon: usize, seed: u64) -> ClusterFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = Vec::with_capacity(n_series);
    let mut cluster = Vec::with_capacity(n_series);
    for i in 0..n_series {
        let c = i % 3;
        let mut y = match c {
            0 => smooth_values(&mut rng, history_len),
            1 => intermittent_values(&mut rng, history_len),
            _ => lumpy_values(&mut rng, history_len),
        };
        for _ in 0..2 {
            let s = DemandSeries::new("tmp", y.clone(), Period::Monthly).expect("valid values");
            let fm = forecast_all(&s, horizon);
            y.extend(fm.row(CLUSTER_METHODS[c]).expect("method in pool"));
        }
        series.push(DemandSeries::new(format!("s{i:04}"), y, Period::Monthly).expect("valid values"));
        cluster.push(c);
    }
    ClusterFixture {
        dataset: Dataset::new("clusters", series).expect("unique ids"),
        cluster,
        horizon,
    }
}

/// Dataset mixing the four demand shapes, with lengths drawn from
/// `min_len..=max_len`.
pub fn mixed_dataset(n_series: usize, min_len: usize, max_len: usize, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let series = (0..n_series)
        .map(|i| {
            let len = rng.gen_range(min_len..=max_len);
            let y = match i % 4 {
                0 => smooth_values(&mut rng, len),
                1 => intermittent_values(&mut rng, len),
                2 => lumpy_values(&mut rng, len),
                _ => erratic_values(&mut rng, len),
            };
            DemandSeries::new(format!("item{i:04}"), y, Period::Monthly).expect("valid values")
        })
        .collect();
    Dataset::new(format!("mixed-{seed}"), series).expect("unique ids")
}
