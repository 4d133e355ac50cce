//! Intermittent demand forecasting by learned combination of a twelve-method
//! pool.
//!
//! Each series is forecast by every pool member; a gradient-boosted tree
//! meta-learner maps either nine demand features or the pairwise diversity
//! of the pool's forecasts to softmax combination weights, trained to
//! minimise the weighted inner-window loss of the pool.
//!
//! Numeric building blocks are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar for the common cases.

pub mod combiner;
pub mod diversity;
pub mod error;
pub mod features;
pub mod forecasters;
pub mod ingest;
pub mod metrics;
mod optim;
pub mod pipeline;
pub mod pooling;
pub mod quantiles;
pub mod scalar;
pub mod series;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Real;
pub use series::{make_split, preprocess, Period, SplitPlan};

pub type DemandSeries = series::DemandSeries<f64>;
pub type DemandSeries32 = series::DemandSeries<f32>;
pub type Dataset = series::Dataset<f64>;
pub type Dataset32 = series::Dataset<f32>;
pub type ForecastMatrix = forecasters::ForecastMatrix<f64>;
pub type ForecastMatrix32 = forecasters::ForecastMatrix<f32>;
pub type FeatureVector = features::FeatureVector<f64>;
pub type FeatureVector32 = features::FeatureVector<f32>;
pub type DiversityVector = diversity::DiversityVector<f64>;
pub type ErrorMatrix = metrics::ErrorMatrix<f64>;
pub type QuantileForecast = quantiles::QuantileForecast<f64>;
