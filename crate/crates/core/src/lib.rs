pub mod bc;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod mls;
pub mod preprocess;
pub mod scalar;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

/// Measurement sample rate in Hz.
pub const SAMPLE_RATE_HZ: f64 = 48_000.0;

/// Feature vector in double precision.
pub type Feature = preprocess::FeatureVector<f64>;
pub type Dataset = dataset::Dataset;
pub type TrainingSet = bc::LabeledDataset<f64>;
pub type Model = svm::SvmModel<f64>;
pub type Calibration = svm::PlattParams<f64>;
pub type Scores = metrics::ScoreSet<f64>;
pub type Curve = metrics::RocCurve<f64>;
