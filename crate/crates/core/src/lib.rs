pub mod baseline;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod model;
pub mod nn;
pub mod online;
pub mod persist;
pub mod preprocess;
pub mod rng;
pub mod scae;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type AlpdModelF32 = model::AlpdModel<f32>;
pub type AlpdModelF64 = model::AlpdModel<f64>;
pub type ScaeModelF32 = scae::ScaeModel<f32>;
pub type ScaeModelF64 = scae::ScaeModel<f64>;
pub type DatasetF32 = experiment::Dataset<f32>;
