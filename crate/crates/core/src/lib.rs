//! Information-theoretic fairness gaps and fairness-regularized logistic
//! regression.
//!
//! The numeric core ([`infotheory`], [`fairness`], [`regularizers`],
//! [`model`], [`optim`], [`data`]) is generic over [`Scalar`], implemented for
//! `f32` and `f64`. Type aliases for both precisions live at the crate root.

pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fairness;
pub mod infotheory;
pub mod model;
pub mod optim;
pub mod regularizers;
pub mod report;
pub mod scalar;

pub use error::{Error, Result};
pub use regularizers::RegularizerKind;
pub use scalar::Scalar;

pub type ProbTable64 = infotheory::ProbTable<f64>;
pub type ProbTable32 = infotheory::ProbTable<f32>;
pub type SoftJoint64 = regularizers::SoftJoint<f64>;
pub type SoftJoint32 = regularizers::SoftJoint<f32>;
pub type FairnessReport64 = fairness::FairnessReport<f64>;
pub type FairnessReport32 = fairness::FairnessReport<f32>;
pub type Weights64 = model::Weights<f64>;
pub type Weights32 = model::Weights<f32>;
pub type TrainConfig64 = model::TrainConfig<f64>;
pub type TrainConfig32 = model::TrainConfig<f32>;
pub type Dataset64 = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
