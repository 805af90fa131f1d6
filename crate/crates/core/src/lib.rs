//! Texture descriptors, k-means codebooks, SVM ensembles and the
//! cross-validation harness for transmission electron microscopy images.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod codebook;
pub mod descriptors;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod filters;
pub mod image;
pub mod io;
pub mod scalar;
pub mod svm;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Image = image::GrayImage<f64>;
pub type ImageF32 = image::GrayImage<f32>;
pub type Features = descriptors::FeatureVector<f64>;
pub type Dictionary = codebook::Codebook<f64>;
