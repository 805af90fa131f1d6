//! Jet texton histogram: per-pixel derivative-of-Gaussian responses quantized
//! against a learned dictionary.

use super::{CountHistogram, FeatureVector};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::filters::{jet_vectors, FilterBank};
use crate::image::GrayImage;
use crate::scalar::Scalar;

/// All per-pixel jet vectors of an image as training rows.
pub fn jet_pool<T: Scalar>(img: &GrayImage<T>, bank: &FilterBank<T>) -> Result<Vec<Vec<T>>> {
    Ok(jet_vectors(img, bank)?.into_iter().map(|v| v.to_vec()).collect())
}

/// `K`-bin histogram of nearest-texton assignments over every pixel.
pub fn jet<T: Scalar>(img: &GrayImage<T>, codebook: &Codebook<T>, bank: &FilterBank<T>) -> Result<FeatureVector<T>> {
    if codebook.dim() != 6 {
        return Err(Error::State(format!(
            "jet codebook must have dimension 6, got {}",
            codebook.dim()
        )));
    }
    let mut hist = CountHistogram::new(codebook.k());
    for v in jet_vectors(img, bank)? {
        hist.add(codebook.assign(&v)?);
    }
    Ok(FeatureVector::new("jet", hist.normalized()))
}
