//! Handcrafted texture descriptors. Each maps a [`GrayImage`] to a
//! fixed-length [`FeatureVector`].
//!
//! Histogram descriptors L1-normalize every sub-histogram before
//! concatenation, so scales with different interior sizes weigh equally.

use crate::error::{param, Result};
use crate::image::NeighborhoodSpec;
use crate::scalar::Scalar;

mod ahp;
mod arcslbp;
mod dlbp;
pub mod hasc;
mod jet;
mod lbp;
mod lcvmsp;
mod sclbp;

pub use ahp::{ahp, AhpParams};
pub use arcslbp::{arcslbp, arcslbp_single, ArcslbpConfig, ArcslbpSource};
pub use dlbp::{dlbp, dlbp_multiscale, dlbp_patch, DlbpPatchResult, DLBP_C};
pub use hasc::{hasc, HascGrid};
pub use jet::{jet, jet_pool};
pub use lbp::{alpha_lbp, alpha_lbp_single, lbp, lbp_multiscale, ltp, mqc, AlphaAngle};
pub use lcvmsp::lcvmsp;
pub use sclbp::{
    sclbp, sclbp_encode, sclbp_raw_vectors, ComponentTag, RunCode, SclbpParams, SCLBP_RAW_DIM,
};

/// Largest neighbor count accepted by histogram descriptors (`2^P` bins).
pub const MAX_NEIGHBORS: usize = 16;

/// One descriptor's summary of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub descriptor_id: String,
    pub values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(descriptor_id: impl Into<String>, values: Vec<T>) -> Self {
        FeatureVector {
            descriptor_id: descriptor_id.into(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Concatenates parts in order under a new id.
    pub fn concat(descriptor_id: impl Into<String>, parts: impl IntoIterator<Item = FeatureVector<T>>) -> Self {
        let mut values = Vec::new();
        for p in parts {
            values.extend(p.values);
        }
        FeatureVector::new(descriptor_id, values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Sign quantizer: 1 when `z >= 0`, else 0.
#[inline]
pub fn q<T: Scalar>(z: T) -> u32 {
    (z >= T::zero()) as u32
}

/// Threshold parameters of the ternary and quinary codings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThresholdParams {
    pub ltp_tau: f64,
    pub mqc_tau: f64,
    pub mqc_theta: f64,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        ThresholdParams {
            ltp_tau: 5.0,
            mqc_tau: 5.0,
            mqc_theta: 2.0,
        }
    }
}

impl ThresholdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ltp_tau >= 0.0) {
            return Err(param(format!("LTP threshold must be >= 0, got {}", self.ltp_tau)));
        }
        check_quinary(self.mqc_tau, self.mqc_theta)
    }
}

pub(crate) fn check_quinary(tau: f64, theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < tau) {
        return Err(param(format!("quinary thresholds need 0 < theta < tau, got theta={theta}, tau={tau}")));
    }
    Ok(())
}

pub(crate) fn check_code_spec(spec: &NeighborhoodSpec) -> Result<()> {
    spec.validate()?;
    if spec.neighbors > MAX_NEIGHBORS {
        return Err(param(format!(
            "at most {MAX_NEIGHBORS} neighbors are supported, got {}",
            spec.neighbors
        )));
    }
    Ok(())
}

/// Integer-count histogram that normalizes to unit L1 mass.
#[derive(Debug, Clone)]
pub(crate) struct CountHistogram {
    counts: Vec<u64>,
}

impl CountHistogram {
    pub fn new(bins: usize) -> Self {
        CountHistogram { counts: vec![0; bins] }
    }

    #[inline]
    pub fn add(&mut self, bin: usize) {
        self.counts[bin] += 1;
    }

    pub fn normalized<T: Scalar>(&self) -> Vec<T> {
        let total: u64 = self.counts.iter().sum();
        if total == 0 {
            return vec![T::zero(); self.counts.len()];
        }
        let total = T::lit(total as f64);
        self.counts.iter().map(|&c| T::lit(c as f64) / total).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantizer() {
        assert_eq!(q(0.0f64), 1);
        assert_eq!(q(-1.0f64), 0);
        assert_eq!(q(3.5f64), 1);
        assert_eq!(q(-0.0f64), 1);
    }

    #[test]
    fn threshold_validation() {
        assert!(ThresholdParams::default().validate().is_ok());
        assert!(check_quinary(5.0, 5.0).is_err());
        assert!(check_quinary(5.0, 0.0).is_err());
        let bad = ThresholdParams {
            ltp_tau: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_histogram_normalizes_to_zeros() {
        let h = CountHistogram::new(4);
        assert_eq!(h.normalized::<f64>(), vec![0.0; 4]);
    }
}
