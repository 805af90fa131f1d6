use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codebook::{build_jet_codebook, build_sclbp_codebook, Codebook, DEFAULT_MAX_VECTORS};
use crate::descriptors::{
    ahp, alpha_lbp, arcslbp, dlbp_multiscale, hasc, jet, lbp_multiscale, lcvmsp, ltp, mqc, sclbp, AhpParams,
    AlphaAngle, ArcslbpConfig, ArcslbpSource, FeatureVector, HascGrid, SclbpParams, ThresholdParams,
};
use crate::error::{param, Result};
use crate::filters::{dtg_bank, FilterBank};
use crate::image::{GrayImage, NeighborhoodSpec};
use crate::scalar::Scalar;

fn three_scales() -> Vec<NeighborhoodSpec> {
    [1.0, 2.0, 3.0]
        .iter()
        .map(|&r| NeighborhoodSpec::new(r, 8).expect("valid"))
        .collect()
}

fn one_scale() -> Vec<NeighborhoodSpec> {
    vec![NeighborhoodSpec::new(1.0, 8).expect("valid")]
}

fn default_angles() -> Vec<f64> {
    vec![0.0, 45.0, 90.0, 135.0]
}

fn default_sigmas() -> Vec<f64> {
    vec![1.0]
}

fn default_ltp_tau() -> f64 {
    ThresholdParams::default().ltp_tau
}

fn default_mqc_tau() -> f64 {
    ThresholdParams::default().mqc_tau
}

fn default_mqc_theta() -> f64 {
    ThresholdParams::default().mqc_theta
}

fn default_sigma() -> f64 {
    1.0
}

fn default_jet_clusters() -> usize {
    128
}

fn default_max_vectors() -> usize {
    DEFAULT_MAX_VECTORS
}

fn default_ahp_k() -> f64 {
    AhpParams::default().k
}

fn default_radii() -> Vec<f64> {
    SclbpParams::default().radii
}

fn default_neighbors() -> usize {
    8
}

fn default_sclbp_clusters() -> usize {
    SclbpParams::default().clusters
}

fn default_rows() -> usize {
    HascGrid::default().rows
}

fn default_cols() -> usize {
    HascGrid::default().cols
}

/// A descriptor and its parameters, as written in the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DescriptorKind {
    Lbp {
        #[serde(default = "one_scale")]
        scales: Vec<NeighborhoodSpec>,
    },
    Ltp {
        #[serde(default = "one_scale")]
        scales: Vec<NeighborhoodSpec>,
        #[serde(default = "default_ltp_tau")]
        tau: f64,
    },
    Mqc {
        #[serde(default = "one_scale")]
        scales: Vec<NeighborhoodSpec>,
        #[serde(default = "default_mqc_tau")]
        tau: f64,
        #[serde(default = "default_mqc_theta")]
        theta: f64,
    },
    AlphaLbp {
        #[serde(default = "default_angles")]
        angles: Vec<f64>,
    },
    Dlbp {
        #[serde(default = "three_scales")]
        scales: Vec<NeighborhoodSpec>,
    },
    Arcslbp {
        #[serde(default = "three_scales")]
        scales: Vec<NeighborhoodSpec>,
    },
    SigmaArcslbp {
        #[serde(default = "three_scales")]
        scales: Vec<NeighborhoodSpec>,
        #[serde(default = "default_sigmas")]
        sigmas: Vec<f64>,
    },
    GradientArcslbp {
        #[serde(default = "three_scales")]
        scales: Vec<NeighborhoodSpec>,
    },
    Lcvmsp,
    Ahp {
        #[serde(default = "default_ahp_k")]
        k: f64,
    },
    Sclbp {
        #[serde(default = "default_radii")]
        radii: Vec<f64>,
        #[serde(default = "default_neighbors")]
        neighbors: usize,
        #[serde(default = "default_sclbp_clusters")]
        clusters: usize,
        #[serde(default = "default_max_vectors")]
        max_vectors: usize,
    },
    Jet {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "default_jet_clusters")]
        clusters: usize,
        #[serde(default = "default_max_vectors")]
        max_vectors: usize,
    },
    Hasc {
        #[serde(default = "default_rows")]
        rows: usize,
        #[serde(default = "default_cols")]
        cols: usize,
    },
}

impl DescriptorKind {
    pub fn sclbp(p: SclbpParams) -> Self {
        DescriptorKind::Sclbp {
            radii: p.radii,
            neighbors: p.neighbors,
            clusters: p.clusters,
            max_vectors: p.max_vectors,
        }
    }

    pub fn sclbp_params(&self) -> Option<SclbpParams> {
        match self {
            DescriptorKind::Sclbp {
                radii,
                neighbors,
                clusters,
                max_vectors,
            } => Some(SclbpParams {
                radii: radii.clone(),
                neighbors: *neighbors,
                clusters: *clusters,
                max_vectors: *max_vectors,
            }),
            _ => None,
        }
    }
}

/// A named descriptor; the id keys caches, score matrices and fusions.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSpec {
    pub id: String,
    pub kind: DescriptorKind,
}

/// Fold-specific state learned from training images.
#[derive(Debug, Clone)]
pub enum Trained<T> {
    None,
    Sclbp(Vec<Codebook<T>>),
    Jet(Codebook<T>, FilterBank<T>),
}

impl<T: Scalar> Trained<T> {
    pub fn codebooks(&self) -> Vec<&Codebook<T>> {
        match self {
            Trained::None => Vec::new(),
            Trained::Sclbp(cbs) => cbs.iter().collect(),
            Trained::Jet(cb, _) => vec![cb],
        }
    }
}

impl DescriptorSpec {
    pub fn new(id: impl Into<String>, kind: DescriptorKind) -> Self {
        DescriptorSpec { id: id.into(), kind }
    }

    /// The ten descriptors evaluated stand-alone and fused as `NewSet`.
    pub fn standard_set() -> Vec<DescriptorSpec> {
        use DescriptorKind::*;
        vec![
            DescriptorSpec::new(
                "jet",
                Jet {
                    sigma: 1.0,
                    clusters: 128,
                    max_vectors: DEFAULT_MAX_VECTORS,
                },
            ),
            DescriptorSpec::new("sclbp", DescriptorKind::sclbp(SclbpParams::default())),
            DescriptorSpec::new("ahp", Ahp { k: 0.5 }),
            DescriptorSpec::new("hasc", Hasc { rows: 2, cols: 2 }),
            DescriptorSpec::new("gradient_arcslbp", GradientArcslbp { scales: three_scales() }),
            DescriptorSpec::new("arcslbp", Arcslbp { scales: three_scales() }),
            DescriptorSpec::new("alpha_lbp", AlphaLbp { angles: default_angles() }),
            DescriptorSpec::new(
                "sigma_arcslbp",
                SigmaArcslbp {
                    scales: three_scales(),
                    sigmas: default_sigmas(),
                },
            ),
            DescriptorSpec::new("dlbp", Dlbp { scales: three_scales() }),
            DescriptorSpec::new("lcvmsp", Lcvmsp),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        use DescriptorKind::*;
        let scales = |s: &[NeighborhoodSpec]| -> Result<()> {
            if s.is_empty() {
                return Err(param(format!("descriptor {:?} needs at least one scale", self.id)));
            }
            s.iter().try_for_each(|x| x.validate())
        };
        match &self.kind {
            Lbp { scales: s } | Dlbp { scales: s } | Arcslbp { scales: s } | GradientArcslbp { scales: s } => scales(s),
            Ltp { scales: s, tau } => {
                if !(*tau >= 0.0) {
                    return Err(param(format!("descriptor {:?}: tau must be >= 0", self.id)));
                }
                scales(s)
            }
            Mqc { scales: s, tau, theta } => {
                ThresholdParams {
                    ltp_tau: 0.0,
                    mqc_tau: *tau,
                    mqc_theta: *theta,
                }
                .validate()?;
                scales(s)
            }
            SigmaArcslbp { scales: s, sigmas } => {
                if sigmas.is_empty() || sigmas.iter().any(|&x| !(x > 0.0)) {
                    return Err(param(format!("descriptor {:?} needs positive sigmas", self.id)));
                }
                scales(s)
            }
            AlphaLbp { angles } => {
                if angles.is_empty() {
                    return Err(param(format!("descriptor {:?} needs at least one angle", self.id)));
                }
                angles.iter().try_for_each(|&a| AlphaAngle::from_degrees(a).map(|_| ()))
            }
            Lcvmsp => Ok(()),
            Ahp { k } => {
                if !(*k >= 0.0 && k.is_finite()) {
                    return Err(param(format!("descriptor {:?}: k must be >= 0", self.id)));
                }
                Ok(())
            }
            Sclbp { .. } => self.kind.sclbp_params().expect("sclbp").validate(),
            Jet { sigma, clusters, max_vectors } => {
                if !(*sigma > 0.0) || *clusters == 0 || *max_vectors == 0 {
                    return Err(param(format!(
                        "descriptor {:?} needs sigma > 0, clusters >= 1 and max_vectors >= 1",
                        self.id
                    )));
                }
                Ok(())
            }
            Hasc { rows, cols } => {
                if *rows == 0 || *cols == 0 {
                    return Err(param(format!("descriptor {:?} needs a non-empty grid", self.id)));
                }
                Ok(())
            }
        }
    }

    /// Whether extraction depends on fold-specific training.
    pub fn needs_training(&self) -> bool {
        matches!(self.kind, DescriptorKind::Sclbp { .. } | DescriptorKind::Jet { .. })
    }

    /// Hex digest of the id and parameters.
    pub fn params_hash(&self) -> String {
        let digest = Sha256::digest(format!("{}|{:?}", self.id, self.kind).as_bytes());
        hex(&digest[..8])
    }

    /// Learns codebooks from training images only; a no-op for descriptors
    /// without a dictionary.
    pub fn train<T: Scalar>(&self, images: &[&GrayImage<T>], seed: u64) -> Result<Trained<T>> {
        let owned = || images.iter().map(|&i| i.clone()).collect::<Vec<_>>();
        Ok(match &self.kind {
            DescriptorKind::Sclbp { .. } => {
                let params = self.kind.sclbp_params().expect("sclbp");
                Trained::Sclbp(build_sclbp_codebook(&owned(), &params, seed)?)
            }
            DescriptorKind::Jet {
                sigma,
                clusters,
                max_vectors,
            } => {
                let bank = dtg_bank(*sigma)?;
                let cb = build_jet_codebook(&owned(), *clusters, &bank, *max_vectors, seed)?;
                Trained::Jet(cb, bank)
            }
            _ => Trained::None,
        })
    }

    pub fn extract<T: Scalar>(&self, img: &GrayImage<T>, trained: &Trained<T>) -> Result<FeatureVector<T>> {
        use DescriptorKind::*;
        let mut f = match (&self.kind, trained) {
            (Lbp { scales }, _) => lbp_multiscale(img, scales)?,
            (Ltp { scales, tau }, _) => {
                let parts = scales.iter().map(|s| ltp(img, s, *tau)).collect::<Result<Vec<_>>>()?;
                FeatureVector::concat("ltp", parts)
            }
            (Mqc { scales, tau, theta }, _) => {
                let parts = scales.iter().map(|s| mqc(img, s, *tau, *theta)).collect::<Result<Vec<_>>>()?;
                FeatureVector::concat("mqc", parts)
            }
            (AlphaLbp { angles }, _) => {
                let angles = angles.iter().map(|&a| AlphaAngle::from_degrees(a)).collect::<Result<Vec<_>>>()?;
                alpha_lbp(img, &angles)?
            }
            (Dlbp { scales }, _) => dlbp_multiscale(img, scales)?,
            (Arcslbp { scales }, _) => arcslbp(
                img,
                &ArcslbpConfig {
                    scales: scales.clone(),
                    source: ArcslbpSource::Raw,
                },
            )?,
            (SigmaArcslbp { scales, sigmas }, _) => arcslbp(
                img,
                &ArcslbpConfig {
                    scales: scales.clone(),
                    source: ArcslbpSource::Hessian { sigmas: sigmas.clone() },
                },
            )?,
            (GradientArcslbp { scales }, _) => arcslbp(
                img,
                &ArcslbpConfig {
                    scales: scales.clone(),
                    source: ArcslbpSource::Gradient,
                },
            )?,
            (Lcvmsp, _) => lcvmsp(img)?,
            (Ahp { k }, _) => ahp(img, &AhpParams { k: *k, ..AhpParams::default() })?,
            (Sclbp { .. }, Trained::Sclbp(cbs)) => sclbp(img, &self.kind.sclbp_params().expect("sclbp"), cbs)?,
            (Jet { .. }, Trained::Jet(cb, bank)) => jet(img, cb, bank)?,
            (Hasc { rows, cols }, _) => hasc(img, &HascGrid { rows: *rows, cols: *cols })?,
            (Sclbp { .. }, _) => sclbp(img, &SclbpParams::default(), &[])?,
            (Jet { .. }, _) => {
                return Err(crate::error::Error::State(format!(
                    "descriptor {:?} needs a trained jet codebook",
                    self.id
                )))
            }
        };
        f.descriptor_id = self.id.clone();
        Ok(f)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
