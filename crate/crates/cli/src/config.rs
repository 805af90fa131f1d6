//! Run configuration: one TOML file, paths relative to its directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use texfuse::ensemble::FusionConfig;
use texfuse::experiment::{DescriptorKind, DescriptorSpec, DEFAULT_FOLDS};
use texfuse::svm::SvmParams;
use texfuse::Error;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    dataset: PathBuf,
    #[serde(default)]
    folds_file: Option<PathBuf>,
    #[serde(default = "default_folds")]
    folds: usize,
    #[serde(default = "default_output")]
    output: PathBuf,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default)]
    svm: SvmParams,
    #[serde(default)]
    descriptor: Vec<toml::Table>,
    #[serde(default)]
    external: Vec<RawExternal>,
    #[serde(default)]
    fusion: Vec<FusionConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExternal {
    id: String,
    path: PathBuf,
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Features produced outside this tool, one CSV per run or per fold
/// (`{fold}` in the path).
#[derive(Debug, Clone)]
pub struct ExternalSource {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: PathBuf,
    pub folds_file: Option<PathBuf>,
    pub folds: usize,
    pub output: PathBuf,
    pub workers: Option<usize>,
    pub svm: SvmParams,
    pub descriptors: Vec<DescriptorSpec>,
    pub external: Vec<ExternalSource>,
    pub fusions: Vec<FusionConfig>,
    /// The file as read, stored in results for reproducibility.
    pub snapshot: String,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || "_-.+".contains(c))
}

fn parse_descriptor(index: usize, mut table: toml::Table) -> Result<DescriptorSpec, Error> {
    let at = format!("descriptor[{index}]");
    let id = match table.remove("id") {
        Some(toml::Value::String(s)) => s,
        Some(_) => return Err(cfg_err(format!("{at}.id must be a string"))),
        None => return Err(cfg_err(format!("{at}: missing key `id`"))),
    };
    let kind = DescriptorKind::deserialize(toml::Value::Table(table))
        .map_err(|e| cfg_err(format!("{at} ({id:?}): {}", e.to_string().trim())))?;
    let spec = DescriptorSpec { id, kind };
    spec.validate()
        .map_err(|e| cfg_err(format!("{at} ({:?}): {e}", spec.id)))?;
    Ok(spec)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, Error> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| cfg_err(e.to_string().trim().replace('\n', " ")))?;
        if raw.folds < 2 {
            return Err(cfg_err(format!("folds: need at least 2, got {}", raw.folds)));
        }
        if raw.workers == Some(0) {
            return Err(cfg_err("workers: must be at least 1"));
        }
        raw.svm.validate().map_err(|e| cfg_err(format!("svm: {e}")))?;

        let descriptors = if raw.descriptor.is_empty() {
            DescriptorSpec::standard_set()
        } else {
            raw.descriptor
                .into_iter()
                .enumerate()
                .map(|(i, t)| parse_descriptor(i, t))
                .collect::<Result<Vec<_>, _>>()?
        };
        let external: Vec<ExternalSource> = raw
            .external
            .into_iter()
            .map(|e| ExternalSource {
                id: e.id,
                path: base.join(e.path),
            })
            .collect();

        let mut ids = HashSet::new();
        for id in descriptors.iter().map(|d| &d.id).chain(external.iter().map(|e| &e.id)) {
            if !valid_id(id) {
                return Err(cfg_err(format!(
                    "id {id:?}: use letters, digits and `_-.+` only"
                )));
            }
            if !ids.insert(id.clone()) {
                return Err(cfg_err(format!("id {id:?} is defined twice")));
            }
        }
        // a fusion may use classifiers and fusions defined before it
        for f in &raw.fusion {
            f.validate()?;
            if !valid_id(&f.name) {
                return Err(cfg_err(format!("fusion name {:?}: use letters, digits and `_-.+` only", f.name)));
            }
            if let Some(m) = f.members.iter().find(|m| !ids.contains(*m)) {
                return Err(cfg_err(format!(
                    "fusion {:?}: member {m:?} is not a descriptor, external source or earlier fusion",
                    f.name
                )));
            }
            if !ids.insert(f.name.clone()) {
                return Err(cfg_err(format!("fusion name {:?} is already in use", f.name)));
            }
        }

        Ok(RunConfig {
            seed: raw.seed,
            dataset: base.join(raw.dataset),
            folds_file: raw.folds_file.map(|p| base.join(p)),
            folds: raw.folds,
            output: base.join(raw.output),
            workers: raw.workers,
            svm: raw.svm,
            descriptors,
            external,
            fusions: raw.fusion,
            snapshot: text.to_string(),
        })
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.output.join("cache")
    }

    pub fn scores_dir(&self, id: &str) -> PathBuf {
        self.output.join("scores").join(id)
    }

    pub fn fusion_file(&self, name: &str) -> PathBuf {
        self.output.join("fusions").join(format!("{name}.txt"))
    }
}
