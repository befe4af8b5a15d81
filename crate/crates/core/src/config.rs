//! Pipeline configuration, read from TOML. Every key is optional and unknown
//! keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::SimilarityGraph;
use crate::consensus::ConsensusParams;
use crate::sigproc::Preprocess;
use crate::spectral::{BandTable, FeatureScheme};
use crate::svm::SvmParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Base seed; every stochastic step derives its own seed from it.
    pub seed: u64,
    pub preprocess: Preprocess,
    pub features: FeaturesConfig,
    pub smote: SmoteConfig,
    pub spectral: SimilarityGraph,
    pub svm: SvmParams,
    pub grid: GridConfig,
    pub cv: CvConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            preprocess: Preprocess::default(),
            features: FeaturesConfig::default(),
            smote: SmoteConfig::default(),
            spectral: SimilarityGraph::default(),
            svm: SvmParams::default(),
            grid: GridConfig::default(),
            cv: CvConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    PerTrial,
    TrialAveraged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub scheme: SchemeName,
    /// Averaging units per trial for the per-trial scheme.
    pub sub_windows: usize,
    pub bands: BandTable,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            scheme: SchemeName::PerTrial,
            sub_windows: 4,
            bands: BandTable::default(),
        }
    }
}

impl FeaturesConfig {
    pub fn scheme(&self) -> FeatureScheme {
        match self.scheme {
            SchemeName::PerTrial => FeatureScheme::PerTrial { sub_windows: self.sub_windows },
            SchemeName::TrialAveraged => FeatureScheme::TrialAveraged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteConfig {
    pub k: usize,
    /// Defaults to a value derived from the base seed.
    pub seed: Option<u64>,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig { k: 5, seed: None }
    }
}

/// Cartesian grid of consensus parameters, enumerated `m`-major, then
/// `sigma`, then `nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub m: Vec<usize>,
    pub sigma: Vec<f64>,
    pub nu: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            m: (1..=10).map(|i| 25 * i).collect(),
            sigma: vec![0.6],
            nu: (2..=8).collect(),
        }
    }
}

impl GridConfig {
    pub fn params(&self) -> Result<Vec<ConsensusParams>> {
        if self.m.is_empty() || self.sigma.is_empty() || self.nu.is_empty() {
            return Err(Error::Config("grid.m, grid.sigma and grid.nu must be nonempty".into()));
        }
        let mut out = Vec::with_capacity(self.m.len() * self.sigma.len() * self.nu.len());
        for &m in &self.m {
            for &sigma in &self.sigma {
                for &nu in &self.nu {
                    out.push(ConsensusParams::new(m, sigma, nu).map_err(|e| Error::Config(e.to_string()))?);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub holdout_fraction: f64,
    pub outer_folds: usize,
    pub inner_folds: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            holdout_fraction: 0.1,
            outer_folds: 5,
            inner_folds: 5,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.features.bands.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.features.scheme == SchemeName::PerTrial && self.features.sub_windows < 2 {
            return bad("features.sub_windows must be at least 2".into());
        }
        if self.smote.k == 0 {
            return bad("smote.k must be at least 1".into());
        }
        if self.spectral.knn == 0 {
            return bad("spectral.knn must be at least 1".into());
        }
        self.svm.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.grid.params()?;
        let cv = &self.cv;
        if !(0.0..1.0).contains(&cv.holdout_fraction) {
            return bad(format!("cv.holdout_fraction {} outside [0, 1)", cv.holdout_fraction));
        }
        if cv.outer_folds < 2 || cv.inner_folds < 2 {
            return bad("cv.outer_folds and cv.inner_folds must be at least 2".into());
        }
        Ok(())
    }
}
