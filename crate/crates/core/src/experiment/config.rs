use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffusion::{ScheduleSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::gmm::GmmConfig;
use crate::partition::PartitionPlan;
use crate::rng::derive_seed;
use crate::screening::ScreeningThresholds;
use crate::world::WorldConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub k: usize,
    /// Share of the screened pool used for the reduced-data estimator.
    pub subset_fraction: f64,
    pub query_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSpace {
    /// Whitened principal coordinates.
    Latent,
    /// Raw embedding coordinates.
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSettings {
    pub m_min: usize,
    pub m_max: usize,
    pub space: FitSpace,
    pub em: GmmConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub energy: f64,
    pub split: SplitSizes,
    pub schedule: ScheduleSpec,
    pub time_dim: usize,
    pub hidden: usize,
    pub train: TrainConfig,
    pub gmm: GmmSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub runs: usize,
    pub hist_start: f64,
    pub hist_step: f64,
    pub hist_bins: usize,
    /// Scores above `theta + tail_margin` form the top region of the
    /// histogram comparison.
    pub tail_margin: f64,
}

impl MetricsConfig {
    pub fn edges(&self) -> Vec<f64> {
        (0..self.hist_bins)
            .map(|j| self.hist_start + self.hist_step * j as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub world: WorldConfig,
    pub partition: PartitionPlan,
    pub screening: ScreeningThresholds,
    pub estimator: EstimatorConfig,
    pub generation: GenerationConfig,
    pub metrics: MetricsConfig,
    pub seed: u64,
}

impl RunConfig {
    /// The acceptance preset: two acquisition rounds over 10% / 90% of the
    /// sources on the default 3000-speaker world.
    pub fn acceptance(seed: u64) -> Self {
        RunConfig {
            world: WorldConfig::acceptance(derive_seed(seed, "world")),
            partition: PartitionPlan {
                ratios: vec![0.1, 0.9],
                seed: derive_seed(seed, "partition"),
            },
            screening: ScreeningThresholds {
                min_alignment: 0.5,
                max_group_variance: 1.0,
            },
            estimator: EstimatorConfig {
                k: 5,
                subset_fraction: 0.1,
                query_points: 500,
            },
            generation: GenerationConfig {
                energy: 0.99,
                split: SplitSizes {
                    train: 2175,
                    validation: 272,
                    test: 272,
                },
                schedule: ScheduleSpec::default(),
                time_dim: 16,
                hidden: 56,
                train: TrainConfig {
                    seed: derive_seed(seed, "diffusion"),
                    ..TrainConfig::default()
                },
                gmm: GmmSettings {
                    m_min: 1,
                    m_max: 10,
                    space: FitSpace::Latent,
                    em: GmmConfig::default(),
                },
            },
            metrics: MetricsConfig {
                runs: 30,
                hist_start: 1.0,
                hist_step: 0.1,
                hist_bins: 41,
                tail_margin: 1.0,
            },
            seed,
        }
    }

    /// A reduced preset for smoke tests: 300 base speakers, a short
    /// training budget and three mixture sizes.
    pub fn small(seed: u64) -> Self {
        let mut cfg = RunConfig::acceptance(seed);
        cfg.world.n_speakers = 300;
        cfg.estimator.query_points = 100;
        cfg.generation.split = SplitSizes {
            train: 400,
            validation: 60,
            test: 60,
        };
        cfg.generation.hidden = 32;
        cfg.generation.train.max_epochs = 60;
        cfg.generation.train.patience = 20;
        cfg.generation.train.val_repeats = 4;
        cfg.generation.gmm.m_max = 3;
        cfg.metrics.runs = 4;
        cfg
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str::<RunConfig>(&text)
            .map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })
            .and_then(|cfg| cfg.validate().map(|_| cfg))
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.partition.validate()?;
        self.screening.validate()?;
        if self.estimator.k == 0 || self.estimator.query_points < 2 {
            return Err(Error::validation("estimator needs k >= 1 and at least 2 query points"));
        }
        if !(self.estimator.subset_fraction > 0.0 && self.estimator.subset_fraction <= 1.0) {
            return Err(Error::validation("estimator subset fraction outside (0, 1]"));
        }
        let g = &self.generation;
        if !(g.energy > 0.0 && g.energy <= 1.0) {
            return Err(Error::validation("energy target outside (0, 1]"));
        }
        if g.split.train == 0 || g.split.test < 2 || !g.split.test.is_multiple_of(2) {
            return Err(Error::validation(
                "split needs a non-empty training set and an even test set of at least 2",
            ));
        }
        if g.time_dim == 0 || !g.time_dim.is_multiple_of(2) || g.hidden == 0 {
            return Err(Error::validation("time embedding must be even and hidden width positive"));
        }
        g.train.validate()?;
        if g.gmm.m_min == 0 || g.gmm.m_min > g.gmm.m_max {
            return Err(Error::validation("GMM range must satisfy 1 <= m_min <= m_max"));
        }
        if self.metrics.runs < 2 {
            return Err(Error::validation("repeated sampling needs runs >= 2"));
        }
        if self.metrics.hist_bins == 0 || !(self.metrics.hist_step > 0.0) {
            return Err(Error::validation("histogram needs bins and a positive step"));
        }
        Ok(())
    }

    /// Replace every seed with one derived from `seed`.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.seed = seed;
        cfg.world.seed = derive_seed(seed, "world");
        cfg.partition.seed = derive_seed(seed, "partition");
        cfg.generation.train.seed = derive_seed(seed, "diffusion");
        cfg
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::json("run config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_is_valid_and_round_trips() {
        let cfg = RunConfig::acceptance(7);
        cfg.validate().unwrap();
        let back = RunConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.partition.ratios, vec![0.1, 0.9]);
        assert_eq!(cfg.metrics.runs, 30);
        assert_eq!(cfg.generation.energy, 0.99);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::acceptance(1);
        let mut b = a.clone();
        b.metrics.runs = 31;
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.hash(), a.reseeded(2).hash());
    }

    #[test]
    fn bad_values_rejected() {
        let mut cfg = RunConfig::acceptance(0);
        cfg.generation.split.test = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::acceptance(0);
        cfg.generation.gmm.m_min = 0;
        assert!(cfg.validate().is_err());
        assert!(RunConfig::from_json("{}").is_err());
        RunConfig::small(0).validate().unwrap();
    }
}
