//! Run configuration: one TOML file, every key optional.
//!
//! ```toml
//! seed = 7
//!
//! [map]
//! length = 1000.0
//! resolution = 0.5
//!
//! [filter]
//! max_iterations = 5
//!
//! [noise]
//! range_sigma = 0.02
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ikd_tree::BalanceParams;
use crate::lio::{DatasetMeta, EngineParams, LioError};
use crate::manifold::NoiseParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapConfig {
    pub length: f64,
    pub resolution: f64,
    pub gamma: f64,
    pub fov_range: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        let e = EngineParams::default();
        Self { length: e.map_length, resolution: e.resolution, gamma: e.gamma, fov_range: e.fov_range }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeConfig {
    pub alpha_bal: f64,
    pub alpha_del: f64,
    pub n_max: usize,
    pub parallel_rebuild: bool,
}

impl Default for TreeConfig {
    fn default() -> Self {
        let b = BalanceParams::default();
        Self { alpha_bal: b.alpha_bal, alpha_del: b.alpha_del, n_max: b.n_max, parallel_rebuild: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub temporal_downsample: usize,
    pub min_range: f64,
    pub k: usize,
    pub max_dist: f64,
    pub plane_threshold: f64,
    pub max_residual: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub min_correspondences: usize,
    pub init_still_time: f64,
    pub divergence_bound: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let e = EngineParams::default();
        let r = e.update.residual;
        Self {
            temporal_downsample: e.temporal_downsample,
            min_range: e.min_range,
            k: r.k,
            max_dist: r.max_dist,
            plane_threshold: r.plane_threshold,
            max_residual: r.max_residual,
            epsilon: e.update.epsilon,
            max_iterations: e.update.max_iterations,
            min_correspondences: e.update.min_correspondences,
            init_still_time: e.init_still_time,
            divergence_bound: e.divergence_bound,
        }
    }
}

/// Overrides for the noise model stored with a dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseOverride {
    pub gyro: Option<f64>,
    pub acc: Option<f64>,
    pub gyro_bias: Option<f64>,
    pub acc_bias: Option<f64>,
    pub range_sigma: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub map: MapConfig,
    pub tree: TreeConfig,
    pub filter: FilterConfig,
    pub noise: NoiseOverride,
}

/// `(key, default, meaning)` for every configuration key.
pub fn describe_keys() -> Vec<(&'static str, String, &'static str)> {
    let c = RunConfig::default();
    let (m, t, f) = (c.map, c.tree, c.filter);
    let n = NoiseParams::default();
    vec![
        ("seed", c.seed.to_string(), "seed for generated data and benchmark traces"),
        ("map.length", m.length.to_string(), "edge of the local map cube (m)"),
        ("map.resolution", m.resolution.to_string(), "map downsample cell edge (m)"),
        ("map.gamma", m.gamma.to_string(), "detection ball radius as a multiple of fov_range"),
        ("map.fov_range", m.fov_range.to_string(), "sensor range used for the map region and range filter (m)"),
        ("tree.alpha_bal", t.alpha_bal.to_string(), "balance criterion of the k-d tree"),
        ("tree.alpha_del", t.alpha_del.to_string(), "deleted-share criterion of the k-d tree"),
        ("tree.n_max", t.n_max.to_string(), "subtrees at least this large rebuild on a second thread"),
        ("tree.parallel_rebuild", t.parallel_rebuild.to_string(), "enable second-thread rebuilds"),
        ("filter.temporal_downsample", f.temporal_downsample.to_string(), "keep one raw point out of this many"),
        ("filter.min_range", f.min_range.to_string(), "drop points closer than this (m)"),
        ("filter.k", f.k.to_string(), "map neighbors per plane fit"),
        ("filter.max_dist", f.max_dist.to_string(), "neighbor search radius (m)"),
        ("filter.plane_threshold", f.plane_threshold.to_string(), "largest neighbor distance from a valid plane (m)"),
        ("filter.max_residual", f.max_residual.to_string(), "largest accepted point-to-plane residual (m)"),
        ("filter.epsilon", f.epsilon.to_string(), "iterated update stops when the state step norm is below this"),
        ("filter.max_iterations", f.max_iterations.to_string(), "iterations per update"),
        ("filter.min_correspondences", f.min_correspondences.to_string(), "below this the update is skipped"),
        ("filter.init_still_time", f.init_still_time.to_string(), "still interval used for initialization (s)"),
        ("filter.divergence_bound", f.divergence_bound.to_string(), "abort when |position| exceeds this (m)"),
        ("noise.gyro", format!("dataset ({})", n.gyro), "gyro noise density (rad/s/√Hz)"),
        ("noise.acc", format!("dataset ({})", n.acc), "accelerometer noise density (m/s²/√Hz)"),
        ("noise.gyro_bias", format!("dataset ({})", n.gyro_bias), "gyro bias random walk (rad/s²/√Hz)"),
        ("noise.acc_bias", format!("dataset ({})", n.acc_bias), "accelerometer bias random walk (m/s³/√Hz)"),
        ("noise.range_sigma", "dataset".into(), "LiDAR range noise std (m)"),
    ]
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.noise;
        for (name, v) in [
            ("noise.gyro", n.gyro),
            ("noise.acc", n.acc),
            ("noise.gyro_bias", n.gyro_bias),
            ("noise.acc_bias", n.acc_bias),
        ] {
            if v.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
                return Err(ConfigError::Invalid(format!("{name} must be non-negative")));
            }
        }
        if n.range_sigma.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return Err(ConfigError::Invalid("noise.range_sigma must be positive".into()));
        }
        let f = self.filter;
        if !(f.plane_threshold > 0.0 && f.max_residual > 0.0 && f.max_dist > 0.0) {
            return Err(ConfigError::Invalid("filter thresholds must be positive".into()));
        }
        self.engine_params(None).validate().map_err(|e| match e {
            LioError::InvalidParams(m) => ConfigError::Invalid(m),
            other => ConfigError::Invalid(other.to_string()),
        })
    }

    /// Engine parameters, taking noise from `meta` unless overridden here.
    pub fn engine_params(&self, meta: Option<&DatasetMeta>) -> EngineParams {
        let mut e = EngineParams::default();
        let (m, t, f) = (self.map, self.tree, self.filter);
        e.map_length = m.length;
        e.resolution = m.resolution;
        e.gamma = m.gamma;
        e.fov_range = m.fov_range;
        e.balance = BalanceParams { alpha_bal: t.alpha_bal, alpha_del: t.alpha_del, n_max: t.n_max };
        e.parallel_rebuild = t.parallel_rebuild;
        e.temporal_downsample = f.temporal_downsample;
        e.min_range = f.min_range;
        e.init_still_time = f.init_still_time;
        e.divergence_bound = f.divergence_bound;
        e.update.epsilon = f.epsilon;
        e.update.max_iterations = f.max_iterations;
        e.update.min_correspondences = f.min_correspondences;
        let r = &mut e.update.residual;
        r.k = f.k;
        r.max_dist = f.max_dist;
        r.plane_threshold = f.plane_threshold;
        r.max_residual = f.max_residual;

        let (noise, range_sigma) = match meta {
            Some(meta) => (meta.noise, meta.range_sigma),
            None => (NoiseParams::default(), r.range_sigma),
        };
        let o = self.noise;
        e.noise = NoiseParams {
            gyro: o.gyro.unwrap_or(noise.gyro),
            acc: o.acc.unwrap_or(noise.acc),
            gyro_bias: o.gyro_bias.unwrap_or(noise.gyro_bias),
            acc_bias: o.acc_bias.unwrap_or(noise.acc_bias),
        };
        // a noise-free dataset still needs a positive measurement variance
        let sigma = o.range_sigma.unwrap_or(range_sigma);
        r.range_sigma = if sigma > 0.0 { sigma } else { EngineParams::default().update.residual.range_sigma };
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        let e = c.engine_params(None);
        assert_eq!(e.map_length, 1000.0);
        assert_eq!(e.resolution, 0.5);
        assert_eq!(e.temporal_downsample, 4);
        assert_eq!(e.update.residual.k, 5);
        assert_eq!(e.update.epsilon, 1e-3);
        assert_eq!(e.update.max_iterations, 5);
        assert_eq!((e.balance.alpha_bal, e.balance.alpha_del, e.balance.n_max), (0.6, 0.5, 1500));
        assert_eq!(e.gamma, 1.5);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(RunConfig::from_toml("[map]\nsize = 3.0\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(RunConfig::from_toml("colour = 1\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(RunConfig::from_toml("[tree]\nalpha_bal = 0.4\n").is_err());
        assert!(RunConfig::from_toml("[map]\nresolution = 0.0\n").is_err());
        assert!(RunConfig::from_toml("[map]\nlength = 100.0\n").is_err());
        assert!(RunConfig::from_toml("[noise]\nrange_sigma = -1.0\n").is_err());
        assert!(RunConfig::from_toml("[filter]\nk = 2\n").is_err());
    }

    #[test]
    fn noise_override_beats_dataset() {
        let c = RunConfig::from_toml("[noise]\nacc = 0.5\n").unwrap();
        let meta = DatasetMeta {
            scan_rate: 10.0,
            imu_rate: 200.0,
            scan_start_time: 0.0,
            num_scans: 1,
            extrinsic: Default::default(),
            noise: NoiseParams { gyro: 0.1, acc: 0.2, gyro_bias: 0.3, acc_bias: 0.4 },
            range_sigma: 0.05,
        };
        let e = c.engine_params(Some(&meta));
        assert_eq!(e.noise, NoiseParams { gyro: 0.1, acc: 0.5, gyro_bias: 0.3, acc_bias: 0.4 });
        assert_eq!(e.update.residual.range_sigma, 0.05);
    }

    #[test]
    fn every_key_is_described() {
        let keys: Vec<&str> = describe_keys().iter().map(|k| k.0).collect();
        let text = toml::to_string(&RunConfig {
            noise: NoiseOverride {
                gyro: Some(0.0),
                acc: Some(0.0),
                gyro_bias: Some(0.0),
                acc_bias: Some(0.0),
                range_sigma: Some(0.1),
            },
            ..RunConfig::default()
        })
        .unwrap();
        let table: toml::Table = text.parse().unwrap();
        let mut listed = 0;
        for (name, value) in &table {
            match value.as_table() {
                Some(sub) => {
                    for key in sub.keys() {
                        assert!(keys.contains(&format!("{name}.{key}").as_str()), "{name}.{key} undocumented");
                        listed += 1;
                    }
                }
                None => {
                    assert!(keys.contains(&name.as_str()));
                    listed += 1;
                }
            }
        }
        assert_eq!(listed, keys.len());
    }
}
