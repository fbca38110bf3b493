//! Run configuration shared by training, inference, and evaluation.
//!
//! Training writes the effective configuration into the model directory so
//! later evaluation runs cannot drift from the settings the model was built
//! with.

use afford_core::LayerConfig;
use serde::{Deserialize, Serialize};

/// All tunables of a reproducible run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every random choice in the run.
    pub seed: u64,
    /// Number of z-bins for grasp-region discretisation.
    pub bins: usize,
    /// Density threshold as a fraction of the densest bin's count.
    pub theta: f64,
    /// Leaf-purity floor below which the linear scorer overrides the tree.
    pub tau: f64,
    /// Variance floor for the Gaussian classifiers.
    pub epsilon: f64,
    /// Training share of a stratified split.
    pub train_fraction: f64,
    /// Point-metric threshold as a fraction of the bounding-box diagonal.
    pub threshold_frac: f64,
    /// End-effector ellipse semi-axes in meters.
    pub semi_axes: [f64; 2],
    /// Whether the environment layer participates in the pipeline.
    pub environment: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            bins: 10,
            theta: 0.5,
            tau: 0.6,
            epsilon: 1e-6,
            train_fraction: 0.7,
            threshold_frac: 0.1,
            semi_axes: [0.03, 0.02],
            environment: true,
        }
    }
}

impl RunConfig {
    /// Checks every field against the range its owning module declares.
    pub fn validate(&self) -> Result<(), String> {
        if self.bins < 3 {
            return Err(format!("bins must be at least 3, got {}", self.bins));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(format!("theta must lie in (0, 1], got {}", self.theta));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            ));
        }
        if !self.threshold_frac.is_finite() || self.threshold_frac <= 0.0 {
            return Err(format!(
                "threshold fraction must be positive, got {}",
                self.threshold_frac
            ));
        }
        if self.semi_axes.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(format!(
                "semi-axes must be positive, got [{}, {}]",
                self.semi_axes[0], self.semi_axes[1]
            ));
        }
        Ok(())
    }

    /// Attribute layers implied by the environment flag.
    pub fn layer_config(&self) -> LayerConfig {
        if self.environment {
            LayerConfig::full()
        } else {
            LayerConfig::ablated()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let config = RunConfig::default();
        assert!(config.validate().is_ok());
        assert_eq!(config.layer_config().len(), 4);
    }

    #[test]
    fn ablated_layers_without_environment() {
        let config = RunConfig {
            environment: false,
            ..RunConfig::default()
        };
        assert_eq!(config.layer_config().len(), 3);
    }

    #[test]
    fn out_of_range_values_rejected() {
        for bad in [
            RunConfig { bins: 2, ..RunConfig::default() },
            RunConfig { theta: 0.0, ..RunConfig::default() },
            RunConfig { tau: 1.5, ..RunConfig::default() },
            RunConfig { epsilon: 0.0, ..RunConfig::default() },
            RunConfig { train_fraction: 1.0, ..RunConfig::default() },
            RunConfig { threshold_frac: 0.0, ..RunConfig::default() },
            RunConfig { semi_axes: [0.0, 0.02], ..RunConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn json_round_trip() {
        let config = RunConfig::default();
        let json = serde_json::to_string(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
    }
}
