use std::fs;
use std::path::Path;

use dpo_core::{generate_instance, ChoiceModel, ChoiceParams, EnvConfig, Regime};
use dpo_neural::{Architecture, GatConfig};
use dpo_ppo::{PpoConfig, TrainSetup};
use serde::{Deserialize, Serialize};

use crate::seeds::derive_seed;
use crate::{Error, Result};

/// Seed stream of training instances, kept apart from benchmark instances.
pub const TRAIN_INSTANCE_STREAM: u64 = 6;

/// Training run as read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub radius_km: f64,
    pub num_pickups: usize,
    pub regime: Regime,
    pub n_instances: usize,
    pub expected_orders: f64,
    pub architecture: Architecture,
    pub ppo: PpoConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            radius_km: 4.0,
            num_pickups: 15,
            regime: Regime::Base,
            n_instances: 100,
            expected_orders: EnvConfig::default().expected_orders(),
            architecture: Architecture::Gat(GatConfig::default()),
            ppo: PpoConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn setup(&self) -> Result<TrainSetup> {
        if self.n_instances == 0 {
            return Err(Error::Config("n_instances must be positive".into()));
        }
        let instances = (0..self.n_instances as u64)
            .map(|k| generate_instance(self.radius_km, self.num_pickups, derive_seed(self.seed, &[TRAIN_INSTANCE_STREAM, k])))
            .collect::<dpo_core::Result<Vec<_>>>()?;
        Ok(TrainSetup {
            instances,
            choice: ChoiceModel::new(ChoiceParams::regime(self.regime)),
            env: EnvConfig::default().with_expected_orders(self.expected_orders),
            architecture: self.architecture,
            ppo: self.ppo,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_tables_with_partial_fields() {
        let c = TrainConfig::from_toml(
            "num_pickups = 2\nradius_km = 1.0\n[architecture]\nkind = \"gat\"\nembedding_size = 8\n[ppo]\ntotal_steps = 1000\n",
        )
        .unwrap();
        assert_eq!(c.architecture, Architecture::Gat(GatConfig { embedding_size: 8, ..Default::default() }));
        assert_eq!(c.ppo.total_steps, 1000);
        assert_eq!(c.ppo.n_steps, PpoConfig::default().n_steps);
        let s = TrainConfig { n_instances: 3, ..c }.setup().unwrap();
        assert_eq!(s.instances.len(), 3);
        assert!(s.instances.iter().all(|i| i.num_pickups() == 2));
    }
}
