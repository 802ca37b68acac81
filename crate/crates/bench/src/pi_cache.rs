use std::fs;
use std::path::{Path, PathBuf};

use dpo_core::policies::{PerfectInfoConfig, PerfectInfoSolution};
use dpo_core::{ChoiceParams, Instance, Location};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Result;

/// On-disk store of perfect-information solutions, one JSON file per
/// problem, named by a digest of everything the solve depends on.
#[derive(Debug, Clone)]
pub struct PiCache {
    dir: PathBuf,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    instance: String,
    orders: &'a [Location],
    params: &'a ChoiceParams,
    config: &'a PerfectInfoConfig,
}

impl PiCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(instance: &Instance, orders: &[Location], params: &ChoiceParams, config: &PerfectInfoConfig) -> String {
        let instance = instance.to_json().expect("instance serializes");
        let material = KeyMaterial { instance, orders, params, config };
        let bytes = serde_json::to_vec(&material).expect("cache key serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Unreadable or corrupt entries count as misses.
    pub fn get(&self, key: &str) -> Option<PerfectInfoSolution> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put(&self, key: &str, solution: &PerfectInfoSolution) -> Result<()> {
        let tmp = self.dir.join(format!("{key}.json.tmp{}", std::process::id()));
        fs::write(&tmp, serde_json::to_vec(solution)?)?;
        fs::rename(&tmp, self.path(key))?;
        Ok(())
    }
}
