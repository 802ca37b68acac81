use std::fs;
use std::path::{Path, PathBuf};

use dpo_core::choice::EmissionAccounting;
use dpo_core::policies::PerfectInfoConfig;
use dpo_core::{EnvConfig, Regime, TspSolver};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmark::{run_benchmark_detailed, BenchmarkConfig};
use crate::metrics::MetricsRecord;
use crate::pi_cache::PiCache;
use crate::policy_spec::PolicySpec;
use crate::seeds::instance_seed;
use crate::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const WORKERS_ENV: &str = "DPO_WORKERS";

/// Grid of benchmark cells read from TOML. Every combination of regime,
/// radius and pickup count is one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: u64,
    pub regimes: Vec<Regime>,
    pub radii_km: Vec<f64>,
    pub pickups: Vec<usize>,
    pub policies: Vec<PolicySpec>,
    pub n_geo_instances: usize,
    pub n_sequences: usize,
    pub n_choice_sims: usize,
    pub expected_orders: f64,
    pub horizon_h: f64,
    pub period_h: f64,
    pub exact_tsp_threshold: usize,
    pub emission: EmissionAccounting,
    pub perfect_info_restarts: usize,
    pub perfect_info_enumeration_limit: u64,
    /// Directory for cached perfect-information solutions.
    pub perfect_info_cache: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let b = BenchmarkConfig::default();
        let pi = PerfectInfoConfig::default();
        Self {
            seed: b.seed,
            regimes: vec![Regime::Base],
            radii_km: vec![b.radius_km],
            pickups: vec![4, 15, 30],
            policies: ["home", "nearest", "dynamic_nearest", "unrestricted"].iter().map(|s| s.parse().unwrap()).collect(),
            n_geo_instances: b.n_geo_instances,
            n_sequences: b.n_sequences,
            n_choice_sims: b.n_choice_sims,
            expected_orders: b.env.expected_orders(),
            horizon_h: b.env.horizon,
            period_h: b.env.period,
            exact_tsp_threshold: TspSolver::default().exact_threshold,
            emission: b.emission,
            perfect_info_restarts: pi.restarts,
            perfect_info_enumeration_limit: pi.enumeration_limit,
            perfect_info_cache: None,
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() || self.radii_km.is_empty() || self.pickups.is_empty() || self.policies.is_empty() {
            return Err(Error::Config("regimes, radii_km, pickups and policies must be non-empty".into()));
        }
        if !(self.expected_orders >= 0.0 && self.expected_orders.is_finite()) {
            return Err(Error::Config(format!("expected_orders must be non-negative, got {}", self.expected_orders)));
        }
        self.cells().iter().try_for_each(|c| c.validate())
    }

    /// Cells in output order: regime, then radius, then pickup count.
    pub fn cells(&self) -> Vec<BenchmarkConfig> {
        let env = EnvConfig { horizon: self.horizon_h, period: self.period_h, rate: 0.0, tsp: TspSolver::new(self.exact_tsp_threshold) }
            .with_expected_orders(self.expected_orders);
        let pi = PerfectInfoConfig {
            restarts: self.perfect_info_restarts,
            enumeration_limit: self.perfect_info_enumeration_limit,
            ..PerfectInfoConfig::default()
        };
        let mut out = Vec::new();
        for &regime in &self.regimes {
            for &radius_km in &self.radii_km {
                for &num_pickups in &self.pickups {
                    out.push(BenchmarkConfig {
                        seed: self.seed,
                        radius_km,
                        num_pickups,
                        regime,
                        n_geo_instances: self.n_geo_instances,
                        n_sequences: self.n_sequences,
                        n_choice_sims: self.n_choice_sims,
                        env,
                        emission: self.emission,
                        perfect_info: pi,
                    });
                }
            }
        }
        out
    }

    pub fn digest(&self) -> String {
        format!("{:x}", Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

/// Worker count from `DPO_WORKERS`, else the available parallelism.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| Error::Config(format!("{WORKERS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Debug, Clone, Serialize)]
struct CellManifest {
    index: usize,
    regime: Regime,
    radius_km: f64,
    num_pickups: usize,
    instance_seeds: Vec<u64>,
    sequence_hash: String,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    build_id: &'static str,
    config: &'a SweepConfig,
    config_sha256: String,
    cells: Vec<CellManifest>,
    metrics_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<MetricsRecord>,
    pub metrics_path: PathBuf,
    pub manifest_path: PathBuf,
}

pub fn metrics_csv(records: &[MetricsRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Runs all cells on a pool of `workers` threads and writes the metrics
/// table and manifest into `out_dir`. Output depends only on the config.
pub fn run_sweep(config: &SweepConfig, out_dir: &Path, workers: usize) -> Result<SweepOutput> {
    config.validate()?;
    let cells = config.cells();
    let cache = config.perfect_info_cache.as_ref().map(PiCache::new).transpose()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<_>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                log::info!("cell regime={} L={} |M|={}", cell.regime, cell.radius_km, cell.num_pickups);
                run_benchmark_detailed(cell, &config.policies, cache.as_ref())
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut manifest_cells = Vec::new();
    for (index, (cell, res)) in cells.iter().zip(results).enumerate() {
        let run = res?;
        manifest_cells.push(CellManifest {
            index,
            regime: cell.regime,
            radius_km: cell.radius_km,
            num_pickups: cell.num_pickups,
            instance_seeds: (0..cell.n_geo_instances).map(|k| instance_seed(cell.seed, k)).collect(),
            sequence_hash: run.sequence_hash.clone(),
        });
        records.extend(run.records());
    }

    fs::create_dir_all(out_dir)?;
    let csv = metrics_csv(&records)?;
    let metrics_path = out_dir.join(METRICS_FILE);
    fs::write(&metrics_path, &csv)?;
    let manifest = Manifest {
        tool: "dpo",
        version: env!("CARGO_PKG_VERSION"),
        build_id: concat!(env!("CARGO_PKG_NAME"), "-", env!("CARGO_PKG_VERSION")),
        config,
        config_sha256: config.digest(),
        cells: manifest_cells,
        metrics_sha256: format!("{:x}", Sha256::digest(&csv)),
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text)?;
    Ok(SweepOutput { records, metrics_path, manifest_path })
}
