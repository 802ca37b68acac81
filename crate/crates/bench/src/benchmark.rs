use dpo_core::choice::EmissionAccounting;
use dpo_core::env::{run_episode_on, sample_arrivals, Arrival, EpisodeSummary};
use dpo_core::policies::{PerfectInfoConfig, PerfectInfoSolution, PerfectInfoSolver};
use dpo_core::{distance, generate_instance, ChoiceModel, ChoiceParams, EnvConfig, Instance, Location, Offer, Regime};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::metrics::{aggregate, emission_reduction, mean, EpisodeOutcome, MetricsRecord};
use crate::pi_cache::PiCache;
use crate::policy_spec::{PolicySpec, PreparedPolicy};
use crate::seeds::{arrival_seed, choice_seed, derive_seed, instance_seed, SEARCH_STREAM};
use crate::{Error, Result};

/// Testing protocol of one benchmark cell: geographic instances, shared
/// arrival sequences per instance and choice replications per sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub radius_km: f64,
    pub num_pickups: usize,
    pub regime: Regime,
    pub n_geo_instances: usize,
    pub n_sequences: usize,
    pub n_choice_sims: usize,
    pub env: EnvConfig,
    pub emission: EmissionAccounting,
    pub perfect_info: PerfectInfoConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            radius_km: 4.0,
            num_pickups: 15,
            regime: Regime::Base,
            n_geo_instances: 5,
            n_sequences: 20,
            n_choice_sims: 20,
            env: EnvConfig::default(),
            emission: EmissionAccounting::Expected,
            perfect_info: PerfectInfoConfig::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_km > 0.0 && self.radius_km.is_finite()) {
            return Err(Error::Config(format!("radius must be positive, got {}", self.radius_km)));
        }
        if self.n_geo_instances == 0 || self.n_sequences == 0 || self.n_choice_sims == 0 {
            return Err(Error::Config("instance, sequence and simulation counts must be positive".into()));
        }
        if !(self.env.horizon > 0.0 && self.env.period > 0.0 && self.env.rate >= 0.0) {
            return Err(Error::Config("arrival process needs positive horizon and period and a non-negative rate".into()));
        }
        Ok(())
    }

    pub fn choice_model(&self) -> ChoiceModel {
        ChoiceModel::new(ChoiceParams::regime(self.regime)).with_emission(self.emission)
    }

    /// Instance `k` depends only on the base seed and `k`; the geometry for
    /// different radii is the same layout rescaled.
    pub fn instances(&self) -> Result<Vec<Instance>> {
        (0..self.n_geo_instances)
            .map(|k| Ok(generate_instance(self.radius_km, self.num_pickups, instance_seed(self.seed, k))?))
            .collect()
    }
}

/// Arrival sequence `sequence` of instance `instance`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceInput {
    pub instance: usize,
    pub sequence: usize,
    pub arrivals: Vec<Arrival>,
}

pub fn arrival_sequences(config: &BenchmarkConfig, instances: &[Instance]) -> Vec<SequenceInput> {
    let mut out = Vec::with_capacity(instances.len() * config.n_sequences);
    for (k, inst) in instances.iter().enumerate() {
        for s in 0..config.n_sequences {
            let mut rng = ChaCha8Rng::seed_from_u64(arrival_seed(config.seed, k, s));
            out.push(SequenceInput { instance: k, sequence: s, arrivals: sample_arrivals(inst, &config.env, &mut rng) });
        }
    }
    out
}

pub fn sequence_hash(sequences: &[SequenceInput]) -> String {
    let mut h = Sha256::new();
    for seq in sequences {
        h.update((seq.instance as u64).to_le_bytes());
        h.update((seq.sequence as u64).to_le_bytes());
        h.update((seq.arrivals.len() as u64).to_le_bytes());
        for a in &seq.arrivals {
            h.update(a.time.to_bits().to_le_bytes());
            h.update(a.location.x.to_bits().to_le_bytes());
            h.update(a.location.y.to_bits().to_le_bytes());
        }
    }
    format!("{:x}", h.finalize())
}

/// Episodes of one policy together with its summary row.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub record: MetricsRecord,
    /// Ordered by instance, sequence, then simulation.
    pub outcomes: Vec<EpisodeOutcome>,
}

impl PolicyRun {
    /// Mean total emission per arrival sequence, in protocol order. These
    /// values are paired across policies of the same benchmark.
    pub fn sequence_means(&self) -> Vec<f64> {
        self.outcomes
            .chunk_by(|a, b| (a.instance, a.sequence) == (b.instance, b.sequence))
            .map(|c| mean(&c.iter().map(|o| o.summary.total_emission).collect::<Vec<_>>()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub runs: Vec<PolicyRun>,
    pub sequence_hash: String,
    pub home_total_mean: f64,
}

impl BenchmarkRun {
    pub fn records(&self) -> Vec<MetricsRecord> {
        self.runs.iter().map(|r| r.record.clone()).collect()
    }

    pub fn get(&self, policy: &str) -> Option<&PolicyRun> {
        self.runs.iter().find(|r| r.record.policy == policy)
    }
}

pub fn run_benchmark(config: &BenchmarkConfig, policies: &[PolicySpec]) -> Result<Vec<MetricsRecord>> {
    Ok(run_benchmark_detailed(config, policies, None)?.records())
}

/// Runs every policy over the same arrival sequences. Simulating policies
/// replay each sequence `n_choice_sims` times with choice streams shared
/// across policies; the perfect-information benchmark solves each sequence
/// once.
pub fn run_benchmark_detailed(
    config: &BenchmarkConfig,
    policies: &[PolicySpec],
    pi_cache: Option<&PiCache>,
) -> Result<BenchmarkRun> {
    config.validate()?;
    let prepared: Vec<PreparedPolicy> = policies.iter().map(|p| p.prepare(config.num_pickups)).collect::<Result<_>>()?;
    let instances = config.instances()?;
    let sequences = arrival_sequences(config, &instances);
    let hash = sequence_hash(&sequences);
    let model = config.choice_model();

    let mut outcomes = Vec::with_capacity(policies.len());
    for p in &prepared {
        let o = match p {
            PreparedPolicy::PerfectInfo => perfect_info_outcomes(config, &instances, &sequences, pi_cache)?,
            _ => simulate(config, &instances, &sequences, &model, p, config.n_choice_sims)?,
        };
        outcomes.push(o);
    }

    let home_total_mean = match policies.iter().position(|p| *p == PolicySpec::Home) {
        Some(i) => aggregate(&outcomes[i]).total_mean,
        None => aggregate(&simulate(config, &instances, &sequences, &model, &PreparedPolicy::Home, config.n_choice_sims)?).total_mean,
    };

    let runs = policies
        .iter()
        .zip(outcomes)
        .map(|(spec, outcomes)| {
            let a = aggregate(&outcomes);
            let sims = if spec.is_perfect_info() { 1 } else { config.n_choice_sims };
            let record = MetricsRecord {
                policy: spec.to_string(),
                num_pickups: config.num_pickups,
                radius_km: config.radius_km,
                regime: config.regime,
                instances: config.n_geo_instances,
                sequences: config.n_sequences,
                choice_sims: sims,
                episodes: a.episodes,
                total_mean_g: a.total_mean,
                total_std_g: a.total_std,
                total_std_instances_g: a.total_std_instances,
                truck_mean_g: a.truck_mean,
                truck_std_g: a.truck_std,
                customer_mean_g: a.customer_mean,
                customer_std_g: a.customer_std,
                visited_pickups_mean: a.visited_pickups_mean,
                pickup_share_pct: a.pickup_share_pct,
                offer_distance_m: a.offer_distance_m,
                emission_reduction_pct: emission_reduction(a.total_mean, home_total_mean).ok(),
                sequence_hash: hash.clone(),
            };
            PolicyRun { record, outcomes }
        })
        .collect();
    Ok(BenchmarkRun { runs, sequence_hash: hash, home_total_mean })
}

fn simulate(
    config: &BenchmarkConfig,
    instances: &[Instance],
    sequences: &[SequenceInput],
    model: &ChoiceModel,
    policy: &PreparedPolicy,
    sims: usize,
) -> Result<Vec<EpisodeOutcome>> {
    let per_sequence: Vec<Vec<EpisodeOutcome>> = sequences
        .par_iter()
        .map(|seq| {
            let inst = &instances[seq.instance];
            (0..sims)
                .map(|c| {
                    let key = [seq.instance as u64, seq.sequence as u64, c as u64];
                    let mut p = policy.instantiate(&key).expect("simulating policy");
                    let rng = ChaCha8Rng::seed_from_u64(choice_seed(config.seed, seq.instance, seq.sequence, c));
                    let trace = run_episode_on(inst, model, &config.env, p.as_mut(), &seq.arrivals, rng)?;
                    Ok(EpisodeOutcome { instance: seq.instance, sequence: seq.sequence, sim: c, summary: trace.summary() })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_sequence.into_iter().flatten().collect())
}

/// Summary of a perfect-information solution in the units of a simulated
/// episode.
pub fn perfect_info_summary(instance: &Instance, orders: &[Location], sol: &PerfectInfoSolution) -> EpisodeSummary {
    let offered: f64 = orders
        .iter()
        .zip(&sol.assignment)
        .filter_map(|(o, a)| match a {
            Offer::PickupPoint(i) => Some(distance(*o, instance.pickup_points[*i])),
            Offer::HomeOnly => None,
        })
        .sum();
    EpisodeSummary {
        orders: orders.len(),
        pickup_orders: sol.pickup_orders(),
        visited_pickups: sol.visited_pickups(),
        pickup_offers: sol.pickup_orders(),
        offered_distance_sum: offered,
        truck_emission: sol.truck_emission,
        customer_emission: sol.customer_emission,
        total_emission: sol.truck_emission + sol.customer_emission,
    }
}

/// Solves one sequence, consulting and filling `cache` when given.
pub fn solve_perfect_info(
    instance: &Instance,
    orders: &[Location],
    params: &ChoiceParams,
    config: PerfectInfoConfig,
    cache: Option<&PiCache>,
) -> Result<PerfectInfoSolution> {
    let key = cache.map(|_| PiCache::key(instance, orders, params, &config));
    if let (Some(c), Some(k)) = (cache, &key) {
        if let Some(sol) = c.get(k) {
            return Ok(sol);
        }
    }
    let sol = PerfectInfoSolver::new(instance, params, orders, config).solve();
    if let (Some(c), Some(k)) = (cache, &key) {
        c.put(k, &sol)?;
    }
    Ok(sol)
}

fn perfect_info_outcomes(
    config: &BenchmarkConfig,
    instances: &[Instance],
    sequences: &[SequenceInput],
    cache: Option<&PiCache>,
) -> Result<Vec<EpisodeOutcome>> {
    let params = ChoiceParams::regime(config.regime);
    sequences
        .par_iter()
        .map(|seq| {
            let inst = &instances[seq.instance];
            let orders: Vec<Location> = seq.arrivals.iter().map(|a| a.location).collect();
            let mut pi = config.perfect_info;
            pi.seed = derive_seed(config.seed, &[SEARCH_STREAM, seq.instance as u64, seq.sequence as u64]);
            pi.tsp = config.env.tsp;
            let sol = solve_perfect_info(inst, &orders, &params, pi, cache)?;
            Ok(EpisodeOutcome { instance: seq.instance, sequence: seq.sequence, sim: 0, summary: perfect_info_summary(inst, &orders, &sol) })
        })
        .collect()
}
