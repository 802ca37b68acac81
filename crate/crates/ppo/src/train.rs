use std::io::Write;
use std::path::{Path, PathBuf};

use dpo_core::choice::ChoiceModel;
use dpo_core::env::{run_episode_on, sample_arrivals, EnvConfig, Episode};
use dpo_core::Instance;
use dpo_neural::{ActorCritic, Architecture, Encoded};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adam::{clip_grad_norm, Adam, AdamConfig};
use crate::config::PpoConfig;
use crate::gae::{compute_gae, normalize};
use crate::loss::{log_softmax, sample_loss, LossWeights, SampleTargets};
use crate::policy::{action_to_offer, sample_action, LearnedPolicy};
use crate::{Error, Result};

/// Samples per parallel gradient chunk; fixed so the summation order does
/// not depend on the thread count.
const GRAD_CHUNK: usize = 16;

/// Everything a training run depends on.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    /// Training instances; all must have the same number of pickup points.
    pub instances: Vec<Instance>,
    pub choice: ChoiceModel,
    pub env: EnvConfig,
    pub architecture: Architecture,
    pub ppo: PpoConfig,
    pub seed: u64,
}

impl TrainSetup {
    pub fn num_pickups(&self) -> Result<usize> {
        let m = self.instances.first().ok_or_else(|| Error::Config("no training instances".into()))?.num_pickups();
        if self.instances.iter().any(|i| i.num_pickups() != m) {
            return Err(Error::Config("training instances differ in pickup count".into()));
        }
        Ok(m)
    }
}

/// One recorded decision.
#[derive(Debug, Clone)]
pub struct Transition {
    pub input: Encoded,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub entropy: f64,
    pub reward: f64,
    pub done: bool,
}

/// Transitions of whole episodes, discarded after one update.
#[derive(Debug, Clone, Default)]
pub struct Rollout {
    pub transitions: Vec<Transition>,
    /// Total emission (g) of every finished episode.
    pub episode_emissions: Vec<f64>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Advantages (normalized if requested) and value targets.
    pub fn advantages(&self, cfg: &PpoConfig) -> (Vec<f64>, Vec<f64>) {
        let r: Vec<f64> = self.transitions.iter().map(|t| t.reward).collect();
        let v: Vec<f64> = self.transitions.iter().map(|t| t.value).collect();
        let d: Vec<bool> = self.transitions.iter().map(|t| t.done).collect();
        let (mut adv, targets) = compute_gae(&r, &v, &d, cfg.gamma, cfg.gae_lambda);
        if cfg.normalize_advantages {
            normalize(&mut adv);
        }
        (adv, targets)
    }
}

/// Mean loss terms over one mini-batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// One line of the progress log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub update: usize,
    pub step: usize,
    pub episodes: usize,
    /// Mean return in reward units (negated, scaled emission).
    pub mean_return: f64,
    pub mean_emission: f64,
    /// Mean policy entropy at collection time.
    pub rollout_entropy: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub eval_emission: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub update: usize,
    pub step: usize,
    pub eval_emission: f64,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: ActorCritic,
    pub progress: Vec<ProgressRecord>,
    pub checkpoints: Vec<CheckpointRecord>,
}

/// Episode seeds for held-out greedy evaluation, disjoint from training
/// draws by construction of the stream.
pub fn evaluation_seeds(seed: u64, count: usize) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    (0..count).map(|_| (rng.random(), rng.random())).collect()
}

/// Mean total emission of the greedy policy over every instance and
/// evaluation sequence.
pub fn evaluate_greedy(net: &ActorCritic, setup: &TrainSetup, sequences: usize) -> Result<f64> {
    let mut policy = LearnedPolicy::greedy(net.clone());
    let mut total = 0.0;
    let mut count = 0usize;
    for inst in &setup.instances {
        for (arrival_seed, choice_seed) in evaluation_seeds(setup.seed, sequences) {
            let arrivals = sample_arrivals(inst, &setup.env, &mut ChaCha8Rng::seed_from_u64(arrival_seed));
            let trace = run_episode_on(inst, &setup.choice, &setup.env, &mut policy, &arrivals, ChaCha8Rng::seed_from_u64(choice_seed))?;
            total += trace.total_emission;
            count += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}

pub struct Trainer<'a> {
    setup: &'a TrainSetup,
    pub net: ActorCritic,
    adam: Adam,
    episodes: ChaCha8Rng,
    actions: ChaCha8Rng,
    shuffles: ChaCha8Rng,
    pub steps_done: usize,
    pub updates_done: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(setup: &'a TrainSetup) -> Result<Self> {
        setup.ppo.validate()?;
        let m = setup.num_pickups()?;
        let net = ActorCritic::new(setup.architecture, m, setup.seed)?;
        let adam = Adam::new(AdamConfig { learning_rate: setup.ppo.learning_rate, ..Default::default() }, net.store.len());
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(setup.seed);
            r.set_stream(k);
            r
        };
        Ok(Self { setup, net, adam, episodes: stream(1), actions: stream(2), shuffles: stream(3), steps_done: 0, updates_done: 0 })
    }

    /// Plays whole episodes with the sampling policy until at least
    /// `n_steps` decisions are recorded.
    pub fn collect(&mut self) -> Result<Rollout> {
        let setup = self.setup;
        let scale = setup.ppo.reward_scale;
        let mut out = Rollout::default();
        while out.len() < setup.ppo.n_steps {
            let inst = &setup.instances[self.episodes.random_range(0..setup.instances.len())];
            let arrival_seed: u64 = self.episodes.random();
            let choice_seed: u64 = self.episodes.random();
            let arrivals = sample_arrivals(inst, &setup.env, &mut ChaCha8Rng::seed_from_u64(arrival_seed));
            if arrivals.is_empty() {
                continue;
            }
            let mut ep = Episode::new(inst, &setup.choice, setup.env, arrivals, ChaCha8Rng::seed_from_u64(choice_seed))?;
            let mut emission = 0.0;
            while !ep.is_done() {
                let input = self.net.encode(ep.state());
                let (logits, value) = self.net.evaluate(&input);
                let action = sample_action(&logits, &mut self.actions);
                let logp = log_softmax(&logits);
                let entropy = -logp.iter().map(|&l| l.exp() * l).sum::<f64>();
                let step = ep.step(action_to_offer(action, self.net.spec.num_pickups))?;
                emission += step.cost;
                out.transitions.push(Transition {
                    input,
                    action,
                    log_prob: logp[action],
                    value,
                    entropy,
                    reward: -step.cost / scale,
                    done: step.done,
                });
            }
            out.episode_emissions.push(emission);
        }
        self.steps_done += out.len();
        Ok(out)
    }

    /// Gradient of the mean mini-batch loss at the current parameters.
    pub fn batch_gradient(&self, rollout: &Rollout, adv: &[f64], targets: &[f64], batch: &[usize]) -> (Vec<f64>, BatchStats) {
        let cfg = &self.setup.ppo;
        let w = LossWeights { clip_eps: cfg.clip_eps, value_coef: cfg.value_coef, entropy_coef: cfg.entropy_coef };
        let inv = 1.0 / batch.len() as f64;
        let net = &self.net;
        let partials: Vec<(Vec<f64>, BatchStats)> = batch
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut grads = vec![0.0; net.store.len()];
                let mut stats = BatchStats::default();
                for &i in chunk {
                    let t = &rollout.transitions[i];
                    let f = net.forward(&t.input);
                    let s = SampleTargets { action: t.action, old_log_prob: t.log_prob, advantage: adv[i], value_target: targets[i] };
                    let l = sample_loss(f.logits(), f.value(), &s, &w);
                    let dl: Vec<f64> = l.dlogits.iter().map(|d| d * inv).collect();
                    f.backward(&dl, l.dvalue * inv, &mut grads);
                    stats.policy_loss -= l.clipped_surrogate * inv;
                    stats.value_loss += l.value_error * l.value_error * inv;
                    stats.entropy += l.entropy * inv;
                    stats.clip_fraction += if l.clipped { inv } else { 0.0 };
                    stats.approx_kl += (t.log_prob - l.log_prob) * inv;
                }
                (grads, stats)
            })
            .collect();
        let mut grads = vec![0.0; net.store.len()];
        let mut stats = BatchStats::default();
        for (g, s) in partials {
            for (a, b) in grads.iter_mut().zip(&g) {
                *a += b;
            }
            stats.policy_loss += s.policy_loss;
            stats.value_loss += s.value_loss;
            stats.entropy += s.entropy;
            stats.clip_fraction += s.clip_fraction;
            stats.approx_kl += s.approx_kl;
        }
        (grads, stats)
    }

    /// Several epochs of shuffled mini-batch Adam steps on one rollout.
    /// Returns mean batch statistics and the mean gradient norm.
    pub fn update(&mut self, rollout: &Rollout) -> (BatchStats, f64) {
        let cfg = self.setup.ppo;
        let (adv, targets) = rollout.advantages(&cfg);
        let mut order: Vec<usize> = (0..rollout.len()).collect();
        let mut mean = BatchStats::default();
        let mut norm_sum = 0.0;
        let mut batches = 0usize;
        for _ in 0..cfg.epochs_per_update {
            order.shuffle(&mut self.shuffles);
            for batch in order.chunks(cfg.batch_size) {
                let (mut grads, s) = self.batch_gradient(rollout, &adv, &targets, batch);
                let norm = match cfg.max_grad_norm {
                    Some(max) => clip_grad_norm(&mut grads, max),
                    None => grads.iter().map(|g| g * g).sum::<f64>().sqrt(),
                };
                self.adam.step(&mut self.net.store.values, &grads);
                mean.policy_loss += s.policy_loss;
                mean.value_loss += s.value_loss;
                mean.entropy += s.entropy;
                mean.clip_fraction += s.clip_fraction;
                mean.approx_kl += s.approx_kl;
                norm_sum += norm;
                batches += 1;
            }
        }
        self.updates_done += 1;
        let k = batches.max(1) as f64;
        let stats = BatchStats {
            policy_loss: mean.policy_loss / k,
            value_loss: mean.value_loss / k,
            entropy: mean.entropy / k,
            clip_fraction: mean.clip_fraction / k,
            approx_kl: mean.approx_kl / k,
        };
        (stats, norm_sum / k)
    }

    fn checkpoint(&self, dir: Option<&Path>, eval: f64) -> Result<CheckpointRecord> {
        let path = match dir {
            Some(d) => {
                let p = d.join(format!("checkpoint_{:08}.ckpt", self.steps_done));
                let extra = serde_json::json!({ "ppo": self.setup.ppo, "seed": self.setup.seed, "eval_emission": eval });
                self.net.checkpoint(self.steps_done as u64, extra).save(&p)?;
                Some(p)
            }
            None => None,
        };
        Ok(CheckpointRecord { update: self.updates_done, step: self.steps_done, eval_emission: eval, path })
    }

    /// Full training loop. With an output directory, writes
    /// `progress.jsonl` and checkpoint files there.
    pub fn run(mut self, out_dir: Option<&Path>) -> Result<TrainOutcome> {
        let cfg = self.setup.ppo;
        let mut log_file = match out_dir {
            Some(d) => {
                std::fs::create_dir_all(d)?;
                Some(std::io::BufWriter::new(std::fs::File::create(d.join("progress.jsonl"))?))
            }
            None => None,
        };
        let mut progress = Vec::new();
        let mut checkpoints = Vec::new();
        while self.steps_done < cfg.total_steps {
            let rollout = self.collect()?;
            let rollout_entropy = rollout.transitions.iter().map(|t| t.entropy).sum::<f64>() / rollout.len() as f64;
            if rollout_entropy < 1e-3 && (self.steps_done as f64) <= 0.1 * cfg.total_steps as f64 {
                return Err(Error::Diverged { step: self.steps_done, entropy: rollout_entropy });
            }
            let (stats, grad_norm) = self.update(&rollout);
            let finished = self.steps_done >= cfg.total_steps;
            let due = finished || (cfg.eval_every > 0 && self.updates_done.is_multiple_of(cfg.eval_every));
            let eval_emission = if due { Some(evaluate_greedy(&self.net, self.setup, cfg.eval_sequences)?) } else { None };
            let n = rollout.episode_emissions.len() as f64;
            let mean_emission = rollout.episode_emissions.iter().sum::<f64>() / n;
            let record = ProgressRecord {
                update: self.updates_done,
                step: self.steps_done,
                episodes: rollout.episode_emissions.len(),
                mean_return: -mean_emission / cfg.reward_scale,
                mean_emission,
                rollout_entropy,
                policy_loss: stats.policy_loss,
                value_loss: stats.value_loss,
                entropy: stats.entropy,
                clip_fraction: stats.clip_fraction,
                approx_kl: stats.approx_kl,
                grad_norm,
                eval_emission,
            };
            log::info!("update {} step {} mean emission {:.1}", record.update, record.step, record.mean_emission);
            if let Some(f) = log_file.as_mut() {
                writeln!(f, "{}", serde_json::to_string(&record)?)?;
            }
            progress.push(record);
            if let Some(eval) = eval_emission {
                checkpoints.push(self.checkpoint(out_dir, eval)?);
            }
        }
        if let Some(mut f) = log_file {
            f.flush()?;
        }
        Ok(TrainOutcome { net: self.net, progress, checkpoints })
    }
}

pub fn train(setup: &TrainSetup, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    Trainer::new(setup)?.run(out_dir)
}
