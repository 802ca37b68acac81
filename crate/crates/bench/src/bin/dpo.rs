use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpo_bench::benchmark::{arrival_sequences, perfect_info_summary, solve_perfect_info};
use dpo_bench::seeds::instance_seed;
use dpo_bench::sweep::{metrics_csv, WORKERS_ENV};
use dpo_bench::{run_benchmark_detailed, run_sweep, BenchmarkConfig, PiCache, PolicySpec, Result, SweepConfig, TrainConfig};
use dpo_core::policies::PerfectInfoConfig;
use dpo_core::{ChoiceParams, EnvConfig, Instance, Location, Regime};

#[derive(Parser)]
#[command(name = "dpo", version, about = "Pickup-point offering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the geographic instances a benchmark with this seed would use.
    GenerateInstances {
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train a policy network with PPO.
    Train {
        /// TOML training config; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "radius")]
        radius_km: Option<f64>,
        #[arg(long)]
        pickups: Option<usize>,
        #[arg(long)]
        regime: Option<Regime>,
        #[arg(long)]
        total_steps: Option<usize>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Benchmark policies on one cell and print the metrics table.
    Evaluate {
        #[command(flatten)]
        cell: CellArgs,
        /// Policy spec, repeatable: home, nearest, dynamic_nearest[:t],
        /// unrestricted, perfect_info, uniform_random[:seed], learned:path.
        #[arg(long = "policy", short, required = true)]
        policies: Vec<PolicySpec>,
        /// Shorthand for --policy learned:PATH.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        sequences: usize,
        #[arg(long, default_value_t = 20)]
        sims: usize,
        #[arg(long)]
        expected_orders: Option<f64>,
        #[arg(long)]
        pi_cache: Option<PathBuf>,
        /// CSV output file; stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run a grid of benchmark cells from a TOML config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
    },
    /// Solve the perfect-information problem for one arrival sequence.
    PerfectInfo {
        #[command(flatten)]
        cell: CellArgs,
        /// Instance file; otherwise instance --index of the seeded set.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 0)]
        sequence: usize,
        #[arg(long)]
        expected_orders: Option<f64>,
        #[arg(long)]
        pi_cache: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CellArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Region radius L in km.
    #[arg(long = "radius", default_value_t = 4.0)]
    radius_km: f64,
    /// Number of pickup points |M|.
    #[arg(long, default_value_t = 15)]
    pickups: usize,
    #[arg(long, default_value_t = Regime::Base)]
    regime: Regime,
    #[arg(long, default_value_t = 5)]
    instances: usize,
}

impl CellArgs {
    fn config(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            seed: self.seed,
            radius_km: self.radius_km,
            num_pickups: self.pickups,
            regime: self.regime,
            n_geo_instances: self.instances,
            ..Default::default()
        }
    }
}

fn write_output(out: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, bytes)?
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateInstances { cell, out } => {
            let config = cell.config();
            config.validate()?;
            fs::create_dir_all(&out)?;
            for (k, inst) in config.instances()?.iter().enumerate() {
                let path = out.join(format!("instance_{k:03}.json"));
                inst.save(&path)?;
                println!("{} seed={}", path.display(), instance_seed(config.seed, k));
            }
        }
        Command::Train { config, seed, radius_km, pickups, regime, total_steps, out } => {
            let mut c = match config {
                Some(p) => TrainConfig::load(p)?,
                None => TrainConfig::default(),
            };
            c.seed = seed.unwrap_or(c.seed);
            c.radius_km = radius_km.unwrap_or(c.radius_km);
            c.num_pickups = pickups.unwrap_or(c.num_pickups);
            c.regime = regime.unwrap_or(c.regime);
            c.ppo.total_steps = total_steps.unwrap_or(c.ppo.total_steps);
            fs::create_dir_all(&out)?;
            fs::write(out.join("train_config.toml"), toml::to_string(&c).map_err(|e| dpo_bench::Error::Config(e.to_string()))?)?;
            let outcome = dpo_ppo::train(&c.setup()?, Some(&out))?;
            let last = outcome.progress.last().map_or(0, |p| p.step);
            let final_path = out.join("final.ckpt");
            outcome.net.checkpoint(last as u64, serde_json::to_value(&c)?).save(&final_path)?;
            println!("{}", final_path.display());
        }
        Command::Evaluate { cell, mut policies, checkpoint, sequences, sims, expected_orders, pi_cache, out } => {
            if let Some(p) = checkpoint {
                policies.push(PolicySpec::Learned(p));
            }
            let mut config = BenchmarkConfig { n_sequences: sequences, n_choice_sims: sims, ..cell.config() };
            if let Some(n) = expected_orders {
                config.env = EnvConfig::default().with_expected_orders(n);
            }
            let cache = pi_cache.map(PiCache::new).transpose()?;
            let run = run_benchmark_detailed(&config, &policies, cache.as_ref())?;
            write_output(out.as_ref(), &metrics_csv(&run.records())?)?;
        }
        Command::Sweep { config, out, workers } => {
            let c = SweepConfig::load(config)?;
            let workers = match workers {
                Some(w) => w,
                None => dpo_bench::workers_from_env()?,
            };
            let o = run_sweep(&c, &out, workers)?;
            println!("{}\n{}", o.metrics_path.display(), o.manifest_path.display());
        }
        Command::PerfectInfo { cell, instance, index, sequence, expected_orders, pi_cache, out } => {
            let mut config = BenchmarkConfig { n_sequences: sequence + 1, ..cell.config() };
            if let Some(n) = expected_orders {
                config.env = EnvConfig::default().with_expected_orders(n);
            }
            let inst: Instance = match instance {
                Some(p) => Instance::load(p)?,
                None => {
                    config.n_geo_instances = config.n_geo_instances.max(index + 1);
                    config.instances()?.swap_remove(index)
                }
            };
            config.validate()?;
            let seq = arrival_sequences(&config, std::slice::from_ref(&inst)).swap_remove(sequence);
            let orders: Vec<Location> = seq.arrivals.iter().map(|a| a.location).collect();
            let params = ChoiceParams::regime(config.regime);
            let cache = pi_cache.map(PiCache::new).transpose()?;
            let pi = PerfectInfoConfig { tsp: config.env.tsp, ..config.perfect_info };
            let sol = solve_perfect_info(&inst, &orders, &params, pi, cache.as_ref())?;
            let s = perfect_info_summary(&inst, &orders, &sol);
            let report = serde_json::json!({
                "orders": s.orders,
                "pickup_orders": s.pickup_orders,
                "visited_pickups": s.visited_pickups,
                "truck_emission_g": s.truck_emission,
                "customer_emission_g": s.customer_emission,
                "total_emission_g": s.total_emission,
                "solution": sol,
            });
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            write_output(out.as_ref(), text.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
