use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dpo_core::policies::{
    DynamicNearestPolicy, HomePolicy, NearestPolicy, Restriction, UniformRandomPolicy, UnrestrictedPolicy,
    DEFAULT_DYNAMIC_THRESHOLD,
};
use dpo_core::Policy;
use dpo_neural::{ActorCritic, Checkpoint};
use dpo_ppo::LearnedPolicy;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::seeds::{derive_seed, POLICY_STREAM};
use crate::{Error, Result};

/// A policy named on the command line or in a sweep file.
///
/// Accepted forms: `home`, `nearest`, `dynamic_nearest[:threshold]`,
/// `unrestricted`, `perfect_info`, `uniform_random[:seed]` and
/// `learned:path`. In a learned path, `{m}` is replaced by `|M|`.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Home,
    Nearest,
    DynamicNearest(f64),
    Unrestricted,
    PerfectInfo,
    UniformRandom(u64),
    Learned(PathBuf),
}

impl PolicySpec {
    pub fn is_perfect_info(&self) -> bool {
        matches!(self, PolicySpec::PerfectInfo)
    }

    /// Checkpoint path for a cell with `num_pickups` pickup points.
    pub fn checkpoint_path(&self, num_pickups: usize) -> Option<PathBuf> {
        match self {
            PolicySpec::Learned(p) => Some(PathBuf::from(p.to_string_lossy().replace("{m}", &num_pickups.to_string()))),
            _ => None,
        }
    }

    /// Resolves the spec into something that can build per-episode policies.
    /// Learned checkpoints are loaded here, once.
    pub fn prepare(&self, num_pickups: usize) -> Result<PreparedPolicy> {
        Ok(match self {
            PolicySpec::Home => PreparedPolicy::Home,
            PolicySpec::Nearest => PreparedPolicy::Nearest,
            PolicySpec::DynamicNearest(t) => PreparedPolicy::DynamicNearest(*t),
            PolicySpec::Unrestricted => PreparedPolicy::Unrestricted,
            PolicySpec::PerfectInfo => PreparedPolicy::PerfectInfo,
            PolicySpec::UniformRandom(seed) => PreparedPolicy::UniformRandom(*seed),
            PolicySpec::Learned(_) => {
                let path = self.checkpoint_path(num_pickups).expect("learned spec has a path");
                let net = load_network(&path)?;
                if net.spec.num_pickups != num_pickups {
                    return Err(Error::Config(format!(
                        "checkpoint {} was trained for {} pickup points, the benchmark has {num_pickups}",
                        path.display(),
                        net.spec.num_pickups
                    )));
                }
                PreparedPolicy::Learned(Box::new(net))
            }
        })
    }
}

fn load_network(path: &Path) -> Result<ActorCritic> {
    if !path.is_file() {
        return Err(Error::MissingCheckpoint(path.to_path_buf()));
    }
    let ck = Checkpoint::load(path)?;
    Ok(ActorCritic::from_checkpoint(&ck)?)
}

#[derive(Debug, Clone)]
pub enum PreparedPolicy {
    Home,
    Nearest,
    DynamicNearest(f64),
    Unrestricted,
    PerfectInfo,
    UniformRandom(u64),
    Learned(Box<ActorCritic>),
}

impl PreparedPolicy {
    /// Fresh policy for one episode. `key` identifies the episode so that
    /// randomized policies draw the same stream regardless of run order.
    /// Returns `None` for the perfect-information benchmark.
    pub fn instantiate(&self, key: &[u64]) -> Option<Box<dyn Policy>> {
        Some(match self {
            PreparedPolicy::Home => Box::new(HomePolicy),
            PreparedPolicy::Nearest => Box::new(NearestPolicy),
            PreparedPolicy::DynamicNearest(t) => {
                Box::new(DynamicNearestPolicy::new(*t, Restriction::Chosen).expect("threshold validated on parse"))
            }
            PreparedPolicy::Unrestricted => Box::new(UnrestrictedPolicy),
            PreparedPolicy::PerfectInfo => return None,
            PreparedPolicy::UniformRandom(seed) => {
                let mut path = vec![POLICY_STREAM];
                path.extend_from_slice(key);
                Box::new(UniformRandomPolicy::new(derive_seed(*seed, &path)))
            }
            PreparedPolicy::Learned(net) => Box::new(LearnedPolicy::greedy((**net).clone())),
        })
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Home => f.write_str("home"),
            PolicySpec::Nearest => f.write_str("nearest"),
            PolicySpec::DynamicNearest(t) => write!(f, "dynamic_nearest:{t}"),
            PolicySpec::Unrestricted => f.write_str("unrestricted"),
            PolicySpec::PerfectInfo => f.write_str("perfect_info"),
            PolicySpec::UniformRandom(seed) => write!(f, "uniform_random:{seed}"),
            PolicySpec::Learned(p) => write!(f, "learned:{}", p.display()),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let bad = |msg: &str| Error::Config(format!("policy `{s}`: {msg}"));
        let no_arg = |spec: PolicySpec| match arg {
            None => Ok(spec),
            Some(_) => Err(bad("takes no argument")),
        };
        match head {
            "home" => no_arg(PolicySpec::Home),
            "nearest" => no_arg(PolicySpec::Nearest),
            "unrestricted" => no_arg(PolicySpec::Unrestricted),
            "perfect_info" => no_arg(PolicySpec::PerfectInfo),
            "dynamic_nearest" => {
                let t = match arg {
                    None => DEFAULT_DYNAMIC_THRESHOLD,
                    Some(a) => a.parse::<f64>().map_err(|_| bad("threshold is not a number"))?,
                };
                if !(t > 0.0 && t <= 1.0) {
                    return Err(bad("threshold must lie in (0, 1]"));
                }
                Ok(PolicySpec::DynamicNearest(t))
            }
            "uniform_random" => {
                let seed = match arg {
                    None => 0,
                    Some(a) => a.parse::<u64>().map_err(|_| bad("seed is not an unsigned integer"))?,
                };
                Ok(PolicySpec::UniformRandom(seed))
            }
            "learned" => match arg {
                Some(p) if !p.is_empty() => Ok(PolicySpec::Learned(PathBuf::from(p))),
                _ => Err(bad("needs a checkpoint path, as in learned:path/to/model.ckpt")),
            },
            _ => Err(bad("unknown policy")),
        }
    }
}

impl Serialize for PolicySpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolicySpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
