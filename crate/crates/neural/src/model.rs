use std::sync::Arc;

use dpo_core::env::GraphState;
use dpo_core::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encode::{flat_encode, Encoded, GraphInput, NODE_FEATURES};
use crate::params::{Checkpoint, ParameterStore};
use crate::tape::{Edges, ParamRef, Tape, Var};
use crate::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatConfig {
    /// Per-head embedding size `B`.
    pub embedding_size: usize,
    pub heads: usize,
    pub hidden: usize,
    /// False replaces attention weights by uniform neighbour averaging.
    pub attention_enabled: bool,
}

impl Default for GatConfig {
    fn default() -> Self {
        Self { embedding_size: 64, heads: 4, hidden: 128, attention_enabled: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlatConfig {
    pub grid_g: usize,
    pub hidden: usize,
}

impl Default for FlatConfig {
    fn default() -> Self {
        Self { grid_g: 16, hidden: 128 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Gat(GatConfig),
    Flat(FlatConfig),
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        match self {
            Architecture::Gat(c) if c.embedding_size == 0 || c.heads == 0 || c.hidden == 0 => {
                Err(Error::Config(format!("GAT sizes must be positive: {c:?}")))
            }
            Architecture::Flat(c) if c.grid_g < 2 || c.hidden == 0 => Err(Error::Config(format!("invalid flat config {c:?}"))),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Gat(c) if c.attention_enabled => "gat",
            Architecture::Gat(_) => "gat_uniform",
            Architecture::Flat(_) => "flat",
        }
    }
}

/// Parameters of one attention head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadParams {
    pub w: ParamRef,
    /// Attention weights applied to the receiving node's projection.
    pub a_dst: ParamRef,
    /// Attention weights applied to the neighbour's projection.
    pub a_src: ParamRef,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dense {
    w: ParamRef,
    b: ParamRef,
}

#[derive(Debug, Clone, PartialEq)]
struct GraphTower {
    layers: [Vec<HeadParams>; 2],
    f1: Dense,
    f2: Dense,
    f3: Dense,
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    Graph { actor: GraphTower, critic: GraphTower, v2: Dense },
    Flat { actor: [Dense; 3], critic: [Dense; 3] },
}

/// Shape description stored with checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub num_pickups: usize,
}

/// Separate actor and critic networks over one parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic<T = f64> {
    pub spec: ModelSpec,
    pub store: ParameterStore<T>,
    layout: Layout,
}

/// Recorded forward pass for gradient computation.
pub struct Forward<'p, T> {
    pub tape: Tape<'p, T>,
    /// `1 x (|M| + 1)` logits, home-only last.
    pub logits: Var,
    /// `1 x 1` value estimate.
    pub value: Var,
    /// Per layer, per head attention coefficients (edge columns); empty for
    /// the flat architecture.
    pub attention: Vec<Vec<Var>>,
}

impl<T: Scalar> Forward<'_, T> {
    pub fn logits(&self) -> &[T] {
        self.tape.value(self.logits)
    }

    pub fn value(&self) -> T {
        self.tape.scalar(self.value)
    }

    /// Adds the parameter gradient of `dlogits . logits + dvalue * value`
    /// into `grads`.
    pub fn backward(&self, dlogits: &[T], dvalue: T, grads: &mut [T]) {
        self.tape.backward(&[(self.logits, dlogits), (self.value, &[dvalue])], grads);
    }
}

fn dense<T: Scalar>(store: &mut ParameterStore<T>, name: &str, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Dense {
    let w = store.add_glorot(format!("{name}.w"), fan_in, fan_out, rng);
    let b = store.add(format!("{name}.b"), 1, fan_out);
    Dense { w, b }
}

fn graph_tower<T: Scalar>(store: &mut ParameterStore<T>, prefix: &str, c: &GatConfig, rng: &mut ChaCha8Rng) -> GraphTower {
    let mut layer = |l: usize, fan_in: usize, store: &mut ParameterStore<T>| -> Vec<HeadParams> {
        (0..c.heads)
            .map(|h| HeadParams {
                w: store.add_glorot(format!("{prefix}.gat{l}.head{h}.w"), fan_in, c.embedding_size, rng),
                a_dst: store.add_glorot(format!("{prefix}.gat{l}.head{h}.a_dst"), c.embedding_size, 1, rng),
                a_src: store.add_glorot(format!("{prefix}.gat{l}.head{h}.a_src"), c.embedding_size, 1, rng),
            })
            .collect()
    };
    let width = c.embedding_size * c.heads;
    let layers = [layer(1, NODE_FEATURES, store), layer(2, width, store)];
    GraphTower {
        layers,
        f1: dense(store, &format!("{prefix}.f1"), width, c.hidden, rng),
        f2: dense(store, &format!("{prefix}.f2"), c.hidden, c.hidden, rng),
        f3: dense(store, &format!("{prefix}.f3"), c.hidden, 1, rng),
    }
}

fn apply_dense<T: Scalar>(tape: &mut Tape<'_, T>, x: Var, d: Dense) -> Var {
    let w = tape.param(d.w);
    let b = tape.param(d.b);
    let y = tape.matmul(x, w);
    tape.add_bias(y, b)
}

/// One multi-head attention layer: per head, project, score every edge with
/// LeakyReLU, normalize over each node's in-neighbours, aggregate, apply ELU;
/// heads are concatenated. Returns the output and each head's coefficients.
pub fn gat_layer<T: Scalar>(tape: &mut Tape<'_, T>, x: Var, edges: &Arc<Edges>, heads: &[HeadParams], attention: bool) -> (Var, Vec<Var>) {
    let mut outs = Vec::with_capacity(heads.len());
    let mut alphas = Vec::with_capacity(heads.len());
    for h in heads {
        let w = tape.param(h.w);
        let z = tape.matmul(x, w);
        let alpha = if attention {
            let a_dst = tape.param(h.a_dst);
            let a_src = tape.param(h.a_src);
            let sd = tape.matmul(z, a_dst);
            let ss = tape.matmul(z, a_src);
            let e = tape.edge_scores(sd, ss, edges);
            let e = tape.leaky_relu(e, T::lit(LEAKY_SLOPE));
            tape.segment_softmax(e, edges)
        } else {
            tape.constant(edges.len(), 1, uniform_weights(edges))
        };
        let agg = tape.segment_sum(alpha, z, edges);
        outs.push(tape.elu(agg));
        alphas.push(alpha);
    }
    (tape.concat_cols(&outs), alphas)
}

/// `1 / |V(i)|` on every incoming edge of node `i`.
pub fn uniform_weights<T: Scalar>(edges: &Edges) -> Vec<T> {
    let mut w = vec![T::zero(); edges.len()];
    for i in 0..edges.num_nodes() {
        let r = edges.segment(i);
        let share = T::one() / T::lit(r.len() as f64);
        w[r].iter_mut().for_each(|v| *v = share);
    }
    w
}

/// Per-node scalar scores `n x 1` and the attention coefficients.
fn tower_scores<T: Scalar>(tape: &mut Tape<'_, T>, g: &GraphInput<T>, t: &GraphTower, attention: bool) -> (Var, Vec<Vec<Var>>) {
    let x = tape.constant(g.num_nodes(), NODE_FEATURES, g.features.clone());
    let (h1, a1) = gat_layer(tape, x, &g.edges, &t.layers[0], attention);
    let (h2, a2) = gat_layer(tape, h1, &g.edges, &t.layers[1], attention);
    let y = apply_dense(tape, h2, t.f1);
    let y = tape.tanh(y);
    let y = apply_dense(tape, y, t.f2);
    let y = tape.tanh(y);
    (apply_dense(tape, y, t.f3), vec![a1, a2])
}

fn mlp<T: Scalar>(tape: &mut Tape<'_, T>, x: Var, layers: &[Dense; 3]) -> Var {
    let y = apply_dense(tape, x, layers[0]);
    let y = tape.relu(y);
    let y = apply_dense(tape, y, layers[1]);
    let y = tape.relu(y);
    apply_dense(tape, y, layers[2])
}

impl<T: Scalar> ActorCritic<T> {
    /// Glorot-initialized network for `num_pickups` pickup points.
    pub fn new(architecture: Architecture, num_pickups: usize, seed: u64) -> Result<Self> {
        architecture.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        let actions = num_pickups + 1;
        let layout = match architecture {
            Architecture::Gat(c) => {
                let actor = graph_tower(&mut store, "actor", &c, &mut rng);
                let critic = graph_tower(&mut store, "critic", &c, &mut rng);
                let v2 = dense(&mut store, "critic.v2", actions, 1, &mut rng);
                Layout::Graph { actor, critic, v2 }
            }
            Architecture::Flat(c) => {
                let input = 1 + 2 * c.grid_g * c.grid_g;
                let mut net = |name: &str, out: usize| {
                    [
                        dense(&mut store, &format!("{name}.l1"), input, c.hidden, &mut rng),
                        dense(&mut store, &format!("{name}.l2"), c.hidden, c.hidden, &mut rng),
                        dense(&mut store, &format!("{name}.l3"), c.hidden, out, &mut rng),
                    ]
                };
                let actor = net("actor", actions);
                let critic = net("critic", 1);
                Layout::Flat { actor, critic }
            }
        };
        Ok(Self { spec: ModelSpec { architecture, num_pickups }, store, layout })
    }

    pub fn num_actions(&self) -> usize {
        self.spec.num_pickups + 1
    }

    /// Offsets of all actor parameters; the rest belong to the critic.
    pub fn actor_parameters(&self) -> Vec<std::ops::Range<usize>> {
        self.store
            .manifest()
            .iter()
            .filter(|e| e.name.starts_with("actor."))
            .map(|e| e.offset..e.offset + e.shape[0] * e.shape[1])
            .collect()
    }

    /// Panics if the state has no pending order.
    pub fn encode(&self, state: &GraphState) -> Encoded<T> {
        match self.spec.architecture {
            Architecture::Gat(_) => Encoded::Graph(GraphInput::from_state(state)),
            Architecture::Flat(c) => Encoded::Flat(flat_encode(state, c.grid_g)),
        }
    }

    pub fn forward<'p>(&'p self, input: &Encoded<T>) -> Forward<'p, T> {
        self.forward_with(&self.store.values, input)
    }

    /// Forward pass with an alternative parameter vector of the same layout.
    pub fn forward_with<'p>(&self, params: &'p [T], input: &Encoded<T>) -> Forward<'p, T> {
        assert_eq!(params.len(), self.store.len(), "parameter vector length");
        let mut tape = Tape::new(params);
        match (&self.layout, input, self.spec.architecture) {
            (Layout::Graph { actor, critic, v2 }, Encoded::Graph(g), Architecture::Gat(c)) => {
                assert_eq!(g.readout.len(), self.num_actions(), "pickup count differs from the network");
                let (va, att) = tower_scores(&mut tape, g, actor, c.attention_enabled);
                let sel = tape.gather_rows(va, &g.readout);
                let logits = tape.transpose(sel);
                let (vc, _) = tower_scores(&mut tape, g, critic, c.attention_enabled);
                let sel = tape.gather_rows(vc, &g.readout);
                let row = tape.transpose(sel);
                let value = apply_dense(&mut tape, row, *v2);
                Forward { tape, logits, value, attention: att }
            }
            (Layout::Flat { actor, critic }, Encoded::Flat(v), _) => {
                let x = tape.constant(1, v.len(), v.clone());
                let logits = mlp(&mut tape, x, actor);
                let value = mlp(&mut tape, x, critic);
                Forward { tape, logits, value, attention: Vec::new() }
            }
            _ => panic!("input encoding does not match the network architecture"),
        }
    }

    /// Logits and value without keeping the tape.
    pub fn evaluate(&self, input: &Encoded<T>) -> (Vec<T>, T) {
        let f = self.forward(input);
        (f.logits().to_vec(), f.value())
    }

    pub fn checkpoint(&self, step: u64, extra: serde_json::Value) -> Checkpoint<T> {
        let config = serde_json::json!({ "model": self.spec, "extra": extra });
        Checkpoint { step, config, store: self.store.clone() }
    }

    pub fn from_checkpoint(ck: &Checkpoint<T>) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_value(ck.config["model"].clone())?;
        let mut net = Self::new(spec.architecture, spec.num_pickups, 0)?;
        if net.store.manifest() != ck.store.manifest() {
            return Err(Error::Checkpoint("parameter manifest does not match the architecture".into()));
        }
        net.store.values.clone_from(&ck.store.values);
        Ok(net)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
