mod common;

use std::sync::Arc;

use common::{five_node_state, rel_err};
use dpo_neural::{ActorCritic, Architecture, Edges, FlatConfig, GatConfig, ParamRef, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

/// Central differences of `f` at `x` for every coordinate.
fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + H;
            let up = f(&p);
            p[i] = orig - H;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| rel_err(x, y)).fold(0.0, f64::max)
}

/// Builds `sum(w * op(x))` for a random weight matrix `w`, checks the tape
/// gradient against central differences.
fn check_op(rows: usize, cols: usize, seed: u64, op: impl Fn(&mut Tape<'_, f64>, Var) -> Var) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect();
    let weights: Vec<f64> = (0..4096).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p = ParamRef { offset: 0, rows, cols };
    let eval = |params: &[f64], grads: Option<&mut [f64]>| {
        let mut t = Tape::new(params);
        let v = t.param(p);
        let y = op(&mut t, v);
        let (m, n) = t.shape(y);
        let w = t.constant(m, n, weights[..m * n].to_vec());
        let prod = t.mul(y, w);
        let loss = t.sum(prod);
        if let Some(g) = grads {
            t.backward_scalar(loss, g);
        }
        t.scalar(loss)
    };
    let mut analytic = vec![0.0; x.len()];
    eval(&x, Some(&mut analytic));
    let numeric = numeric_grad(&x, |p| eval(p, None));
    let err = max_rel(&analytic, &numeric);
    assert!(err < TOL, "max relative error {err}");
}

#[test]
fn elementwise_layers() {
    check_op(3, 4, 1, |t, x| t.tanh(x));
    check_op(3, 4, 2, |t, x| t.elu(x));
    check_op(3, 4, 3, |t, x| t.relu(x));
    check_op(3, 4, 4, |t, x| t.leaky_relu(x, 0.2));
    check_op(3, 4, 5, |t, x| t.mul(x, x));
    check_op(3, 4, 6, |t, x| t.scale(x, -2.5));
}

#[test]
fn structural_layers() {
    check_op(3, 4, 7, |t, x| t.softmax(x));
    check_op(3, 4, 8, |t, x| {
        let xt = t.transpose(x);
        t.matmul(x, xt)
    });
    check_op(3, 4, 9, |t, x| {
        let a = t.tanh(x);
        t.concat_cols(&[x, a, x])
    });
    check_op(3, 4, 10, |t, x| t.gather_rows(x, &[2, 0, 2]));
    check_op(3, 4, 11, |t, x| {
        let r = t.gather_rows(x, &[1]);
        let y = t.add_bias(x, r);
        t.add(y, x)
    });
}

#[test]
fn graph_layers() {
    let edges = Arc::new(Edges::from_neighbors(&[vec![0, 1, 2], vec![], vec![1], vec![0, 3]]));
    let e = edges.clone();
    check_op(4, 2, 12, move |t, x| {
        let c0 = t.gather_rows(x, &[0, 1, 2, 3]);
        let w = t.transpose(c0);
        let col = t.gather_rows(w, &[0]);
        let col = t.transpose(col);
        let scores = t.edge_scores(col, col, &e);
        let alpha = t.segment_softmax(scores, &e);
        t.segment_sum(alpha, x, &e)
    });
}

fn small_gat(attention: bool) -> Architecture {
    Architecture::Gat(GatConfig { embedding_size: 3, heads: 2, hidden: 5, attention_enabled: attention })
}

/// Composed actor and critic: random linear functional of logits and value,
/// differentiated with respect to every parameter.
fn composed_check(arch: Architecture, points: usize) -> f64 {
    let (_, state) = five_node_state();
    let mut worst: f64 = 0.0;
    for seed in 0..points as u64 {
        let net = ActorCritic::<f64>::new(arch, 2, seed).unwrap();
        let input = net.encode(&state);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let dl: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dv = rng.random_range(-1.0..1.0);
        let objective = |params: &[f64]| {
            let f = net.forward_with(params, &input);
            f.logits().iter().zip(&dl).map(|(a, b)| a * b).sum::<f64>() + dv * f.value()
        };
        let mut analytic = vec![0.0; net.store.len()];
        net.forward(&input).backward(&dl, dv, &mut analytic);
        let numeric = numeric_grad(&net.store.values, objective);
        worst = worst.max(max_rel(&analytic, &numeric));
    }
    worst
}

#[test]
fn composed_attention_network() {
    let err = composed_check(small_gat(true), 100);
    assert!(err < TOL, "max relative error {err}");
}

#[test]
fn composed_uniform_and_flat_networks() {
    assert!(composed_check(small_gat(false), 10) < TOL);
    let e = composed_check(Architecture::Flat(FlatConfig { grid_g: 2, hidden: 16 }), 10);
    assert!(e < TOL, "{e}");
}

#[test]
fn actor_and_critic_parameters_are_disjoint() {
    let (_, state) = five_node_state();
    let net = ActorCritic::<f64>::new(small_gat(true), 2, 3).unwrap();
    let input = net.encode(&state);
    let mut g = vec![0.0; net.store.len()];
    net.forward(&input).backward(&[0.3, -0.2, 0.7], 0.0, &mut g);
    let actor = net.actor_parameters();
    let in_actor = |i: usize| actor.iter().any(|r| r.contains(&i));
    assert!((0..g.len()).filter(|&i| !in_actor(i)).all(|i| g[i] == 0.0));
    assert!((0..g.len()).filter(|&i| in_actor(i)).any(|i| g[i] != 0.0));

    let mut g = vec![0.0; net.store.len()];
    net.forward(&input).backward(&[0.0; 3], 1.0, &mut g);
    assert!((0..g.len()).filter(|&i| in_actor(i)).all(|i| g[i] == 0.0));
}
