use super::*;
use crate::mdp::{EpisodeConfig, MdpEnv};
use crate::solution::random_initial_solution;
use crate::Instance;
use alloc::vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_obs(rng: &mut ChaCha8Rng, n: usize) -> Observation {
    let mut nodes = vec![0.0; n * NODE_FEATURES];
    for i in 0..n {
        for k in 0..4 {
            nodes[i * NODE_FEATURES + k] = rng.gen::<f64>();
        }
        let removed = i > 0 && rng.gen_bool(0.3);
        nodes[i * NODE_FEATURES + 4] = if removed { 0.0 } else { 1.0 };
        nodes[i * NODE_FEATURES + 5] = if removed { 1.0 } else { 0.0 };
    }
    let globals = (0..GLOBAL_FEATURES).map(|_| rng.gen::<f64>()).collect();
    Observation {
        n_nodes: n,
        nodes,
        globals,
    }
}

fn small_mlp(n: usize) -> NetworkConfig {
    NetworkConfig {
        arch: Architecture::Mlp {
            nodes: n,
            hidden: vec![8, 6, 5],
        },
        node_features: NODE_FEATURES,
        global_features: GLOBAL_FEATURES,
        outputs: 3,
    }
}

fn small_gat() -> NetworkConfig {
    NetworkConfig {
        arch: Architecture::Gat { layers: 3, embed: 5 },
        node_features: NODE_FEATURES,
        global_features: GLOBAL_FEATURES,
        outputs: 3,
    }
}

/// Scalar loss `Σ c · Q` over a batch.
fn loss(net: &QNetwork, batch: &[&Observation], c: &[f64]) -> f64 {
    let tape = net.forward_batch(batch).unwrap();
    tape.outputs().iter().zip(c).map(|(q, w)| q * w).sum()
}

/// Largest relative error between analytic and central-difference gradients
/// over every parameter coordinate.
fn max_gradient_error(config: NetworkConfig, seed: u64, n: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = QNetwork::new(config, &mut rng).unwrap();
    // Non-zero biases so every code path carries signal.
    for a in net.params_mut().arrays_mut() {
        if a.name.ends_with("bias") {
            a.data.iter_mut().for_each(|x| *x = rng.gen_range(-0.3..0.3));
        }
    }
    let obs: Vec<Observation> = (0..3).map(|_| random_obs(&mut rng, n)).collect();
    let batch: Vec<&Observation> = obs.iter().collect();
    let c: Vec<f64> = (0..3 * net.config().outputs).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let tape = net.forward_batch(&batch).unwrap();
    let grads = net.backward(&tape, &c).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..net.params().count() {
        let orig = net.params().coord(k);
        *net.params_mut().coord_mut(k) = orig + h;
        let up = loss(&net, &batch, &c);
        *net.params_mut().coord_mut(k) = orig - h;
        let down = loss(&net, &batch, &c);
        *net.params_mut().coord_mut(k) = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.coord(k);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5);
        worst = worst.max(rel);
    }
    worst
}

#[test]
fn mlp_gradients_match_finite_differences() {
    for seed in 0..10 {
        let err = max_gradient_error(small_mlp(4), seed, 4);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn gat_gradients_match_finite_differences() {
    for seed in 0..10 {
        let err = max_gradient_error(small_gat(), seed, 5);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for config in [small_mlp(4), small_gat()] {
        let net = QNetwork::new(config, &mut rng).unwrap();
        let obs = random_obs(&mut rng, 4);
        let tape = net.forward_batch(&[&obs]).unwrap();
        let grads = net.backward(&tape, &[0.0; 3]).unwrap();
        assert!(grads.arrays().iter().all(|a| a.data.iter().all(|&g| g == 0.0)));
        assert!(net.backward(&tape, &[0.0; 2]).is_err());
    }
}

#[test]
fn masked_entry_gets_no_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = QNetwork::new(small_mlp(4), &mut rng).unwrap();
    let obs = random_obs(&mut rng, 4);
    let tape = net.forward_batch(&[&obs]).unwrap();
    let grads = net.backward(&tape, &[1.0, 0.0, 0.0]).unwrap();
    let head_w = grads.get("mlp.3.weight").unwrap();
    for row in head_w.data.chunks(3) {
        assert_eq!((row[1], row[2]), (0.0, 0.0));
    }
    assert_eq!(grads.get("mlp.3.bias").unwrap().data, vec![1.0, 0.0, 0.0]);
}

#[test]
fn mlp_output_layer_is_affine() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = QNetwork::new(small_mlp(4), &mut rng).unwrap();
    let obs = random_obs(&mut rng, 4);
    net.params_mut().fill(0.0);
    assert_eq!(net.forward(&obs).unwrap(), vec![0.0; 3]);

    let mut net = QNetwork::new(small_mlp(4), &mut rng).unwrap();
    net.params_mut().arrays_mut()[7].data[1] = 0.5;
    let before = net.forward(&obs).unwrap();
    net.params_mut().arrays_mut()[7].data[1] = 1.0;
    let after = net.forward(&obs).unwrap();
    assert!((after[1] - before[1] - 0.5).abs() < 1e-12);
    assert_eq!((after[0], after[2]), (before[0], before[2]));
    assert_eq!(net.forward(&obs).unwrap(), after);
}

#[test]
fn identical_nodes_attend_uniformly() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let net = QNetwork::new(NetworkConfig::gat(14), &mut rng).unwrap();
    let n = 7;
    let row = [0.3, 0.6, 0.1, 0.5, 1.0, 0.0];
    let nodes: Vec<f64> = (0..n).flat_map(|_| row).collect();
    let dims = net.config().gat_dims();
    for alpha in gat::attention(net.params(), dims, &nodes, n, &[1.0, 0.5, 0.2, 0.1]) {
        assert!(alpha.iter().all(|a| (a - 1.0 / n as f64).abs() < 1e-12));
    }
    let obs = random_obs(&mut rng, n);
    for alpha in gat::attention(net.params(), dims, &obs.nodes, n, &obs.globals) {
        for r in alpha.chunks(n) {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn gat_is_permutation_equivariant_and_pooled_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = QNetwork::new(NetworkConfig::gat(14), &mut rng).unwrap();
    let n = 9;
    let obs = random_obs(&mut rng, n);
    let perm = [4usize, 0, 8, 2, 7, 1, 3, 6, 5];
    let mut permuted = obs.clone();
    for (dst, &src) in perm.iter().enumerate() {
        permuted.nodes[dst * NODE_FEATURES..(dst + 1) * NODE_FEATURES].copy_from_slice(obs.node(src));
    }
    let dims = net.config().gat_dims();
    let h = gat::embeddings(net.params(), dims, &obs.nodes, n, &obs.globals);
    let hp = gat::embeddings(net.params(), dims, &permuted.nodes, n, &permuted.globals);
    let embed = 32;
    for (layer, layer_p) in h.iter().zip(&hp) {
        for (dst, &src) in perm.iter().enumerate() {
            for k in 0..embed {
                assert!((layer_p[dst * embed + k] - layer[src * embed + k]).abs() < 1e-12);
            }
        }
    }
    let q = net.forward(&obs).unwrap();
    let qp = net.forward(&permuted).unwrap();
    assert!(q.iter().zip(&qp).all(|(a, b)| (a - b).abs() < 1e-12));

    let mlp = QNetwork::new(small_mlp(n), &mut rng).unwrap();
    assert_ne!(mlp.forward(&obs).unwrap(), mlp.forward(&permuted).unwrap());
}

#[test]
fn gat_size_is_independent_of_graph_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = QNetwork::new(NetworkConfig::gat(14), &mut rng).unwrap();
    let count = net.params().count();
    // 3 layers: 6·32 + 2·32, then twice 32·32 + 2·32; head (32 + 4)·14 + 14.
    assert_eq!(count, (6 * 32 + 64) + 2 * (32 * 32 + 64) + 36 * 14 + 14);
    for n in [21, 51, 101] {
        let q = net.forward(&random_obs(&mut rng, n)).unwrap();
        assert_eq!(q.len(), 14);
        assert!(q.iter().all(|x| x.is_finite()));
    }
    let again = QNetwork::from_parameters(NetworkConfig::gat(14), net.params().clone()).unwrap();
    assert_eq!(again.params().count(), count);
}

#[test]
fn forward_is_finite_for_normalised_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mlp = QNetwork::new(NetworkConfig::mlp(21, 14), &mut rng).unwrap();
    let gat = QNetwork::new(NetworkConfig::gat(14), &mut rng).unwrap();
    for _ in 0..50 {
        let obs = random_obs(&mut rng, 21);
        assert!(mlp.forward(&obs).unwrap().iter().all(|x| x.is_finite()));
        assert!(gat.forward(&obs).unwrap().iter().all(|x| x.is_finite()));
    }
}

fn c_like(n: usize) -> Instance {
    let rows: Vec<(f64, f64, u32)> = (0..=n)
        .map(|i| ((i * 37 % 100) as f64, (i * 61 % 100) as f64, if i == 0 { 0 } else { 5 + (i % 5) as u32 * 5 }))
        .collect();
    Instance::new("c", &rows, 200 * n as u32 / 100).unwrap()
}

#[test]
fn encoder_layout() {
    let inst = c_like(20);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let start = random_initial_solution(&inst, &mut rng).unwrap();
    let portfolio = Portfolio::build(12).unwrap();
    let mut env = MdpEnv::new(&inst, portfolio.clone(), EpisodeConfig::default()).unwrap();
    let s0 = env.reset(&start).unwrap();
    let obs = encode_state(&s0);
    assert_eq!(obs.nodes.len() + obs.globals.len(), 130);
    assert_eq!(obs.node(0)[2..], [0.0, 0.0, 1.0, 0.0]);
    assert!((0..21).all(|i| obs.node(i)[5] == 0.0));
    assert_eq!(obs.globals[0], 1.0);
    assert_eq!(obs.globals[1], 1.0);
    assert_eq!(obs.globals[3], 4.0 / 20.0);

    let s1 = env
        .step(&s0, crate::operators::OperatorId::Destroy(crate::operators::DestroyOp::RandomNode), &mut rng)
        .unwrap()
        .next;
    let obs = encode_state(&s1);
    assert_eq!(obs.globals[0], 0.0);
    let flagged: Vec<usize> = (1..21).filter(|&i| obs.node(i)[5] == 1.0).collect();
    let mut removed = s1.solution().removal_list().to_vec();
    removed.sort_unstable();
    assert_eq!(flagged, removed);
    assert!(flagged.iter().all(|&i| obs.node(i)[4] == 0.0));

    let mlp = QNetwork::new(NetworkConfig::mlp(21, 14), &mut rng).unwrap();
    let q = mlp.q_values(&s0, &portfolio).unwrap();
    assert_eq!(q.valid.iter().filter(|&&v| v).count(), 12);
    assert!(!q.valid[12] && !q.valid[13]);
    assert!(q.argmax().unwrap() < 12);
    assert!(mlp.q_values(&s0, &Portfolio::build(5).unwrap()).is_err());

    let big = c_like(50);
    let big_start = random_initial_solution(&big, &mut rng).unwrap();
    let mut big_env = MdpEnv::new(&big, portfolio.clone(), EpisodeConfig::new(10, 10)).unwrap();
    let big_state = big_env.reset(&big_start).unwrap();
    assert!(matches!(mlp.q_values(&big_state, &portfolio), Err(Error::Shape(_))));
    let gat = QNetwork::new(NetworkConfig::gat(14), &mut rng).unwrap();
    assert_eq!(gat.q_values(&big_state, &portfolio).unwrap().values.len(), 14);
}

#[test]
fn adam_first_step_and_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = QNetwork::new(small_mlp(3), &mut rng).unwrap();
    let mut params = net.params().clone();
    let mut adam = Adam::new(&params, Adam::DEFAULT_LR);
    let mut grads = Parameters::zeros_like(&params);
    for k in 0..grads.count() {
        *grads.coord_mut(k) = rng.gen_range(0.1..2.0) * if k % 2 == 0 { 1.0 } else { -1.0 };
    }
    let before = params.clone();
    adam.step(&mut params, &grads).unwrap();
    for k in 0..params.count() {
        let moved = params.coord(k) - before.coord(k);
        assert!((moved.abs() - 5e-4).abs() < 1e-9);
        assert_eq!(moved.signum(), -grads.coord(k).signum());
    }
    let m_before = adam.first_moment().clone();
    let snapshot = params.clone();
    let zero = Parameters::zeros_like(&params);
    adam.step(&mut params, &zero).unwrap();
    assert!(adam.first_moment().coord(0).abs() < m_before.coord(0).abs());
    assert_eq!(adam.steps(), 2);
    // Parameters still move from momentum; a fresh optimizer with zero
    // gradient must leave them untouched.
    let mut fresh = Adam::new(&snapshot, Adam::DEFAULT_LR);
    let mut p = snapshot.clone();
    fresh.step(&mut p, &zero).unwrap();
    assert_eq!(p, snapshot);
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for config in [NetworkConfig::mlp(21, 14), NetworkConfig::gat(14)] {
        let net = QNetwork::new(config, &mut rng).unwrap();
        let bytes = checkpoint::to_bytes(&net);
        let back = checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.config(), net.config());
        for (a, b) in net.params().arrays().iter().zip(back.params().arrays()) {
            assert_eq!(a.name, b.name);
            assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn checkpoint_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let net = QNetwork::new(small_gat(), &mut rng).unwrap();
    let bytes = checkpoint::to_bytes(&net);

    let mut wrong = bytes.clone();
    wrong[11] = b'7';
    assert!(matches!(checkpoint::from_bytes(&wrong), Err(Error::CheckpointVersion { .. })));
    assert!(matches!(checkpoint::from_bytes(b"garbage"), Err(Error::CheckpointVersion { .. })));
    assert!(matches!(
        checkpoint::from_bytes(&bytes[..bytes.len() - 3]),
        Err(Error::Checkpoint(_))
    ));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(checkpoint::from_bytes(&extra).is_err());
}

#[test]
fn gat_checkpoint_evaluates_at_any_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let net = QNetwork::new(NetworkConfig::gat(6), &mut rng).unwrap();
    let back = checkpoint::from_bytes(&checkpoint::to_bytes(&net)).unwrap();
    for n in [21, 51, 101] {
        let obs = random_obs(&mut rng, n);
        let a = net.forward(&obs).unwrap();
        let b = back.forward(&obs).unwrap();
        assert_eq!(a, b);
    }
}
