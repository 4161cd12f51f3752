use charie::encoder::{CharFeature, EncodedCandidate, Sequence, FEATURE_DIM, ROLE_VALUE};
use charie::network::{
    mean_loss, train, BaselineExample, BaselineParams, Model, NetworkDims, NetworkParams, NetworkScore, Parameters,
    TrainConfig,
};
use charie::types::{bce, sigmoid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_dims() -> NetworkDims {
    NetworkDims {
        input_dim: 16,
        hidden: 8,
        global_dim: 32,
        global_hidden: 8,
    }
}

fn dense_example(rng: &mut ChaCha8Rng, dims: NetworkDims, t: usize, label: u8) -> EncodedCandidate {
    let data = (0..t * dims.input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    EncodedCandidate {
        candidate_id: String::new(),
        sequence: Sequence::dense(dims.input_dim, data).unwrap(),
        global: (0..dims.global_dim).map(|_| f64::from(u8::from(rng.gen_bool(0.4)))).collect(),
        label: Some(label),
    }
}

#[test]
fn gradients_match_central_differences() {
    let dims = small_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let batch: Vec<EncodedCandidate> = (0..4).map(|i| dense_example(&mut rng, dims, 20, (i % 2) as u8)).collect();
    let refs: Vec<&EncodedCandidate> = batch.iter().collect();
    // larger than the default scale so every gate is exercised away from 0
    let params = NetworkParams::init(dims, 0.5, 3);
    let (_, grad) = params.backward(&batch).unwrap();

    let h = 1e-5;
    let analytic: Vec<f64> = grad.tensors().iter().flat_map(|t| t.iter().copied()).collect();
    let mut numeric = Vec::with_capacity(analytic.len());
    let n_tensors = params.tensors().len();
    for ti in 0..n_tensors {
        let len = params.tensors()[ti].len();
        for k in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[ti][k] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[ti][k] -= h;
            let lp = mean_loss(&plus, &refs).unwrap();
            let lm = mean_loss(&minus, &refs).unwrap();
            numeric.push((lp - lm) / (2.0 * h));
        }
    }
    assert_eq!(analytic.len(), params.num_parameters());
    let mut worst = 0.0f64;
    for (a, n) in analytic.iter().zip(&numeric) {
        let scale = a.abs().max(n.abs());
        if scale < 1e-8 {
            assert!((a - n).abs() < 1e-10, "tiny gradient mismatch {a} vs {n}");
            continue;
        }
        worst = worst.max((a - n).abs() / scale);
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn zero_head_scores_one_half() {
    let dims = small_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut params = NetworkParams::init(dims, 0.3, 1);
    params.head.weight.data.fill(0.0);
    params.head.bias.fill(0.0);
    for _ in 0..5 {
        let ex = dense_example(&mut rng, dims, 7, 0);
        let s = params.forward(&ex).unwrap();
        assert_eq!(s.y_tilde, 0.5);
        assert_eq!(s.s_tilde, 0.0);
    }
}

#[test]
fn score_logit_identity_and_round_trip() {
    let s = NetworkScore::from_probability(0.9);
    assert!((s.s_tilde - 9f64.ln()).abs() < 1e-12);
    assert!((s.s_tilde - 2.1972246).abs() < 1e-7);
    for p in [1e-12, 0.01, 0.3, 0.5, 0.77, 1.0] {
        let s = NetworkScore::from_probability(p);
        assert!(s.y_tilde > 0.0 && s.y_tilde < 1.0 && s.s_tilde.is_finite());
        assert!((sigmoid(s.s_tilde) - s.y_tilde).abs() < 1e-9);
    }
}

#[test]
fn head_bias_monotone() {
    let dims = small_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ex = dense_example(&mut rng, dims, 5, 1);
    let mut params = NetworkParams::init(dims, 0.1, 2);
    let mut last = 0.0;
    for b in [-2.0, -1.0, 0.0, 0.5, 3.0] {
        params.head.bias[0] = b;
        let y = params.forward(&ex).unwrap().y_tilde;
        assert!(y > last);
        last = y;
    }
}

#[test]
fn bce_examples() {
    assert!((bce(0.5, 1.0) - 0.693147).abs() < 1e-6);
    assert!(bce(1.0, 1.0) < 1e-6);
    assert!(bce(0.0, 0.0) < 1e-6);
    assert!(((bce(0.5, 1.0) + bce(0.5, 0.0)) / 2.0 - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn head_bias_gradient_is_mean_residual() {
    let dims = small_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batch: Vec<EncodedCandidate> = (0..6).map(|i| dense_example(&mut rng, dims, 9, (i % 3 == 0) as u8)).collect();
    let params = NetworkParams::init(dims, 0.3, 5);
    let (_, grad) = params.backward(&batch).unwrap();
    let expected: f64 = batch
        .iter()
        .map(|e| params.predict(e).unwrap() - f64::from(e.label.unwrap()))
        .sum::<f64>()
        / batch.len() as f64;
    assert!((grad.head.bias[0] - expected).abs() < 1e-12);
}

#[test]
fn exact_predictions_give_zero_bias_gradient() {
    let dims = small_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut params = NetworkParams::zeros(dims);
    params.head.bias[0] = 60.0;
    let batch: Vec<EncodedCandidate> = (0..3).map(|_| dense_example(&mut rng, dims, 4, 1)).collect();
    let (loss, grad) = params.backward(&batch).unwrap();
    assert!(grad.head.bias[0].abs() < 1e-12);
    assert!(loss < 1e-6);
}

#[test]
fn permutation_invariant_scoring() {
    let dims = small_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let batch: Vec<EncodedCandidate> = (0..8).map(|_| dense_example(&mut rng, dims, 6, 0)).collect();
    let params = NetworkParams::init(dims, 0.2, 7);
    let forward: Vec<f64> = batch.iter().map(|e| params.forward(e).unwrap().y_tilde).collect();
    let backward: Vec<f64> = batch.iter().rev().map(|e| params.forward(e).unwrap().y_tilde).collect();
    let mut backward = backward;
    backward.reverse();
    assert_eq!(forward, backward);
}

/// Sparse character sequences whose label is whether any character carries
/// the value-role indicator.
fn separable_set(n: usize, seed: u64) -> Vec<EncodedCandidate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let t = rng.gen_range(8..16);
            let marked = rng.gen_range(0..t);
            let chars = (0..t)
                .map(|k| CharFeature {
                    char_index: rng.gen_range(0..94),
                    entity_bits: 0,
                    role_bits: if label == 1 && k == marked { 0b10 } else { 0 },
                })
                .collect();
            EncodedCandidate {
                candidate_id: format!("x{i}"),
                sequence: Sequence::Chars(chars),
                global: vec![0.0; 16],
                label: Some(label),
            }
        })
        .collect()
}

fn separable_dims() -> NetworkDims {
    NetworkDims {
        input_dim: FEATURE_DIM,
        hidden: 16,
        global_dim: 16,
        global_hidden: 4,
    }
}

#[test]
fn separable_set_uses_value_role_column() {
    let set = separable_set(4, 0);
    let row = set[1].sequence.row_dense(0);
    assert_eq!(row.len(), FEATURE_DIM);
    let any_role = |e: &EncodedCandidate| (0..e.sequence.len()).any(|t| e.sequence.row_dense(t)[ROLE_VALUE] == 1.0);
    assert!(!any_role(&set[0]));
    assert!(any_role(&set[1]));
}

#[test]
fn trains_separable_set_below_threshold() {
    let data = separable_set(200, 1);
    let cfg = TrainConfig {
        learning_rate: 0.01,
        epochs: 50,
        validation_fraction: 0.0,
        seed: 1,
        ..TrainConfig::default()
    };
    let mut params = NetworkParams::init(separable_dims(), cfg.init_scale, 1);
    let hist = train(&mut params, &data, &cfg).unwrap();
    let refs: Vec<&EncodedCandidate> = data.iter().collect();
    let loss = mean_loss(&params, &refs).unwrap();
    assert!(hist.final_train_loss() < 0.1, "epoch loss {}", hist.final_train_loss());
    assert!(loss < 0.1, "full-pass loss {loss}");
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let data = separable_set(40, 2);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        epochs: 3,
        validation_fraction: 0.0,
        ..TrainConfig::default()
    };
    let start = NetworkParams::init(separable_dims(), cfg.init_scale, 2);
    let mut params = start.clone();
    let hist = train(&mut params, &data, &cfg).unwrap();
    assert_eq!(params, start);
    let first = hist.epochs[0].train_loss;
    assert!(hist.epochs.iter().all(|e| (e.train_loss - first).abs() < 1e-12));
}

#[test]
fn same_seed_same_history() {
    let data = separable_set(60, 3);
    let cfg = TrainConfig {
        learning_rate: 0.01,
        epochs: 3,
        seed: 9,
        ..TrainConfig::default()
    };
    let run = || {
        let mut p = NetworkParams::init(separable_dims(), cfg.init_scale, 9);
        let h = train(&mut p, &data, &cfg).unwrap();
        (p, h)
    };
    let (pa, ha) = run();
    let (pb, hb) = run();
    assert_eq!(ha, hb);
    assert_eq!(pa, pb);
}

#[test]
fn empty_dataset_is_an_error() {
    let mut p = NetworkParams::zeros(separable_dims());
    assert!(train(&mut p, &[], &TrainConfig::default()).is_err());
}

fn baseline_set(n: usize) -> Vec<BaselineExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let mut input: Vec<f64> = (0..32).map(|_| f64::from(u8::from(rng.gen_bool(0.3)))).collect();
            input[0] = f64::from(label);
            BaselineExample {
                candidate_id: format!("b{i}"),
                input,
                label: Some(label),
            }
        })
        .collect()
}

#[test]
fn baseline_zero_weights_score_one_half() {
    let b = BaselineParams::zeros(32, 8);
    for ex in baseline_set(5) {
        assert_eq!(b.predict(&ex).unwrap(), 0.5);
    }
}

#[test]
fn baseline_trains_separable_set() {
    let data = baseline_set(200);
    let cfg = TrainConfig {
        learning_rate: 0.01,
        epochs: 50,
        validation_fraction: 0.0,
        ..TrainConfig::default()
    };
    let mut b = BaselineParams::init(32, 64, cfg.init_scale, 4);
    let hist = train(&mut b, &data, &cfg).unwrap();
    assert!(hist.final_train_loss() < 0.1, "{}", hist.final_train_loss());
}
