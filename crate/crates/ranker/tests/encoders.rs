use rand::seq::SliceRandom;
use rand::Rng;
use routelab_autodiff::{Params, Tensor};
use routelab_core::augment::{augment_instance, AugmentConfig};
use routelab_core::rng::seeded;
use routelab_core::world::{generate_ontology, sample_dataset, WorldConfig};
use routelab_core::{Dataset, RoutingInstance};
use routelab_ranker::encoders::{AttentionEncoder, ContextEncoder, SequenceEncoder};
use routelab_ranker::model::ScoringHead;
use routelab_ranker::{
    Dims, EncoderKind, HeadActivation, LossKind, Ranker, RankerError, VariantSpec, Vocab,
};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn identity(n: usize) -> Tensor {
    Tensor::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = seeded(seed);
    Tensor::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

#[test]
fn attention_hand_case() {
    let mut params = Params::new();
    let enc = AttentionEncoder::register(&mut params, 2, 1, 2, &mut |r, _| identity(r));
    assert!(enc.w_o.is_none());
    let e = identity(2);
    let c = ContextEncoder::Attention(enc).apply(&params, &e).unwrap();
    // scores (1/sqrt 2, 0): softmax weight on e_1 is 1/(1+exp(-1/sqrt 2))
    let w = sigmoid(1.0 / 2f64.sqrt());
    assert!((c.at(0, 0) - 0.6698).abs() < 1e-4 && (c.at(0, 1) - 0.3302).abs() < 1e-4);
    assert!((c.at(0, 0) - w).abs() < 1e-12);
    assert!((c.at(1, 1) - w).abs() < 1e-12);
}

#[test]
fn attention_degenerate_lists() {
    let mut params = Params::new();
    let mut k = 0u64;
    let enc = ContextEncoder::Attention(AttentionEncoder::register(
        &mut params,
        3,
        1,
        2,
        &mut |r, c| {
            k += 1;
            random_matrix(r, c, k)
        },
    ));
    let one = Tensor::row(vec![0.3, -0.2, 0.9]);
    assert_eq!(enc.apply(&params, &one).unwrap().values(), one.values());
    let same = Tensor::from_fn(4, 3, |_, j| [0.3, -0.2, 0.9][j]);
    let c = enc.apply(&params, &same).unwrap();
    for (got, want) in c.values().iter().zip(same.values()) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn aggregation_is_the_mean() {
    let params = Params::new();
    let c = ContextEncoder::Aggregation
        .apply(&params, &identity(2))
        .unwrap();
    assert_eq!(c.values(), [0.5, 0.5, 0.5, 0.5]);
    let one = Tensor::row(vec![1.5, -2.0]);
    assert_eq!(
        ContextEncoder::Aggregation.apply(&params, &one).unwrap(),
        one
    );
}

#[test]
fn lstm_with_zero_weights_outputs_zero() {
    let mut params = Params::new();
    let enc =
        ContextEncoder::Sequence(SequenceEncoder::register(&mut params, 3, 4, &mut |r, c| {
            Tensor::zeros(vec![r, c])
        }));
    let c = enc.apply(&params, &random_matrix(5, 3, 9)).unwrap();
    assert_eq!(c.shape(), [5, 8]);
    assert!(c.values().iter().all(|&v| v == 0.0));
}

/// One LSTM step from a zero state, written out per unit.
fn single_step(x: &[f64], w_x: &Tensor, b: &Tensor, hidden: usize) -> Vec<f64> {
    let pre =
        |col: usize| b.values()[col] + (0..x.len()).map(|r| x[r] * w_x.at(r, col)).sum::<f64>();
    (0..hidden)
        .map(|u| {
            let i = sigmoid(pre(u));
            let o = sigmoid(pre(2 * hidden + u));
            let g = pre(3 * hidden + u).tanh();
            o * (i * g).tanh()
        })
        .collect()
}

#[test]
fn lstm_single_step_hand_case() {
    let mut params = Params::new();
    let mut k = 0u64;
    let seq = SequenceEncoder::register(&mut params, 2, 2, &mut |r, c| {
        k += 1;
        random_matrix(r, c, 100 + k)
    });
    let x = [0.4, -0.7];
    let c = ContextEncoder::Sequence(seq)
        .apply(&params, &Tensor::row(x.to_vec()))
        .unwrap();
    let fwd = single_step(
        &x,
        params.get(seq.forward.w_x),
        params.get(seq.forward.b),
        2,
    );
    let bwd = single_step(
        &x,
        params.get(seq.backward.w_x),
        params.get(seq.backward.b),
        2,
    );
    let expected: Vec<f64> = fwd.into_iter().chain(bwd).collect();
    for (got, want) in c.values().iter().zip(&expected) {
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }
}

fn reversed(e: &Tensor) -> Tensor {
    let n = e.rows();
    Tensor::from_fn(n, e.cols(), |i, j| e.at(n - 1 - i, j))
}

fn swap_halves(row: &[f64]) -> Vec<f64> {
    let h = row.len() / 2;
    row[h..].iter().chain(&row[..h]).copied().collect()
}

fn sequence_params(tied: bool) -> (Params, SequenceEncoder) {
    let mut params = Params::new();
    let mut k = 0u64;
    let seq = SequenceEncoder::register(&mut params, 3, 4, &mut |r, c| {
        k += 1;
        random_matrix(r, c, 200 + k)
    });
    if tied {
        for (f, b) in [
            (seq.forward.w_x, seq.backward.w_x),
            (seq.forward.w_h, seq.backward.w_h),
            (seq.forward.b, seq.backward.b),
        ] {
            *params.get_mut(b) = params.get(f).clone();
        }
    }
    (params, seq)
}

#[test]
fn mirror_property_with_shared_direction_weights() {
    let (params, seq) = sequence_params(true);
    let enc = ContextEncoder::Sequence(seq);
    for n in 1..7 {
        let e = random_matrix(n, 3, n as u64);
        let c = enc.apply(&params, &e).unwrap();
        let c_rev = enc.apply(&params, &reversed(&e)).unwrap();
        for i in 0..n {
            assert_eq!(
                c_rev.row_slice(i),
                swap_halves(c.row_slice(n - 1 - i)).as_slice(),
                "n={n} i={i}"
            );
        }
    }
}

#[test]
fn mirror_property_with_swapped_directions() {
    let (params, seq) = sequence_params(false);
    let swapped = SequenceEncoder {
        forward: seq.backward,
        backward: seq.forward,
        hidden: seq.hidden,
    };
    for n in 1..7 {
        let e = random_matrix(n, 3, 50 + n as u64);
        let c = ContextEncoder::Sequence(seq).apply(&params, &e).unwrap();
        let c_rev = ContextEncoder::Sequence(swapped)
            .apply(&params, &reversed(&e))
            .unwrap();
        for i in 0..n {
            assert_eq!(
                c_rev.row_slice(i),
                swap_halves(c.row_slice(n - 1 - i)).as_slice()
            );
        }
    }
}

#[test]
fn sequence_encoder_is_order_sensitive() {
    let (params, seq) = sequence_params(false);
    let e = random_matrix(4, 3, 7);
    let c = ContextEncoder::Sequence(seq).apply(&params, &e).unwrap();
    let c_rev = ContextEncoder::Sequence(seq)
        .apply(&params, &reversed(&e))
        .unwrap();
    assert_ne!(c_rev.row_slice(0), c.row_slice(3));
}

#[test]
fn scoring_head_hand_case() {
    let mut params = Params::new();
    let head = ScoringHead::register(
        &mut params,
        2,
        2,
        true,
        HeadActivation::Tanh,
        &mut |r, c| Tensor::zeros(vec![r, c]),
    );
    *params.get_mut(head.w1) = Tensor::matrix(2, 2, vec![0.5, -1.0, 2.0, 0.25]).unwrap();
    *params.get_mut(head.b1) = Tensor::row(vec![0.1, -0.2]);
    *params.get_mut(head.w2) = Tensor::matrix(2, 1, vec![1.5, -0.75]).unwrap();
    *params.get_mut(head.b2.unwrap()) = Tensor::scalar(0.3);
    let e = Tensor::matrix(2, 1, vec![1.0, -0.5]).unwrap();
    let c = Tensor::matrix(2, 1, vec![0.2, 0.8]).unwrap();
    let got = head.apply(&params, &e, &c).unwrap();
    // r_1 = (1, 0.2): z = (0.5 + 0.4 + 0.1, -1 + 0.05 - 0.2) = (1.0, -1.15)
    // r_2 = (-0.5, 0.8): z = (-0.25 + 1.6 + 0.1, 0.5 + 0.2 - 0.2) = (1.45, 0.5)
    let o1 = 1.5 * 1.0f64.tanh() - 0.75 * (-1.15f64).tanh() + 0.3;
    let o2 = 1.5 * 1.45f64.tanh() - 0.75 * 0.5f64.tanh() + 0.3;
    assert!(
        (got[0] - o1).abs() < 1e-10 && (got[1] - o2).abs() < 1e-10,
        "{got:?}"
    );
}

#[test]
fn scoring_head_silu_hand_case() {
    let mut params = Params::new();
    let head = ScoringHead::register(
        &mut params,
        2,
        2,
        false,
        HeadActivation::Silu,
        &mut |r, c| Tensor::zeros(vec![r, c]),
    );
    assert!(head.b2.is_none());
    *params.get_mut(head.w1) = Tensor::matrix(2, 2, vec![0.5, -1.0, 2.0, 0.25]).unwrap();
    *params.get_mut(head.b1) = Tensor::row(vec![0.1, -0.2]);
    *params.get_mut(head.w2) = Tensor::matrix(2, 1, vec![1.5, -0.75]).unwrap();
    let e = Tensor::matrix(2, 1, vec![1.0, -0.5]).unwrap();
    let c = Tensor::matrix(2, 1, vec![0.2, 0.8]).unwrap();
    let got = head.apply(&params, &e, &c).unwrap();
    let silu = |x: f64| x * sigmoid(x);
    let o1 = 1.5 * silu(1.0) - 0.75 * silu(-1.15);
    let o2 = 1.5 * silu(1.45) - 0.75 * silu(0.5);
    assert!(
        (got[0] - o1).abs() < 1e-10 && (got[1] - o2).abs() < 1e-10,
        "{got:?}"
    );
}

#[test]
fn scoring_head_zero_weights_give_the_bias() {
    let mut params = Params::new();
    let head = ScoringHead::register(
        &mut params,
        4,
        3,
        true,
        HeadActivation::Silu,
        &mut |r, c| Tensor::zeros(vec![r, c]),
    );
    *params.get_mut(head.b2.unwrap()) = Tensor::scalar(-0.7);
    let got = head
        .apply(&params, &random_matrix(3, 2, 1), &random_matrix(3, 2, 2))
        .unwrap();
    assert_eq!(got, [-0.7; 3]);
    assert!(matches!(
        head.apply(&params, &random_matrix(3, 2, 1), &random_matrix(2, 2, 2)),
        Err(RankerError::Tensor(_))
    ));
}

fn world(n: usize) -> Dataset {
    let cfg = WorldConfig {
        n_intents: 8,
        n_skills: 24,
        utterance_vocab: 40,
        ..Default::default()
    };
    let ontology = generate_ontology(&cfg, 4).unwrap();
    sample_dataset(&ontology, &cfg, n, 5).unwrap()
}

fn spec(encoder: EncoderKind) -> VariantSpec {
    VariantSpec {
        encoder,
        loss: LossKind::Mce,
        augmented: false,
    }
}

#[test]
fn embeddings_follow_the_contract() {
    let data = world(20);
    let vocab = Vocab::from_dataset(&data, None).unwrap();
    let dims = Dims::default();
    let zero = Ranker::with_init(
        spec(EncoderKind::Aggregation),
        dims,
        vocab.clone(),
        0,
        &mut |r, c| Tensor::zeros(vec![r, c]),
    );
    let inst = &data.instances[0];
    let e = zero
        .embed(&vocab.encode(&inst.hypotheses).unwrap())
        .unwrap();
    assert!(e.values().iter().all(|&v| v == 0.0));

    let model = Ranker::new(spec(EncoderKind::Aggregation), dims, vocab.clone(), 3);
    let mut twice = inst.hypotheses.clone();
    twice.push(inst.hypotheses[0].clone());
    let e = model.embed(&vocab.encode(&twice).unwrap()).unwrap();
    assert_eq!(e.row_slice(0), e.row_slice(twice.len() - 1));

    for len in [3, 12] {
        let mut h = inst.hypotheses.clone();
        for x in &mut h {
            x.utterance = (0..len as u32).collect();
        }
        let e = model.embed(&vocab.encode(&h).unwrap()).unwrap();
        assert_eq!(e.shape(), [h.len(), dims.d_e]);
    }
    let mut h = inst.hypotheses.clone();
    h[0].utterance = vec![vocab.token_count() as u32];
    assert!(matches!(
        vocab.encode(&h),
        Err(RankerError::TokenOutOfRange { .. })
    ));
}

fn wide_instance(data: &Dataset) -> RoutingInstance {
    let inst = data.instances.iter().max_by_key(|i| i.len()).unwrap();
    augment_instance(
        inst,
        &data.skill_space,
        &AugmentConfig {
            m: 3,
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn attention_and_aggregation_are_permutation_equivariant() {
    let data = world(50);
    let vocab = Vocab::from_dataset(&data, None).unwrap();
    let inst = wide_instance(&data);
    let list = vocab.encode(&inst.hypotheses).unwrap();
    let mut rng = seeded(11);
    for encoder in [EncoderKind::Attention, EncoderKind::Aggregation] {
        let model = Ranker::new(spec(encoder), Dims::default(), vocab.clone(), 21);
        let base = model.route_encoded(&list).unwrap();
        let mut worst = 0f64;
        for _ in 0..100 {
            let mut order: Vec<usize> = (0..list.len()).collect();
            order.shuffle(&mut rng);
            let moved = model.route_encoded(&list.permuted(&order)).unwrap();
            for (i, &src) in order.iter().enumerate() {
                worst = worst.max((moved.scores[i] - base.scores[src]).abs());
            }
            assert_eq!(inst.hypotheses[order[moved.top]], inst.hypotheses[base.top]);
        }
        assert!(worst < 1e-9, "{encoder}: {worst}");
    }
}

#[test]
fn routing_index_is_in_range_for_every_variant() {
    let data = world(30);
    let vocab = Vocab::from_dataset(&data, None).unwrap();
    for variant in VariantSpec::grid() {
        let model = Ranker::new(variant, Dims::default(), vocab.clone(), 2);
        for inst in &data.instances {
            let route = model.route(&inst.hypotheses).unwrap();
            assert!(route.top < inst.len());
            assert_eq!(route.scores.len(), inst.len());
        }
        let single = model.route(&data.instances[0].hypotheses[..1]).unwrap();
        assert_eq!(single.top, 0);
    }
}
