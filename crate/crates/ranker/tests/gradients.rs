use std::time::Instant;

use rand::Rng;
use routelab_autodiff::{
    finite_difference_gradient, max_relative_error, Gradients, Params, Tape, Tensor,
};
use routelab_core::augment::{augment_dataset, AugmentConfig};
use routelab_core::rng::seeded;
use routelab_core::world::{generate_ontology, sample_dataset, WorldConfig};
use routelab_ranker::{
    Dims, EncodedInstance, EncoderKind, HeadActivation, LossKind, Ranker, VariantSpec, Vocab,
};

fn batch() -> (Vocab, Vec<EncodedInstance>) {
    let cfg = WorldConfig {
        n_intents: 6,
        n_skills: 16,
        utterance_vocab: 25,
        ..Default::default()
    };
    let ontology = generate_ontology(&cfg, 2).unwrap();
    let data = sample_dataset(&ontology, &cfg, 4, 3).unwrap();
    let data = augment_dataset(
        &data,
        &AugmentConfig {
            m: 1,
            seed: 4,
            ..Default::default()
        },
    )
    .unwrap();
    let vocab = Vocab::from_dataset(&data, None).unwrap();
    let encoded = data
        .instances
        .iter()
        .map(|i| vocab.encode_instance(i).unwrap())
        .collect();
    (vocab, encoded)
}

fn small_dims() -> Dims {
    Dims {
        d_tok: 5,
        d_int: 4,
        d_slot: 3,
        d_skill: 5,
        d_ctx: 3,
        d_e: 8,
        d_h: 6,
        d_f: 10,
        heads: 2,
        d_k: 4,
        ..Default::default()
    }
}

fn batch_loss(model: &Ranker, params: &Params, batch: &[EncodedInstance]) -> f64 {
    let mut probe = model.clone();
    *probe.params_mut() = params.clone();
    let mut total = 0.0;
    for inst in batch {
        let mut tape = Tape::new();
        let l = probe.loss(&mut tape, &inst.list, inst.gold).unwrap();
        total += tape.value(l).values()[0];
    }
    total / batch.len() as f64
}

/// Every encoder x loss pair with the default head, plus each pair once
/// more with the tanh head.
fn combos() -> Vec<(EncoderKind, LossKind, HeadActivation)> {
    let mut out = Vec::new();
    for activation in [HeadActivation::Silu, HeadActivation::Tanh] {
        for encoder in EncoderKind::ALL {
            for loss in LossKind::ALL {
                out.push((encoder, loss, activation));
            }
        }
    }
    out
}

fn both_gradients(model: &Ranker, batch: &[EncodedInstance]) -> (Gradients, Gradients) {
    let mut grads = model.params().zero_gradients();
    for inst in batch {
        let mut tape = Tape::new();
        let l = model.loss(&mut tape, &inst.list, inst.gold).unwrap();
        let l = tape.scale(l, 1.0 / batch.len() as f64);
        tape.backward_into(l, &mut grads).unwrap();
    }
    let fd = finite_difference_gradient(|p| batch_loss(model, p, batch), model.params(), 1e-5);
    (grads, fd)
}

fn max_abs_error(a: &Gradients, b: &Gradients) -> f64 {
    a.tensors()
        .iter()
        .zip(b.tensors())
        .flat_map(|(x, y)| x.values().iter().zip(y.values()))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn backward_matches_finite_differences_for_every_variant() {
    let start = Instant::now();
    let (vocab, batch) = batch();
    assert_eq!(batch.len(), 4);
    for (encoder, loss, activation) in combos() {
        let dims = Dims {
            head_activation: activation,
            ..small_dims()
        };
        let spec = VariantSpec {
            encoder,
            loss,
            augmented: false,
        };
        // Wide parameters keep every gradient well above finite-difference
        // roundoff (~1e-11), which the relative metric would otherwise amplify.
        let mut rng = seeded(17);
        let mut init = |r: usize, c: usize| Tensor::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
        let model = Ranker::with_init(spec, dims, vocab.clone(), 17, &mut init);
        let (grads, fd) = both_gradients(&model, &batch);
        let err = max_relative_error(&grads, &fd);
        assert!(
            err < 1e-4,
            "{spec} {activation:?}: max relative error {err:e}"
        );

        let model = Ranker::new(spec, dims, vocab.clone(), 17);
        let (grads, fd) = both_gradients(&model, &batch);
        assert!(max_abs_error(&grads, &fd) < 1e-9, "{spec} at training init");
    }
    assert!(start.elapsed().as_secs() < 60);
}
