use routelab_core::world::{generate_ontology, sample_dataset, WorldConfig};
use routelab_core::Dataset;
use routelab_ranker::checkpoint::{load, save};
use routelab_ranker::{
    train, training_accuracy, Dims, EncoderKind, LossKind, RankerError, TrainConfig, VariantSpec,
    Vocab,
};

fn world(n: usize, seed: u64) -> Dataset {
    let cfg = WorldConfig::default();
    let ontology = generate_ontology(&cfg, 1).unwrap();
    sample_dataset(&ontology, &cfg, n, seed).unwrap()
}

fn spec(encoder: EncoderKind, loss: LossKind) -> VariantSpec {
    VariantSpec {
        encoder,
        loss,
        augmented: false,
    }
}

#[test]
fn training_is_bit_deterministic() {
    let data = world(300, 2);
    let config = TrainConfig {
        epochs: 2,
        batch_size: 32,
        seed: 5,
        ..Default::default()
    };
    let s = spec(EncoderKind::Sequence, LossKind::Bce);
    let a = train(s, &data, &config).unwrap();
    let b = train(s, &data, &config).unwrap();
    assert_eq!(a.model.params().tensors(), b.model.params().tensors());
    assert_eq!(a.epoch_losses, b.epoch_losses);
    let c = train(s, &data, &TrainConfig { seed: 6, ..config }).unwrap();
    assert_ne!(a.model.params().tensors(), c.model.params().tensors());
}

#[test]
fn loss_decreases_on_learnable_data() {
    let data = world(2000, 3);
    for encoder in EncoderKind::ALL {
        for loss in LossKind::ALL {
            let config = TrainConfig {
                epochs: 4,
                batch_size: 64,
                seed: 1,
                ..Default::default()
            };
            let out = train(spec(encoder, loss), &data, &config).unwrap();
            let (first, last) = (out.epoch_losses[0], *out.epoch_losses.last().unwrap());
            assert!(last < first, "{encoder}-{loss}: {:?}", out.epoch_losses);
        }
    }
}

#[test]
fn every_variant_overfits_a_small_dataset() {
    let data = world(32, 11);
    let vocab = Vocab::from_dataset(&data, None).unwrap();
    let encoded: Vec<_> = data
        .instances
        .iter()
        .map(|i| vocab.encode_instance(i).unwrap())
        .collect();
    let adam = routelab_autodiff::AdamConfig {
        lr: 1e-2,
        ..Default::default()
    };
    let config = TrainConfig {
        epochs: 200,
        batch_size: 8,
        seed: 7,
        adam,
        shuffle_hypotheses: false,
        ..Default::default()
    };
    for encoder in EncoderKind::ALL {
        for loss in LossKind::ALL {
            let out = train(spec(encoder, loss), &data, &config).unwrap();
            let acc = training_accuracy(&out.model, &encoded).unwrap();
            assert_eq!(acc, 1.0, "{encoder}-{loss}");
        }
    }
}

#[test]
fn shuffled_hypothesis_order_still_trains() {
    let data = world(400, 4);
    let config = TrainConfig {
        epochs: 3,
        batch_size: 32,
        shuffle_hypotheses: true,
        ..Default::default()
    };
    let out = train(spec(EncoderKind::Sequence, LossKind::Mce), &data, &config).unwrap();
    assert!(out.epoch_losses[2] < out.epoch_losses[0]);
}

#[test]
fn empty_dataset_is_rejected() {
    let mut data = world(3, 1);
    data.instances.clear();
    assert!(matches!(
        train(
            spec(EncoderKind::Attention, LossKind::Bce),
            &data,
            &TrainConfig::default()
        ),
        Err(RankerError::EmptyDataset)
    ));
    let data = world(3, 1);
    let bad = TrainConfig {
        batch_size: 0,
        ..Default::default()
    };
    assert!(matches!(
        train(spec(EncoderKind::Attention, LossKind::Bce), &data, &bad),
        Err(RankerError::Config(_))
    ));
}

#[test]
fn checkpoint_round_trip_preserves_routing() {
    let data = world(200, 6);
    let config = TrainConfig {
        epochs: 1,
        batch_size: 16,
        dims: Dims {
            heads: 3,
            ..Default::default()
        },
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    for variant in VariantSpec::grid().into_iter().step_by(2) {
        let model = train(variant, &data, &config).unwrap().model;
        let path = dir.path().join(variant.key());
        save(&model, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back.spec(), variant);
        assert_eq!(back.params().tensors(), model.params().tensors());
        for inst in data.instances.iter().take(20) {
            assert_eq!(
                back.route(&inst.hypotheses).unwrap(),
                model.route(&inst.hypotheses).unwrap()
            );
        }
    }
    assert!(matches!(
        load(&dir.path().join("absent")),
        Err(RankerError::CheckpointNotFound(_))
    ));
}
