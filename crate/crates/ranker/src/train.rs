use rand::seq::SliceRandom;
use routelab_autodiff::{AdamState, Tape};
use routelab_core::rng::{derive_seed, seeded};
use routelab_core::Dataset;

use crate::config::{TrainConfig, VariantSpec};
use crate::error::RankerError;
use crate::model::Ranker;
use crate::vocab::{EncodedInstance, Vocab};

type Result<T> = std::result::Result<T, RankerError>;

const SHUFFLE_STREAM: u64 = 0x5_0000;
const HYPOTHESIS_STREAM: u64 = 0x6_0000;

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Ranker,
    /// Mean per-instance training loss of each epoch, measured during the
    /// epoch.
    pub epoch_losses: Vec<f64>,
}

fn check(config: &TrainConfig) -> Result<()> {
    if config.batch_size == 0 {
        return Err(RankerError::Config("batch_size must be positive".into()));
    }
    let d = &config.dims;
    let widths = [
        d.d_tok, d.d_int, d.d_slot, d.d_skill, d.d_ctx, d.d_e, d.d_h, d.d_f, d.heads, d.d_k,
    ];
    if widths.contains(&0) {
        return Err(RankerError::Config(
            "all model widths must be positive".into(),
        ));
    }
    Ok(())
}

/// Trains `spec` on `data` with mini-batch Adam. Deterministic under
/// (spec, data, config).
pub fn train(spec: VariantSpec, data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    check(config)?;
    if data.is_empty() {
        return Err(RankerError::EmptyDataset);
    }
    let vocab = Vocab::from_dataset(data, config.token_vocab)?;
    let encoded = data
        .instances
        .iter()
        .map(|inst| vocab.encode_instance(inst))
        .collect::<Result<Vec<_>>>()?;
    let model = Ranker::new(spec, config.dims, vocab, config.seed);
    train_encoded(model, &encoded, config)
}

/// Continues training `model` on pre-encoded instances.
pub fn train_encoded(
    mut model: Ranker,
    data: &[EncodedInstance],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    check(config)?;
    if data.is_empty() {
        return Err(RankerError::EmptyDataset);
    }
    let mut adam = AdamState::new(model.params(), config.adam);
    let mut grads = model.params().zero_gradients();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = seeded(derive_seed(config.seed, SHUFFLE_STREAM + epoch as u64));
        order.shuffle(&mut rng);
        let mut hyp_rng = seeded(derive_seed(config.seed, HYPOTHESIS_STREAM + epoch as u64));
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.zero();
            let weight = 1.0 / batch.len() as f64;
            for &i in batch {
                let inst = &data[i];
                let shuffled;
                let (list, gold) = if config.shuffle_hypotheses {
                    let mut perm: Vec<usize> = (0..inst.list.len()).collect();
                    perm.shuffle(&mut hyp_rng);
                    let gold = perm
                        .iter()
                        .position(|&p| p == inst.gold)
                        .expect("gold kept");
                    shuffled = inst.list.permuted(&perm);
                    (&shuffled, gold)
                } else {
                    (&inst.list, inst.gold)
                };
                let mut tape = Tape::new();
                let loss = model.loss(&mut tape, list, gold)?;
                let value = tape.value(loss).values()[0];
                if !value.is_finite() {
                    return Err(RankerError::Diverged { epoch });
                }
                total += value;
                let scaled = tape.scale(loss, weight);
                tape.backward_into(scaled, &mut grads)?;
            }
            adam.step(model.params_mut(), &grads)?;
        }
        epoch_losses.push(total / data.len() as f64);
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}

/// Fraction of instances whose top-ranked hypothesis is the gold one.
pub fn training_accuracy(model: &Ranker, data: &[EncodedInstance]) -> Result<f64> {
    if data.is_empty() {
        return Err(RankerError::EmptyDataset);
    }
    let mut hits = 0usize;
    for inst in data {
        if model.route_encoded(&inst.list)?.top == inst.gold {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}
