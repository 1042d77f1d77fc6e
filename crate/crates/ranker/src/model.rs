use rand::Rng;
use routelab_autodiff::{ParamId, Params, Tape, Tensor, Var};
use routelab_core::rng::{derive_seed, seeded};
use routelab_core::Hypothesis;

use crate::config::{Dims, HeadActivation, LossKind, VariantSpec};
use crate::encoders::{ContextEncoder, Init};
use crate::error::RankerError;
use crate::loss::loss_on_tape;
use crate::vocab::{EncodedList, Vocab};

type Result<T> = std::result::Result<T, RankerError>;

const INIT_STREAM: u64 = 0x1417;
pub const INIT_RANGE: f64 = 0.1;

/// Maps each hypothesis to `tanh(W [tok ++ intent ++ slots ++ skill ++ ctx] + b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Embedder {
    pub token: ParamId,
    pub intent: ParamId,
    pub slot: ParamId,
    pub skill: ParamId,
    /// context_len x d_ctx, no bias.
    pub context: ParamId,
    pub w_joint: ParamId,
    pub b_joint: ParamId,
}

impl Embedder {
    pub fn register(params: &mut Params, vocab: &Vocab, dims: &Dims, init: &mut Init) -> Self {
        Self {
            token: params.add("emb.token", init(vocab.token_count(), dims.d_tok)),
            intent: params.add("emb.intent", init(vocab.intents().len(), dims.d_int)),
            slot: params.add("emb.slot", init(vocab.slot_names().len(), dims.d_slot)),
            skill: params.add("emb.skill", init(vocab.skills().len(), dims.d_skill)),
            context: params.add("emb.context", init(vocab.context_len(), dims.d_ctx)),
            w_joint: params.add("emb.w_joint", init(dims.embedding_input(), dims.d_e)),
            b_joint: params.add("emb.b_joint", init(1, dims.d_e)),
        }
    }

    /// n x d_e embedding matrix.
    pub fn embed<'p>(
        &self,
        tape: &mut Tape<'p>,
        params: &'p Params,
        list: &EncodedList,
    ) -> Result<Var> {
        let n = list.len();
        if n == 0 {
            return Err(RankerError::EmptyHypotheses);
        }
        let table = tape.param(params, self.token);
        let tok = tape.gather_mean(table, vec![list.tokens.clone()])?;
        let tok = tape.repeat_rows(tok, n)?;
        let table = tape.param(params, self.intent);
        let intent = tape.gather_mean(table, list.intents.clone())?;
        let table = tape.param(params, self.slot);
        let slot = tape.gather_mean(table, list.slots.clone())?;
        let table = tape.param(params, self.skill);
        let skill = tape.gather_mean(table, list.skills.clone())?;
        let signals = tape.input(list.context.clone());
        let proj = tape.param(params, self.context);
        let ctx = tape.matmul(signals, proj)?;
        let cat = tape.concat_cols(&[tok, intent, slot, skill, ctx])?;
        let w = tape.param(params, self.w_joint);
        let b = tape.param(params, self.b_joint);
        let z = tape.matmul(cat, w)?;
        let z = tape.add_row(z, b)?;
        Ok(tape.tanh(z))
    }
}

/// `o_i = w2 . act(W1 (e_i ++ c_i) + b1) + b2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScoringHead {
    /// (d_e + d_c) x d_f
    pub w1: ParamId,
    pub b1: ParamId,
    /// d_f x 1
    pub w2: ParamId,
    /// Absent under MCE, which is invariant to a shared score offset.
    pub b2: Option<ParamId>,
    pub activation: HeadActivation,
}

impl ScoringHead {
    pub fn register(
        params: &mut Params,
        d_in: usize,
        d_f: usize,
        output_bias: bool,
        activation: HeadActivation,
        init: &mut Init,
    ) -> Self {
        Self {
            activation,
            w1: params.add("head.w1", init(d_in, d_f)),
            b1: params.add("head.b1", init(1, d_f)),
            w2: params.add("head.w2", init(d_f, 1)),
            b2: output_bias.then(|| params.add("head.b2", init(1, 1))),
        }
    }

    /// n x 1 score column. Fails when `e` and `c` disagree on row count.
    pub fn score<'p>(
        &self,
        tape: &mut Tape<'p>,
        params: &'p Params,
        e: Var,
        c: Var,
    ) -> Result<Var> {
        let r = tape.concat_cols(&[e, c])?;
        let w1 = tape.param(params, self.w1);
        let b1 = tape.param(params, self.b1);
        let w2 = tape.param(params, self.w2);
        let z = tape.matmul(r, w1)?;
        let z = tape.add_row(z, b1)?;
        let h = match self.activation {
            HeadActivation::Silu => {
                let gate = tape.sigmoid(z);
                tape.mul(z, gate)?
            }
            HeadActivation::Tanh => tape.tanh(z),
        };
        let o = tape.matmul(h, w2)?;
        match self.b2 {
            Some(b2) => {
                let b2 = tape.param(params, b2);
                Ok(tape.add_row(o, b2)?)
            }
            None => Ok(o),
        }
    }

    pub fn apply(&self, params: &Params, e: &Tensor, c: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (e, c) = (tape.input(e.clone()), tape.input(c.clone()));
        let o = self.score(&mut tape, params, e, c)?;
        Ok(tape.value(o).values().to_vec())
    }
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            Some(b) if s <= scores[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub scores: Vec<f64>,
    pub top: usize,
}

/// One trained or freshly initialized grid variant.
#[derive(Clone, Debug)]
pub struct Ranker {
    spec: VariantSpec,
    dims: Dims,
    seed: u64,
    vocab: Vocab,
    params: Params,
    embedder: Embedder,
    encoder: ContextEncoder,
    head: ScoringHead,
}

impl Ranker {
    /// Parameters drawn from uniform(-0.1, 0.1) in registration order.
    pub fn new(spec: VariantSpec, dims: Dims, vocab: Vocab, seed: u64) -> Self {
        let mut rng = seeded(derive_seed(seed, INIT_STREAM));
        let mut init = |r: usize, c: usize| {
            Tensor::from_fn(r, c, |_, _| rng.gen_range(-INIT_RANGE..INIT_RANGE))
        };
        Self::with_init(spec, dims, vocab, seed, &mut init)
    }

    pub fn with_init(
        spec: VariantSpec,
        dims: Dims,
        vocab: Vocab,
        seed: u64,
        init: &mut Init,
    ) -> Self {
        let mut params = Params::new();
        let embedder = Embedder::register(&mut params, &vocab, &dims, init);
        let encoder = ContextEncoder::register(spec.encoder, &mut params, &dims, init);
        let d_r = dims.d_e + dims.context_width(spec.encoder);
        let output_bias = spec.loss == LossKind::Bce;
        let head = ScoringHead::register(
            &mut params,
            d_r,
            dims.d_f,
            output_bias,
            dims.head_activation,
            init,
        );
        Self {
            spec,
            dims,
            seed,
            vocab,
            params,
            embedder,
            encoder,
            head,
        }
    }

    pub fn spec(&self) -> VariantSpec {
        self.spec
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn embedder(&self) -> &Embedder {
        &self.embedder
    }

    pub fn encoder(&self) -> &ContextEncoder {
        &self.encoder
    }

    pub fn head(&self) -> &ScoringHead {
        &self.head
    }

    /// n x 1 score column for `list`.
    pub fn forward<'p>(&'p self, tape: &mut Tape<'p>, list: &EncodedList) -> Result<Var> {
        let e = self.embedder.embed(tape, &self.params, list)?;
        let c = self.encoder.encode(tape, &self.params, e)?;
        self.head.score(tape, &self.params, e, c)
    }

    pub fn loss<'p>(&'p self, tape: &mut Tape<'p>, list: &EncodedList, gold: usize) -> Result<Var> {
        let scores = self.forward(tape, list)?;
        loss_on_tape(self.spec.loss, tape, scores, gold)
    }

    pub fn embed(&self, list: &EncodedList) -> Result<Tensor> {
        let mut tape = Tape::new();
        let e = self.embedder.embed(&mut tape, &self.params, list)?;
        Ok(tape.value(e).clone())
    }

    pub fn scores(&self, list: &EncodedList) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let o = self.forward(&mut tape, list)?;
        Ok(tape.value(o).values().to_vec())
    }

    pub fn route_encoded(&self, list: &EncodedList) -> Result<Route> {
        let scores = self.scores(list)?;
        let top = argmax(&scores).ok_or(RankerError::EmptyHypotheses)?;
        Ok(Route { scores, top })
    }

    pub fn route(&self, hypotheses: &[Hypothesis]) -> Result<Route> {
        self.route_encoded(&self.vocab.encode(hypotheses)?)
    }
}
