//! Cross-hypothesis context encoders. Each maps the n x d_e embedding
//! matrix to an n x d_c context matrix.

use routelab_autodiff::{ParamId, Params, Tape, Tensor, Var};

use crate::config::{Dims, EncoderKind};
use crate::error::RankerError;

type Result<T> = std::result::Result<T, RankerError>;

/// Parameter initializer: (rows, cols) -> tensor.
pub type Init<'a> = dyn FnMut(usize, usize) -> Tensor + 'a;

/// Weights of one LSTM direction. Gate column layout is `[i, f, o, g]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmDirection {
    /// d_in x 4h
    pub w_x: ParamId,
    /// h x 4h
    pub w_h: ParamId,
    /// 1 x 4h
    pub b: ParamId,
}

impl LstmDirection {
    fn register(
        params: &mut Params,
        prefix: &str,
        d_in: usize,
        hidden: usize,
        init: &mut Init,
    ) -> Self {
        Self {
            w_x: params.add(format!("{prefix}.w_x"), init(d_in, 4 * hidden)),
            w_h: params.add(format!("{prefix}.w_h"), init(hidden, 4 * hidden)),
            b: params.add(format!("{prefix}.b"), init(1, 4 * hidden)),
        }
    }

    /// Runs the recurrence over the rows of `e` in the given order starting
    /// from a zero state. Returns the hidden states indexed by row.
    fn run<'p>(
        &self,
        tape: &mut Tape<'p>,
        params: &'p Params,
        e: Var,
        hidden: usize,
        order: impl Iterator<Item = usize>,
    ) -> Result<Vec<Option<Var>>> {
        let n = tape.value(e).rows();
        let w_x = tape.param(params, self.w_x);
        let w_h = tape.param(params, self.w_h);
        let b = tape.param(params, self.b);
        let xw = tape.matmul(e, w_x)?;
        let x_proj = tape.add_row(xw, b)?;

        let mut out = vec![None; n];
        let mut state: Option<(Var, Var)> = None;
        for t in order {
            let mut gates = tape.slice_rows(x_proj, t, 1)?;
            if let Some((h_prev, _)) = state {
                let rec = tape.matmul(h_prev, w_h)?;
                gates = tape.add(gates, rec)?;
            }
            let ifo_pre = tape.slice_cols(gates, 0, 3 * hidden)?;
            let ifo = tape.sigmoid(ifo_pre);
            let i = tape.slice_cols(ifo, 0, hidden)?;
            let f = tape.slice_cols(ifo, hidden, hidden)?;
            let o = tape.slice_cols(ifo, 2 * hidden, hidden)?;
            let g_pre = tape.slice_cols(gates, 3 * hidden, hidden)?;
            let g = tape.tanh(g_pre);
            let ig = tape.mul(i, g)?;
            // zero initial state: c_1 = i * g
            let c = match state {
                Some((_, c_prev)) => {
                    let fc = tape.mul(f, c_prev)?;
                    tape.add(fc, ig)?
                }
                None => ig,
            };
            let tc = tape.tanh(c);
            let h = tape.mul(o, tc)?;
            out[t] = Some(h);
            state = Some((h, c));
        }
        Ok(out)
    }
}

/// Bidirectional LSTM; `c_i` is the forward state at `i` followed by the
/// backward state at `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SequenceEncoder {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
    pub hidden: usize,
}

impl SequenceEncoder {
    pub fn register(params: &mut Params, d_in: usize, hidden: usize, init: &mut Init) -> Self {
        Self {
            forward: LstmDirection::register(params, "seq.fwd", d_in, hidden, init),
            backward: LstmDirection::register(params, "seq.bwd", d_in, hidden, init),
            hidden,
        }
    }

    pub fn encode<'p>(&self, tape: &mut Tape<'p>, params: &'p Params, e: Var) -> Result<Var> {
        let n = tape.value(e).rows();
        let fwd = self.forward.run(tape, params, e, self.hidden, 0..n)?;
        let bwd = self
            .backward
            .run(tape, params, e, self.hidden, (0..n).rev())?;
        let mut rows = Vec::with_capacity(n);
        for (f, b) in fwd.into_iter().zip(bwd) {
            let (f, b) = (f.expect("every row visited"), b.expect("every row visited"));
            rows.push(tape.concat_cols(&[f, b])?);
        }
        Ok(tape.concat_rows(&rows)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionHead {
    /// d_e x d_k
    pub w_q: ParamId,
    /// d_e x d_k
    pub w_k: ParamId,
}

/// Scaled dot-product attention with raw embeddings as values. With more
/// than one head the per-head outputs are concatenated and projected back
/// to d_e by `w_o`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionEncoder {
    pub heads: Vec<AttentionHead>,
    /// (heads * d_e) x d_e; absent for a single head.
    pub w_o: Option<ParamId>,
    pub d_k: usize,
}

impl AttentionEncoder {
    pub fn register(
        params: &mut Params,
        d_e: usize,
        heads: usize,
        d_k: usize,
        init: &mut Init,
    ) -> Self {
        let hs = (0..heads)
            .map(|h| AttentionHead {
                w_q: params.add(format!("attn.{h}.w_q"), init(d_e, d_k)),
                w_k: params.add(format!("attn.{h}.w_k"), init(d_e, d_k)),
            })
            .collect();
        let w_o = (heads > 1).then(|| params.add("attn.w_o", init(heads * d_e, d_e)));
        Self {
            heads: hs,
            w_o,
            d_k,
        }
    }

    /// Row-stochastic attention weights of one head (n x n).
    pub fn weights<'p>(
        &self,
        tape: &mut Tape<'p>,
        params: &'p Params,
        e: Var,
        head: usize,
    ) -> Result<Var> {
        let h = self.heads[head];
        let w_q = tape.param(params, h.w_q);
        let w_k = tape.param(params, h.w_k);
        let q = tape.matmul(e, w_q)?;
        let k = tape.matmul(e, w_k)?;
        let kt = tape.transpose(k);
        let s = tape.matmul(q, kt)?;
        let s = tape.scale(s, 1.0 / (self.d_k as f64).sqrt());
        Ok(tape.softmax_rows(s))
    }

    pub fn encode<'p>(&self, tape: &mut Tape<'p>, params: &'p Params, e: Var) -> Result<Var> {
        let mut outs = Vec::with_capacity(self.heads.len());
        for head in 0..self.heads.len() {
            let a = self.weights(tape, params, e, head)?;
            outs.push(tape.matmul(a, e)?);
        }
        match self.w_o {
            None => Ok(outs[0]),
            Some(w_o) => {
                let cat = tape.concat_cols(&outs)?;
                let w = tape.param(params, w_o);
                Ok(tape.matmul(cat, w)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ContextEncoder {
    Sequence(SequenceEncoder),
    Attention(AttentionEncoder),
    /// Mean embedding broadcast to every row; no parameters.
    Aggregation,
}

impl ContextEncoder {
    pub fn register(kind: EncoderKind, params: &mut Params, dims: &Dims, init: &mut Init) -> Self {
        match kind {
            EncoderKind::Sequence => ContextEncoder::Sequence(SequenceEncoder::register(
                params, dims.d_e, dims.d_h, init,
            )),
            EncoderKind::Attention => ContextEncoder::Attention(AttentionEncoder::register(
                params, dims.d_e, dims.heads, dims.d_k, init,
            )),
            EncoderKind::Aggregation => ContextEncoder::Aggregation,
        }
    }

    pub fn kind(&self) -> EncoderKind {
        match self {
            ContextEncoder::Sequence(_) => EncoderKind::Sequence,
            ContextEncoder::Attention(_) => EncoderKind::Attention,
            ContextEncoder::Aggregation => EncoderKind::Aggregation,
        }
    }

    pub fn encode<'p>(&self, tape: &mut Tape<'p>, params: &'p Params, e: Var) -> Result<Var> {
        let n = tape.value(e).rows();
        if n == 0 {
            return Err(RankerError::EmptyHypotheses);
        }
        match self {
            ContextEncoder::Sequence(s) => s.encode(tape, params, e),
            ContextEncoder::Attention(a) => a.encode(tape, params, e),
            ContextEncoder::Aggregation => {
                let mean = tape.mean_rows(e)?;
                Ok(tape.repeat_rows(mean, n)?)
            }
        }
    }

    /// Evaluates the encoder on a plain embedding matrix.
    pub fn apply(&self, params: &Params, e: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.input(e.clone());
        let c = self.encode(&mut tape, params, x)?;
        Ok(tape.value(c).clone())
    }
}
