//! List-wise training objectives over a column of scores.

use routelab_autodiff::{Tape, Tensor, Var};

use crate::config::LossKind;
use crate::error::RankerError;

type Result<T> = std::result::Result<T, RankerError>;

fn check_gold(n: usize, gold: usize) -> Result<()> {
    if gold >= n {
        return Err(RankerError::GoldOutOfRange {
            index: gold,
            len: n,
        });
    }
    Ok(())
}

/// `-(1/n) [log s(o_k) + sum_{j != k} log s(-o_j)]` for an n x 1 score
/// column.
pub fn bce_on_tape(tape: &mut Tape<'_>, scores: Var, gold: usize) -> Result<Var> {
    let n = tape.value(scores).rows();
    check_gold(n, gold)?;
    let signs = Tensor::from_fn(n, 1, |i, _| if i == gold { 1.0 } else { -1.0 });
    let y = tape.input(signs);
    let z = tape.mul(scores, y)?;
    let ls = tape.log_sigmoid(z);
    let total = tape.sum(ls);
    Ok(tape.scale(total, -1.0 / n as f64))
}

/// `-o_k + logsumexp(o)` for an n x 1 score column.
pub fn mce_on_tape(tape: &mut Tape<'_>, scores: Var, gold: usize) -> Result<Var> {
    let n = tape.value(scores).rows();
    check_gold(n, gold)?;
    let row = tape.transpose(scores);
    let lse = tape.log_sum_exp_rows(row);
    let o_k = tape.slice_rows(scores, gold, 1)?;
    Ok(tape.sub(lse, o_k)?)
}

pub fn loss_on_tape(kind: LossKind, tape: &mut Tape<'_>, scores: Var, gold: usize) -> Result<Var> {
    match kind {
        LossKind::Bce => bce_on_tape(tape, scores, gold),
        LossKind::Mce => mce_on_tape(tape, scores, gold),
    }
}

fn eval(kind: LossKind, scores: &[f64], gold: usize) -> Result<f64> {
    if scores.is_empty() {
        return Err(RankerError::EmptyHypotheses);
    }
    let mut tape = Tape::new();
    let o = tape.input(Tensor::matrix(scores.len(), 1, scores.to_vec())?);
    let l = loss_on_tape(kind, &mut tape, o, gold)?;
    Ok(tape.value(l).values()[0])
}

pub fn bce_loss(scores: &[f64], gold: usize) -> Result<f64> {
    eval(LossKind::Bce, scores, gold)
}

pub fn mce_loss(scores: &[f64], gold: usize) -> Result<f64> {
    eval(LossKind::Mce, scores, gold)
}
