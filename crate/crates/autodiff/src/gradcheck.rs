use crate::{Gradients, Params, Tensor};

/// Central-difference estimate `(f(p + h e) - f(p - h e)) / 2h` for every
/// scalar coordinate of every parameter.
///
/// This is an oracle: it only evaluates `f` and never looks at a tape.
pub fn finite_difference_gradient(
    f: impl Fn(&Params) -> f64,
    params: &Params,
    h: f64,
) -> Gradients {
    assert!(h > 0.0, "step size must be positive");
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(params.len());
    for id in params.ids() {
        let n = params.get(id).len();
        let mut grad = Tensor::zeros(params.get(id).shape().to_vec());
        for i in 0..n {
            let original = probe.get(id).values()[i];
            probe.get_mut(id).values_mut()[i] = original + h;
            let plus = f(&probe);
            probe.get_mut(id).values_mut()[i] = original - h;
            let minus = f(&probe);
            probe.get_mut(id).values_mut()[i] = original;
            grad.values_mut()[i] = (plus - minus) / (2.0 * h);
        }
        out.push(grad);
    }
    Gradients::from_tensors(out)
}

/// `|a - b| / max(|a|, |b|, 1e-8)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Largest [`relative_error`] over all coordinates of two gradient sets.
pub fn max_relative_error(a: &Gradients, b: &Gradients) -> f64 {
    a.tensors()
        .iter()
        .zip(b.tensors())
        .flat_map(|(x, y)| x.values().iter().zip(y.values()))
        .map(|(&x, &y)| relative_error(x, y))
        .fold(0.0, f64::max)
}
