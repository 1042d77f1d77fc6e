use routelab_core::{Dataset, Hypothesis};
use routelab_ranker::Ranker;

use crate::error::BenchError;

/// Anything that picks one hypothesis out of a list.
pub trait Router {
    fn route(&self, hypotheses: &[Hypothesis]) -> Result<usize, BenchError>;
}

impl Router for Ranker {
    fn route(&self, hypotheses: &[Hypothesis]) -> Result<usize, BenchError> {
        Ok(Ranker::route(self, hypotheses)?.top)
    }
}

impl<R: Router + ?Sized> Router for &R {
    fn route(&self, hypotheses: &[Hypothesis]) -> Result<usize, BenchError> {
        (**self).route(hypotheses)
    }
}

impl<R: Router + ?Sized> Router for Box<R> {
    fn route(&self, hypotheses: &[Hypothesis]) -> Result<usize, BenchError> {
        (**self).route(hypotheses)
    }
}

/// Fraction of instances whose routed hypothesis is the golden one.
pub fn accuracy(router: &impl Router, data: &Dataset) -> Result<f64, BenchError> {
    if data.is_empty() {
        return Err(BenchError::EmptyDataset);
    }
    let mut correct = 0usize;
    for inst in &data.instances {
        let top = router.route(&inst.hypotheses)?;
        if top >= inst.len() {
            return Err(BenchError::RouteOutOfRange {
                index: top,
                len: inst.len(),
            });
        }
        correct += usize::from(top == inst.gold_index);
    }
    Ok(correct as f64 / data.len() as f64)
}
