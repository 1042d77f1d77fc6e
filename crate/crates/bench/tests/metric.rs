use proptest::prelude::*;
use rand::seq::SliceRandom;
use routelab_bench::{accuracy, BenchError, Router};
use routelab_core::rng::seeded;
use routelab_core::world::{generate_ontology, sample_dataset, WorldConfig};
use routelab_core::{Dataset, Hypothesis};

fn data(n: usize, seed: u64) -> Dataset {
    let cfg = WorldConfig::default();
    let ontology = generate_ontology(&cfg, 1).unwrap();
    sample_dataset(&ontology, &cfg, n, seed).unwrap()
}

/// Scores 1 on the golden hypothesis and 0 elsewhere, given the gold list.
struct Oracle(Vec<Hypothesis>);

impl Router for Oracle {
    fn route(&self, hypotheses: &[Hypothesis]) -> Result<usize, BenchError> {
        let scores: Vec<f64> = hypotheses
            .iter()
            .map(|h| f64::from(u8::from(self.0.contains(h))))
            .collect();
        Ok(scores
            .iter()
            .enumerate()
            .fold(0, |best, (i, s)| if *s > scores[best] { i } else { best }))
    }
}

fn oracle(d: &Dataset) -> Oracle {
    Oracle(
        d.instances
            .iter()
            .map(|i| i.gold().unwrap().clone())
            .collect(),
    )
}

struct First;

impl Router for First {
    fn route(&self, _: &[Hypothesis]) -> Result<usize, BenchError> {
        Ok(0)
    }
}

struct Past;

impl Router for Past {
    fn route(&self, hypotheses: &[Hypothesis]) -> Result<usize, BenchError> {
        Ok(hypotheses.len())
    }
}

#[test]
fn oracle_router_is_perfect() {
    let d = data(300, 4);
    assert_eq!(accuracy(&oracle(&d), &d).unwrap(), 1.0);
}

#[test]
fn three_of_four_correct_is_three_quarters() {
    let mut d = data(4, 5);
    for (i, inst) in d.instances.iter_mut().enumerate() {
        inst.gold_index = if i < 3 { 0 } else { 1 };
    }
    assert_eq!(accuracy(&First, &d).unwrap(), 0.75);
}

#[test]
fn empty_dataset_and_bad_route_are_errors() {
    let mut d = data(3, 6);
    assert!(matches!(
        accuracy(&Past, &d),
        Err(BenchError::RouteOutOfRange { .. })
    ));
    d.instances.clear();
    assert!(matches!(
        accuracy(&First, &d),
        Err(BenchError::EmptyDataset)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn accuracy_ignores_instance_order(seed in any::<u64>()) {
        let d = data(60, 7);
        let mut shuffled = d.clone();
        shuffled.instances.shuffle(&mut seeded(seed));
        prop_assert_eq!(accuracy(&First, &d).unwrap(), accuracy(&First, &shuffled).unwrap());
    }
}
