use rand_distr::{Distribution, Exp};

use crate::policy::ClassConfig;
use crate::rng::{self, Stream, StreamKind};

/// Lazily drawn per-class inter-arrival and service-timer sequences. Two
/// paths built from the same (seed, replication) produce identical draws.
#[derive(Debug, Clone)]
pub struct SamplePath {
    arrivals: Vec<Option<(Stream, Exp<f64>)>>,
    services: Vec<(Stream, Exp<f64>)>,
}

impl SamplePath {
    pub fn new(classes: &[ClassConfig], seed: u64, replication: u64) -> Self {
        let arrivals = classes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (c.lambda > 0.0).then(|| {
                    (
                        rng::stream(seed, replication, i as u64, StreamKind::Arrival),
                        Exp::new(c.lambda).expect("validated rate"),
                    )
                })
            })
            .collect();
        let services = classes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (
                    rng::stream(seed, replication, i as u64, StreamKind::Service),
                    Exp::new(c.mu).expect("validated rate"),
                )
            })
            .collect();
        Self { arrivals, services }
    }

    /// Next inter-arrival gap of `class`; infinite when the class never arrives.
    pub fn interarrival(&mut self, class: usize) -> f64 {
        match &mut self.arrivals[class] {
            Some((rng, d)) => d.sample(rng),
            None => f64::INFINITY,
        }
    }

    /// Next service-timer draw of `class`.
    pub fn service(&mut self, class: usize) -> f64 {
        let (rng, d) = &mut self.services[class];
        d.sample(rng)
    }
}
