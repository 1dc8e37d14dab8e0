//! Samplers for one incident. Written against the raw model parameters only.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::Beta;

use crate::scenario::{QuantityTable, TrainConfig};
use crate::severity::{BetaParams, GeParams, LengthZ, MainlineZ};

/// Position of the first derailed car: `ceil(u · L)` with `u ~ Beta`.
pub(crate) struct PodSampler {
    beta: Beta<f64>,
    length: usize,
}

impl PodSampler {
    pub(crate) fn new(params: BetaParams, length: usize) -> Self {
        Self {
            beta: Beta::new(params.alpha, params.beta).expect("validated beta parameters"),
            length,
        }
    }

    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = self.beta.sample(rng);
        ((u * self.length as f64).ceil() as usize).clamp(1, self.length)
    }
}

/// Cars derailed from a truncated geometric law with stop probability `1 / (1 + e^-z)`.
#[derive(Clone, Copy)]
pub(crate) enum GeometricSeverity<'a> {
    Mainline {
        coef: &'a MainlineZ,
        train: &'a TrainConfig,
        speed: f64,
    },
    Length {
        coef: &'a LengthZ,
        length: usize,
    },
}

impl GeometricSeverity<'_> {
    fn stop_probability(&self, remaining: usize) -> f64 {
        let z = match self {
            GeometricSeverity::Mainline { coef, train, speed } => {
                let lut = if train.loaded() && train.train_type() == crate::TrainType::Unit { 1.0 } else { 0.0 };
                let eut = if !train.loaded() && train.train_type() == crate::TrainType::Unit { 1.0 } else { 0.0 };
                coef.intercept
                    + coef.speed * speed
                    + coef.remaining_length * remaining as f64
                    + coef.gross_tons_per_car * train.avg_gross_tons_per_car()
                    + coef.empty_unit * eut
                    + coef.loaded_unit * lut
            }
            GeometricSeverity::Length { coef, length } => coef.intercept + coef.length * *length as f64,
        };
        1.0 / (1.0 + (-z).exp())
    }

    /// Draws by inversion and rejects draws longer than the rest of the train.
    pub(crate) fn sample<R: Rng>(&self, rng: &mut R, remaining: usize) -> usize {
        let p = self.stop_probability(remaining);
        if remaining == 1 || p >= 1.0 {
            return 1;
        }
        let log_cont = (1.0 - p).ln();
        loop {
            let u = 1.0 - rng.gen::<f64>();
            let x = (u.ln() / log_cont).ceil().max(1.0);
            if x <= remaining as f64 {
                return x as usize;
            }
        }
    }
}

/// Yard switching severity: generalized exponential density at the integers.
pub(crate) struct YardSeveritySampler {
    index: WeightedIndex<f64>,
    max_cars: usize,
}

impl YardSeveritySampler {
    pub(crate) fn new(params: GeParams, max_cars: usize) -> Self {
        let f = |x: f64| {
            let e = (-params.rate * x).exp();
            params.shape * params.rate * e * (1.0 - e).powf(params.shape - 1.0)
        };
        let mut weights = Vec::new();
        let mut sum = 0.0;
        let mut x = 1usize;
        loop {
            let w = f(x as f64);
            weights.push(w);
            sum += w;
            if (x >= max_cars && w < 1e-17 * sum) || x >= 200_000 {
                break;
            }
            x += 1;
        }
        Self {
            index: WeightedIndex::new(&weights).expect("positive yard severity weights"),
            max_cars,
        }
    }

    /// Cars derailed, lumped at `min(max_cars, remaining)`.
    pub(crate) fn sample<R: Rng>(&self, rng: &mut R, remaining: usize) -> usize {
        (self.index.sample(rng) + 1).min(self.max_cars).min(remaining)
    }
}

/// Gallons released by one car, as lattice steps.
pub(crate) struct CarQuantitySampler {
    steps: Vec<usize>,
    index: WeightedIndex<f64>,
}

impl CarQuantitySampler {
    pub(crate) fn new(table: &QuantityTable) -> Self {
        let steps = table
            .rows()
            .iter()
            .map(|r| (r.lading_loss_gallons / crate::LATTICE_GALLONS) as usize)
            .collect();
        let weights: Vec<f64> = table.rows().iter().map(|r| r.probability).collect();
        Self {
            steps,
            index: WeightedIndex::new(&weights).expect("valid quantity table"),
        }
    }

    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.steps[self.index.sample(rng)]
    }
}
