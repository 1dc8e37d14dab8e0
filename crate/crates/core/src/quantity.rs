//! Total gallons released, on the 750-gallon lattice.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pmf::{DiscretePmf, SupportKind, LATTICE_GALLONS};
use crate::scenario::QuantityTable;

/// Largest release tracked on the lattice; larger totals go to the overflow bucket.
pub const MAX_TRACKED_GALLONS: u32 = 150_000;
/// Lattice index of [`MAX_TRACKED_GALLONS`].
pub const MAX_LATTICE_INDEX: usize = (MAX_TRACKED_GALLONS / LATTICE_GALLONS) as usize;

/// Distribution of total gallons released, with the mass above
/// 150,000 gallons held in a separate overflow bucket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantityPmf {
    /// Index `g` is `750 * g` gallons, `g` in `0..=200`.
    lattice: Vec<f64>,
    overflow: f64,
}

impl QuantityPmf {
    pub fn new(lattice: Vec<f64>, overflow: f64) -> Result<Self> {
        if lattice.len() != MAX_LATTICE_INDEX + 1 {
            return Err(Error::validation(
                "quantity",
                format!("lattice must hold {} points", MAX_LATTICE_INDEX + 1),
            ));
        }
        if lattice.iter().chain([&overflow]).any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::validation("quantity", "masses must be non-negative"));
        }
        let q = Self { lattice, overflow };
        if (q.total() - 1.0).abs() > crate::pmf::NORMALIZATION_TOL {
            return Err(Error::validation(
                "quantity",
                format!("masses sum to {}, expected 1", q.total()),
            ));
        }
        Ok(q)
    }

    pub fn lattice(&self) -> &[f64] {
        &self.lattice
    }

    /// Mass at `750 * index` gallons.
    pub fn mass(&self, index: usize) -> f64 {
        self.lattice.get(index).copied().unwrap_or(0.0)
    }

    pub fn mass_at_gallons(&self, gallons: u32) -> f64 {
        if gallons % LATTICE_GALLONS != 0 {
            return 0.0;
        }
        self.mass((gallons / LATTICE_GALLONS) as usize)
    }

    /// Mass above 150,000 gallons.
    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    pub fn total(&self) -> f64 {
        self.lattice.iter().sum::<f64>() + self.overflow
    }

    pub fn prob_positive(&self) -> f64 {
        self.lattice[1..].iter().sum::<f64>() + self.overflow
    }

    /// Mean gallons with overflow counted at 150,000 (a lower bound when overflow > 0).
    pub fn mean_gallons(&self) -> f64 {
        let lattice: f64 = self
            .lattice
            .iter()
            .enumerate()
            .map(|(g, m)| (g as u32 * LATTICE_GALLONS) as f64 * m)
            .sum();
        lattice + self.overflow * MAX_TRACKED_GALLONS as f64
    }

    /// Smallest lattice quantity whose cdf reaches `p`; `None` when it lies in the overflow.
    pub fn quantile_gallons(&self, p: f64) -> Option<u32> {
        let mut acc = 0.0;
        for (g, m) in self.lattice.iter().enumerate() {
            acc += m;
            if acc >= p {
                return Some(g as u32 * LATTICE_GALLONS);
            }
        }
        None
    }

    /// Flattened pmf where index 201 stands for the overflow bucket.
    pub fn to_extended_pmf(&self) -> DiscretePmf {
        let mut masses = self.lattice.clone();
        masses.push(self.overflow);
        DiscretePmf::from_normalized(SupportKind::GallonLattice750, masses)
    }

    /// Probability-weighted sum; weights must sum to one.
    pub fn mixture(components: &[(f64, &QuantityPmf)]) -> Result<Self> {
        let mut lattice = vec![0.0; MAX_LATTICE_INDEX + 1];
        let mut overflow = 0.0;
        for (w, q) in components {
            for (a, m) in lattice.iter_mut().zip(&q.lattice) {
                *a += w * m;
            }
            overflow += w * q.overflow;
        }
        Self::new(lattice, overflow)
    }
}

/// Caches n-fold convolutions of the per-car release pmf, truncated at 150,000 gallons.
#[derive(Debug, Clone)]
pub struct QuantityConvolver {
    per_car: Vec<(usize, f64)>,
    /// Entry `n` is the n-fold convolution and its overflow mass.
    powers: Vec<(Vec<f64>, f64)>,
}

impl QuantityConvolver {
    pub fn new(table: &QuantityTable) -> Self {
        let per_car = table
            .lattice_pmf()
            .masses()
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(g, m)| (g, *m))
            .collect();
        let mut zero = vec![0.0; MAX_LATTICE_INDEX + 1];
        zero[0] = 1.0;
        Self {
            per_car,
            powers: vec![(zero, 0.0)],
        }
    }

    /// Distribution of the total released by `n` releasing cars.
    pub fn nfold(&mut self, n: usize) -> (&[f64], f64) {
        while self.powers.len() <= n {
            let (prev, prev_overflow) = self.powers.last().unwrap();
            let mut next = vec![0.0; MAX_LATTICE_INDEX + 1];
            // Every car releases at least one lattice step, so overflowed mass stays overflowed.
            let mut overflow = *prev_overflow;
            for (i, a) in prev.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for &(g, b) in &self.per_car {
                    if i + g <= MAX_LATTICE_INDEX {
                        next[i + g] += a * b;
                    } else {
                        overflow += a * b;
                    }
                }
            }
            self.powers.push((next, overflow));
        }
        let (v, o) = &self.powers[n];
        (v, *o)
    }

    /// `P(Q = g) = Σ_n P(N = n) · (n-fold convolution)(g)`.
    pub fn total_quantity(&mut self, count: &DiscretePmf) -> Result<QuantityPmf> {
        if count.kind() != SupportKind::Count {
            return Err(Error::SupportMismatch(SupportKind::Count, count.kind()));
        }
        let mut lattice = vec![0.0; MAX_LATTICE_INDEX + 1];
        let mut overflow = 0.0;
        for (n, w) in count.masses().iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let (conv, o) = self.nfold(n);
            for (a, m) in lattice.iter_mut().zip(conv) {
                *a += w * m;
            }
            overflow += w * o;
        }
        Ok(QuantityPmf { lattice, overflow })
    }
}

pub fn total_quantity_pmf(count: &DiscretePmf, table: &QuantityTable) -> Result<QuantityPmf> {
    QuantityConvolver::new(table).total_quantity(count)
}
