//! Dense probability mass functions over non-negative integer supports.
//!
//! Every distribution passed between the model stages is a [`DiscretePmf`]:
//! release counts use [`SupportKind::Count`], release quantities use the
//! 750-gallon lattice where index `g` means `750 * g` gallons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gallons represented by one step of the quantity lattice.
pub const LATTICE_GALLONS: u32 = 750;

/// Normalized pmfs must sum to one within this tolerance.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    /// Index `i` is the count `i`.
    Count,
    /// Index `g` is `750 * g` gallons.
    GallonLattice750,
}

/// A normalized pmf stored densely from index 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretePmf {
    kind: SupportKind,
    masses: Vec<f64>,
}

impl DiscretePmf {
    /// Builds a pmf, rejecting negative or non-finite masses and totals outside `1 ± 1e-9`.
    pub fn new(kind: SupportKind, masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::validation("pmf", "empty support"));
        }
        if let Some((i, m)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !m.is_finite() || **m < 0.0)
        {
            return Err(Error::validation(
                format!("pmf[{i}]"),
                format!("mass {m} is negative or not finite"),
            ));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::validation(
                "pmf",
                format!("masses sum to {total}, expected 1"),
            ));
        }
        Ok(Self { kind, masses })
    }

    pub fn count(masses: Vec<f64>) -> Result<Self> {
        Self::new(SupportKind::Count, masses)
    }

    /// Internal constructor for masses produced by a normalized construction.
    pub(crate) fn from_normalized(kind: SupportKind, masses: Vec<f64>) -> Self {
        debug_assert!(
            (masses.iter().sum::<f64>() - 1.0).abs() <= 1e-6,
            "pmf built from unnormalized masses"
        );
        Self { kind, masses }
    }

    pub fn point_mass(kind: SupportKind, at: usize) -> Self {
        let mut masses = vec![0.0; at + 1];
        masses[at] = 1.0;
        Self { kind, masses }
    }

    /// Probability-weighted sum of pmfs sharing one support kind.
    ///
    /// Weights must be non-negative and sum to one.
    pub fn mixture(components: &[(f64, &DiscretePmf)]) -> Result<Self> {
        let kind = components
            .first()
            .map(|(_, p)| p.kind)
            .ok_or_else(|| Error::validation("mixture", "no components"))?;
        let len = components.iter().map(|(_, p)| p.len()).max().unwrap_or(1);
        let mut masses = vec![0.0; len];
        for (w, p) in components {
            if p.kind != kind {
                return Err(Error::SupportMismatch(kind, p.kind));
            }
            for (acc, m) in masses.iter_mut().zip(&p.masses) {
                *acc += w * m;
            }
        }
        Self::new(kind, masses)
    }

    pub fn kind(&self) -> SupportKind {
        self.kind
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Mass at `index`, zero beyond the stored support.
    pub fn mass(&self, index: usize) -> f64 {
        self.masses.get(index).copied().unwrap_or(0.0)
    }

    /// Number of stored indices (largest representable index + 1).
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Largest index carrying non-zero mass.
    pub fn max_support(&self) -> usize {
        self.masses.iter().rposition(|m| *m > 0.0).unwrap_or(0)
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| i as f64 * m)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let d = i as f64 - mean;
                d * d * m
            })
            .sum()
    }

    /// P(X ≤ index).
    pub fn cdf(&self, index: usize) -> f64 {
        self.masses.iter().take(index + 1).sum()
    }
}
