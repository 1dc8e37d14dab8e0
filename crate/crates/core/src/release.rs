//! Number of tank cars releasing lading.
//!
//! Mainline incidents go through per-position derailment probabilities and a
//! Poisson-Binomial count. Arrival/departure and yard switching incidents go
//! through the count of derailed tank cars followed by binomial thinning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::{DiscretePmf, SupportKind};
use crate::scenario::{Consist, SwitchingApproach, MAX_SWITCHED_TANK_BLOCK};
use crate::severity::{ConditionalSeverity, DiscretizedGe};

/// Non-tank cars placed ahead of the tank block when it is switched en masse.
pub const EN_MASSE_BUFFER_CARS: usize = 19;

/// Per-position derailment and release probabilities for one mainline incident.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionProfile {
    /// `PD(j)` at index `j - 1`.
    pub derail_prob: Vec<f64>,
    /// `R(j)` at index `j - 1`; zero at non-tank positions.
    pub release_prob: Vec<f64>,
}

/// `PD(j) = Σ_{k≤j} pod(k) · P(X ≥ j - k + 1 | k)`, returned at index `j - 1`.
pub fn position_derail_probs(pod: &DiscretePmf, severity: &ConditionalSeverity) -> Vec<f64> {
    let l = severity.length();
    (1..=l)
        .map(|j| {
            let pd: f64 = (1..=j)
                .map(|k| pod.mass(k) * severity.survival(k, j - k + 1))
                .sum();
            pd.min(1.0)
        })
        .collect()
}

pub fn position_profile(
    pod: &DiscretePmf,
    severity: &ConditionalSeverity,
    consist: &Consist,
    cpr: f64,
) -> PositionProfile {
    let derail_prob = position_derail_probs(pod, severity);
    let release_prob = derail_prob
        .iter()
        .zip(consist.flags())
        .map(|(pd, tank)| if *tank { pd * cpr } else { 0.0 })
        .collect();
    PositionProfile {
        derail_prob,
        release_prob,
    }
}

/// Exact pmf of a sum of independent Bernoulli(`probs[i]`) variables.
pub fn poisson_binomial(probs: &[f64]) -> DiscretePmf {
    let mut dp = vec![0.0; probs.len() + 1];
    dp[0] = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        let q = 1.0 - p;
        for n in (1..=i + 1).rev() {
            dp[n] = dp[n] * q + dp[n - 1] * p;
        }
        dp[0] *= q;
    }
    DiscretePmf::from_normalized(SupportKind::Count, dp)
}

/// Released-tank count for a mainline incident; support `0..=TT`.
pub fn release_count_pmf_mainline(profile: &PositionProfile, consist: &Consist) -> DiscretePmf {
    let tank_probs: Vec<f64> = profile
        .release_prob
        .iter()
        .zip(consist.flags())
        .filter(|(_, tank)| **tank)
        .map(|(r, _)| *r)
        .collect();
    poisson_binomial(&tank_probs)
}

/// Derailed-tank count when the derailed block is positions `k..k+x-1`.
pub fn ad_tank_derail_pmf(
    pod: &DiscretePmf,
    severity: &ConditionalSeverity,
    consist: &Consist,
) -> DiscretePmf {
    let l = severity.length();
    let mut prefix = vec![0usize; l + 1];
    for j in 1..=l {
        prefix[j] = prefix[j - 1] + usize::from(consist.is_tank(j));
    }
    let mut masses = vec![0.0; consist.tank_count() + 1];
    for k in 1..=l {
        let w = pod.mass(k);
        if w == 0.0 {
            continue;
        }
        for (i, p) in severity.row(k).iter().enumerate() {
            let end = k + i;
            masses[prefix[end] - prefix[k - 1]] += w * p;
        }
    }
    DiscretePmf::from_normalized(SupportKind::Count, masses)
}

/// Binomial thinning with success probability `factor * cpr`.
pub fn thin_release_pmf(derail: &DiscretePmf, cpr: f64, factor: f64) -> DiscretePmf {
    let q = factor * cpr;
    let n_max = derail.len() - 1;
    let mut out = vec![0.0; n_max + 1];
    let mut row = vec![1.0];
    for n in 0..=n_max {
        let w = derail.mass(n);
        if w != 0.0 {
            for (o, b) in out.iter_mut().zip(&row) {
                *o += w * b;
            }
        }
        // Binomial(n + 1, q) from Binomial(n, q).
        let mut next = vec![0.0; row.len() + 1];
        for (r, b) in row.iter().enumerate() {
            next[r] += b * (1.0 - q);
            next[r + 1] += b * q;
        }
        row = next;
    }
    DiscretePmf::from_normalized(SupportKind::Count, out)
}

/// Uniform first-car-of-derailment pmf on `1..=tcc`.
pub fn fcd_pmf(tcc: usize) -> DiscretePmf {
    let mut masses = vec![1.0 / tcc as f64; tcc + 1];
    masses[0] = 0.0;
    DiscretePmf::from_normalized(SupportKind::Count, masses)
}

/// The cut of cars considered in a yard switching incident.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchCut {
    pub approach: SwitchingApproach,
    pub tank_count: usize,
}

impl SwitchCut {
    pub fn new(approach: SwitchingApproach, tank_count: usize) -> Result<Self> {
        if tank_count == 0 || tank_count > MAX_SWITCHED_TANK_BLOCK {
            return Err(Error::validation(
                "tank_count",
                format!("switched tank blocks must hold 1..={MAX_SWITCHED_TANK_BLOCK} cars"),
            ));
        }
        Ok(Self {
            approach,
            tank_count,
        })
    }

    pub fn buffer_cars(&self) -> usize {
        match self.approach {
            SwitchingApproach::SwitchedAlone => 0,
            SwitchingApproach::SwitchedEnMasse => EN_MASSE_BUFFER_CARS,
        }
    }

    /// TCC: cars in the switched cut.
    pub fn total_considered(&self) -> usize {
        self.tank_count + self.buffer_cars()
    }
}

/// Derailed-tank count for a yard switching incident.
pub fn switch_tank_derail_pmf(cut: &SwitchCut, ge: &DiscretizedGe) -> DiscretePmf {
    let severity = ConditionalSeverity::yard(ge, cut.total_considered());
    match cut.approach {
        SwitchingApproach::SwitchedAlone => switched_alone(cut.tank_count, &severity),
        SwitchingApproach::SwitchedEnMasse => switched_behind_buffer(
            cut.tank_count,
            cut.buffer_cars(),
            &severity,
            ge.max_cars(),
        ),
    }
}

fn with_zero_complement(mut masses: Vec<f64>) -> DiscretePmf {
    let positive: f64 = masses[1..].iter().sum();
    masses[0] = (1.0 - positive).max(0.0);
    DiscretePmf::from_normalized(SupportKind::Count, masses)
}

/// The tank block is the whole cut: TCC = TT. `severity` is conditioned on
/// the first derailed car within a cut of TCC cars.
pub fn switched_alone(tt: usize, severity: &ConditionalSeverity) -> DiscretePmf {
    let tcc = tt;
    assert_eq!(severity.length(), tcc, "severity must cover the switched cut");
    let mut masses = vec![0.0; tt + 1];
    for (x, m) in masses.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        for k in 1..=(tcc - x + 1) {
            acc += severity.prob(k, x);
        }
        // FCD is uniform: 1 / TCC per position.
        *m = acc / tcc as f64;
    }
    with_zero_complement(masses)
}

/// The tank block follows `buffer` non-tank cars: TCC = TT + buffer.
///
/// A first derailed car at `k ≤ buffer` yields exactly `x` tanks only when
/// `buffer + 1 - k + x` cars derail, which the severity cap allows for
/// `k ≥ buffer + 1 + x - max_cars`.
pub fn switched_behind_buffer(
    tt: usize,
    buffer: usize,
    severity: &ConditionalSeverity,
    max_cars: usize,
) -> DiscretePmf {
    let tcc = tt + buffer;
    assert_eq!(severity.length(), tcc, "severity must cover the switched cut");
    let mut masses = vec![0.0; tt + 1];
    for (x, m) in masses.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        let k_lo = (buffer + 1 + x).saturating_sub(max_cars).max(1);
        for k in k_lo..=buffer {
            acc += severity.prob(k, buffer + 1 - k + x);
        }
        for k in (buffer + 1)..=(tcc - x + 1) {
            acc += severity.prob(k, x);
        }
        *m = acc / tcc as f64;
    }
    with_zero_complement(masses)
}

/// Per-shipment pmf: mass at `x ≥ 1` is `Σ a_i · p_i(x)`, mass at 0 is the complement.
pub fn combine_per_shipment(branches: &[(f64, &DiscretePmf)]) -> Result<DiscretePmf> {
    let total: f64 = branches.iter().map(|(a, _)| a).sum();
    if total > 1.0 {
        return Err(Error::ProbabilityOverflow {
            what: "combined per-shipment derailment probability".into(),
            value: total,
        });
    }
    let mut kind = SupportKind::Count;
    let len = branches.iter().map(|(_, p)| p.len()).max().unwrap_or(1);
    let mut masses = vec![0.0; len.max(1)];
    for (i, (a, p)) in branches.iter().enumerate() {
        if i == 0 {
            kind = p.kind();
        } else if p.kind() != kind {
            return Err(Error::SupportMismatch(kind, p.kind()));
        }
        if !(0.0..=1.0).contains(a) {
            return Err(Error::validation("derailment_prob", "must lie in [0, 1]"));
        }
        for (x, m) in p.masses().iter().enumerate().skip(1) {
            masses[x] += a * m;
        }
    }
    let positive: f64 = masses[1..].iter().sum();
    masses[0] = (1.0 - positive).max(0.0);
    Ok(DiscretePmf::from_normalized(kind, masses))
}

pub fn per_shipment_release_pmf(conditional: &DiscretePmf, derailment_prob: f64) -> Result<DiscretePmf> {
    combine_per_shipment(&[(derailment_prob, conditional)])
}
