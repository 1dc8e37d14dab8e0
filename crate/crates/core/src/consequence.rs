//! Casualties as a function of release size and emergency response time.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pmf::LATTICE_GALLONS;
use crate::quantity::{QuantityPmf, MAX_TRACKED_GALLONS};
use crate::scenario::curves::{CURVE_ANCHORS_GALLONS, MAX_RESPONSE_MINUTES};
use crate::scenario::{ConsequenceCurveSet, CurveKey, SampledCurve};

/// One mixed casualty curve per release-size anchor, with zero casualties at
/// zero gallons. Linear in gallons between anchors and in minutes between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CasualtyFunction {
    anchors: BTreeMap<u32, SampledCurve>,
}

/// Averages the per-class curves with the set's location and wind weights.
/// A pre-mixed set is passed through unchanged.
pub fn mix_curves(set: &ConsequenceCurveSet) -> Result<CasualtyFunction> {
    let mut anchors = BTreeMap::new();
    if set.is_premixed() {
        for (key, curve) in set.iter() {
            anchors.insert(key.anchor_gallons, curve.clone());
        }
    } else {
        for anchor in CURVE_ANCHORS_GALLONS {
            let members: Vec<(&CurveKey, &SampledCurve)> =
                set.iter().filter(|(k, _)| k.anchor_gallons == anchor).collect();
            let mut grid: Vec<f64> = members
                .iter()
                .flat_map(|(_, c)| c.times().iter().copied())
                .collect();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let values = grid
                .iter()
                .map(|&t| {
                    members
                        .iter()
                        .map(|(k, c)| {
                            set.mix.location_weight(k.location) * set.mix.wind_weight(k.wind) * c.value_at(t)
                        })
                        .sum()
                })
                .collect();
            anchors.insert(anchor, SampledCurve::new(grid, values)?);
        }
    }
    for anchor in CURVE_ANCHORS_GALLONS {
        if !anchors.contains_key(&anchor) {
            return Err(Error::MissingCurve {
                location: "mixed".into(),
                wind: "mixed".into(),
                anchor_gallons: anchor,
            });
        }
    }
    Ok(CasualtyFunction { anchors })
}

impl CasualtyFunction {
    pub fn anchor_curve(&self, anchor_gallons: u32) -> Option<&SampledCurve> {
        self.anchors.get(&anchor_gallons)
    }

    pub fn anchors(&self) -> impl Iterator<Item = (u32, &SampledCurve)> {
        self.anchors.iter().map(|(a, c)| (*a, c))
    }

    /// `C(x, t)` for `0 ≤ x ≤ 150,000` gallons and `0 ≤ t ≤ 120` minutes.
    pub fn casualties_at(&self, gallons: f64, t: f64) -> Result<f64> {
        if !(0.0..=MAX_RESPONSE_MINUTES).contains(&t) {
            return Err(Error::OutOfRange {
                quantity: "response time (minutes)",
                value: t,
                min: 0.0,
                max: MAX_RESPONSE_MINUTES,
            });
        }
        let max = MAX_TRACKED_GALLONS as f64;
        if !(0.0..=max).contains(&gallons) {
            return Err(Error::OutOfRange {
                quantity: "release size (gallons)",
                value: gallons,
                min: 0.0,
                max,
            });
        }
        let mut lo = (0.0, 0.0);
        for (&anchor, curve) in &self.anchors {
            let a = anchor as f64;
            let v = curve.value_at(t);
            if gallons == a {
                return Ok(v);
            }
            if gallons < a {
                let (a0, v0) = lo;
                return Ok(v0 + (v - v0) * (gallons - a0) / (a - a0));
            }
            lo = (a, v);
        }
        Ok(lo.1)
    }
}

/// `TC(t) = Σ_{0 < x ≤ 150,000} P(x) · C(x, t)`, with the overflow mass
/// counted at the 150,000-gallon anchor.
pub fn expected_casualties(q: &QuantityPmf, f: &CasualtyFunction, t: f64) -> Result<f64> {
    let mut total = 0.0;
    for (g, m) in q.lattice().iter().enumerate().skip(1) {
        if *m != 0.0 {
            total += m * f.casualties_at((g as u32 * LATTICE_GALLONS) as f64, t)?;
        }
    }
    if q.overflow() > 0.0 {
        total += q.overflow() * f.casualties_at(MAX_TRACKED_GALLONS as f64, t)?;
    }
    Ok(total)
}
