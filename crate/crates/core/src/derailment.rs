//! Per-shipment train-derailment probabilities.
//!
//! Rates are linearized: the probability of a derailment over an exposure is
//! rate × exposure, summed over causes weighted by their share. A result
//! above 1 means the linear form is invalid for the input and is reported as
//! an error rather than clamped.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{
    CauseContext, CauseTable, MetricClass, RateTable, RouteSegment, TrainConfig, TrainType,
    YardPlan,
};

const PER_MILLION: f64 = 1e6;
const PER_BILLION: f64 = 1e9;

/// A derailment probability and its split by traffic metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerailmentEstimate {
    pub probability: f64,
    pub by_metric: BTreeMap<MetricClass, f64>,
}

impl DerailmentEstimate {
    fn from_parts(what: impl FnOnce() -> String, by_metric: BTreeMap<MetricClass, f64>) -> Result<Self> {
        let probability = by_metric.values().sum();
        check_probability(probability, what)?;
        Ok(Self {
            probability,
            by_metric,
        })
    }
}

fn check_probability(p: f64, what: impl FnOnce() -> String) -> Result<()> {
    if p > 1.0 || !p.is_finite() {
        return Err(Error::ProbabilityOverflow {
            what: what(),
            value: p,
        });
    }
    Ok(())
}

fn check_table(causes: &CauseTable, context: CauseContext, train: &TrainConfig) -> Result<()> {
    if causes.context() != context || causes.train_type() != train.train_type() {
        return Err(Error::validation(
            "causes",
            format!(
                "expected the {context} table for {} trains, got {}/{}",
                train.train_type(),
                causes.context(),
                causes.train_type()
            ),
        ));
    }
    Ok(())
}

/// Probability of a derailment on one mainline segment.
pub fn mainline_derailment(
    train: &TrainConfig,
    segment: &RouteSegment,
    rates: &RateTable,
    causes: &CauseTable,
) -> Result<DerailmentEstimate> {
    check_table(causes, CauseContext::Mainline, train)?;
    let r = rates.mainline(train.train_type())?;
    let miles = segment.length_miles;
    let mut by_metric = BTreeMap::new();
    for row in causes.rows() {
        let term = match row.metric_class {
            MetricClass::TrainMiles => r.per_million_train_miles / PER_MILLION * miles,
            MetricClass::TonMiles => {
                r.per_billion_gross_ton_miles / PER_BILLION * train.gross_tonnage() * miles
            }
            MetricClass::CarMiles => {
                r.per_billion_car_miles / PER_BILLION * train.length_cars() as f64 * miles
            }
            other => unreachable!("{other:?} rejected by cause-table validation"),
        };
        *by_metric.entry(row.metric_class).or_insert(0.0) += term * row.share();
    }
    DerailmentEstimate::from_parts(
        || format!("mainline derailment probability on segment `{}`", segment.segment_id),
        by_metric,
    )
}

pub fn mainline_derailment_prob(
    train: &TrainConfig,
    segment: &RouteSegment,
    rates: &RateTable,
    causes: &CauseTable,
) -> Result<f64> {
    mainline_derailment(train, segment, rates, causes).map(|e| e.probability)
}

/// Probability of a derailment across all arrival/departure events of a shipment.
pub fn ad_derailment(
    train: &TrainConfig,
    plan: &YardPlan,
    rates: &RateTable,
    causes: &CauseTable,
) -> Result<DerailmentEstimate> {
    check_table(causes, CauseContext::Ad, train)?;
    let r = rates.ad(train, plan.yard_type)?;
    let n = plan.ad_events() as f64;
    let mut by_metric = BTreeMap::new();
    for row in causes.rows() {
        let term = match row.metric_class {
            MetricClass::TrainEvents => r.per_million_train_ad / PER_MILLION * n,
            MetricClass::CarEvents => {
                r.per_billion_car_ad / PER_BILLION * train.length_cars() as f64 * n
            }
            other => unreachable!("{other:?} rejected by cause-table validation"),
        };
        *by_metric.entry(row.metric_class).or_insert(0.0) += term * row.share();
    }
    DerailmentEstimate::from_parts(
        || format!("arrival/departure derailment probability for the {} train", train.train_type()),
        by_metric,
    )
}

pub fn ad_derailment_prob(
    train: &TrainConfig,
    plan: &YardPlan,
    rates: &RateTable,
    causes: &CauseTable,
) -> Result<f64> {
    ad_derailment(train, plan, rates, causes).map(|e| e.probability)
}

/// Probability of a derailment while switching in yards; manifest trains only.
pub fn switching_derailment_prob(train: &TrainConfig, plan: &YardPlan, rates: &RateTable) -> Result<f64> {
    if train.train_type() == TrainType::Unit {
        return Err(Error::NotApplicable("yard switching"));
    }
    let d = rates.switching(train.train_type(), plan.yard_type)?;
    let p = d / PER_MILLION * train.length_cars() as f64 * (plan.intermediate_yards as f64 + 1.0);
    check_probability(p, || "yard switching derailment probability".to_string())?;
    Ok(p)
}

/// Derailment probabilities for every incident type of one train.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerailmentProbabilities {
    pub mainline_per_segment: BTreeMap<String, DerailmentEstimate>,
    pub ad_total: DerailmentEstimate,
    /// Zero for unit trains.
    pub switching_total: f64,
}

pub fn derailment_probabilities(
    train: &TrainConfig,
    route: &[RouteSegment],
    plan: &YardPlan,
    rates: &RateTable,
    mainline_causes: &CauseTable,
    ad_causes: &CauseTable,
) -> Result<DerailmentProbabilities> {
    let mut mainline_per_segment = BTreeMap::new();
    for seg in route {
        mainline_per_segment.insert(
            seg.segment_id.clone(),
            mainline_derailment(train, seg, rates, mainline_causes)?,
        );
    }
    let switching_total = match train.train_type() {
        TrainType::Unit => 0.0,
        TrainType::Manifest => switching_derailment_prob(train, plan, rates)?,
    };
    Ok(DerailmentProbabilities {
        mainline_per_segment,
        ad_total: ad_derailment(train, plan, rates, ad_causes)?,
        switching_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{
        CauseRow, Consist, RateTable, SwitchingApproach, YardType,
    };
    use proptest::prelude::*;

    fn unit(l: usize, gw: f64) -> TrainConfig {
        TrainConfig::new(TrainType::Unit, l, gw, None, true, Consist::all_tank(l)).unwrap()
    }

    fn manifest(l: usize) -> TrainConfig {
        TrainConfig::new(TrainType::Manifest, l, 90.0 * l as f64, None, false, Consist::block(0, 1, l - 1))
            .unwrap()
    }

    fn single(ctx: CauseContext, tt: TrainType, class: MetricClass) -> CauseTable {
        CauseTable::new(ctx, tt, vec![CauseRow::new("all", 100.0, class)]).unwrap()
    }

    fn plan(m: u32) -> YardPlan {
        YardPlan {
            intermediate_yards: m,
            yard_type: YardType::All,
            switching_approach: SwitchingApproach::SwitchedAlone,
        }
    }

    #[test]
    fn zero_miles_zero_probability() {
        let t = unit(100, 14_000.0);
        let causes = builtin_mainline(TrainType::Unit);
        let seg = RouteSegment::new("s", 0.0, 40.0);
        assert_eq!(mainline_derailment_prob(&t, &seg, &RateTable::builtin(), &causes).unwrap(), 0.0);
    }

    #[test]
    fn one_train_mile() {
        let t = unit(100, 14_000.0);
        let causes = single(CauseContext::Mainline, TrainType::Unit, MetricClass::TrainMiles);
        let seg = RouteSegment::new("s", 1.0, 40.0);
        let p = mainline_derailment_prob(&t, &seg, &RateTable::builtin(), &causes).unwrap();
        assert_eq!(p, 0.85e-6);
    }

    #[test]
    fn switching_only_for_manifest() {
        let rates = RateTable::builtin();
        let p = switching_derailment_prob(&manifest(100), &plan(0), &rates).unwrap();
        assert!((p - 6.43e-4).abs() < 1e-18);
        assert!(matches!(
            switching_derailment_prob(&unit(100, 1.0), &plan(0), &rates),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn overflow_is_an_error() {
        let t = unit(100, 14_000.0);
        let causes = single(CauseContext::Mainline, TrainType::Unit, MetricClass::TrainMiles);
        let seg = RouteSegment::new("s", 2e6, 40.0);
        assert!(matches!(
            mainline_derailment_prob(&t, &seg, &RateTable::builtin(), &causes),
            Err(Error::ProbabilityOverflow { .. })
        ));
    }

    #[test]
    fn wrong_table_rejected() {
        let t = unit(10, 1_000.0);
        let causes = single(CauseContext::Ad, TrainType::Unit, MetricClass::TrainEvents);
        let seg = RouteSegment::new("s", 1.0, 40.0);
        assert!(mainline_derailment_prob(&t, &seg, &RateTable::builtin(), &causes).is_err());
    }

    fn builtin_mainline(tt: TrainType) -> CauseTable {
        crate::scenario::CauseTables::builtin()
            .get(CauseContext::Mainline, tt)
            .unwrap()
            .clone()
    }

    proptest! {
        #[test]
        fn doubling_miles_doubles_probability(miles in 0.1f64..500.0, l in 1usize..150) {
            let t = unit(l, 130.0 * l as f64);
            let causes = builtin_mainline(TrainType::Unit);
            let rates = RateTable::builtin();
            let p1 = mainline_derailment_prob(&t, &RouteSegment::new("a", miles, 30.0), &rates, &causes).unwrap();
            let p2 = mainline_derailment_prob(&t, &RouteSegment::new("a", 2.0 * miles, 30.0), &rates, &causes).unwrap();
            prop_assert!((p2 - 2.0 * p1).abs() <= 1e-15 * p2.abs());
        }

        #[test]
        fn monotone_in_length_and_yards(l in 1usize..150, m in 0u32..6) {
            let rates = RateTable::builtin();
            let all = crate::scenario::CauseTables::builtin();
            let ad = all.get(CauseContext::Ad, TrainType::Manifest).unwrap();
            let a1 = ad_derailment_prob(&manifest(l), &plan(m), &rates, ad).unwrap();
            let a2 = ad_derailment_prob(&manifest(l + 1), &plan(m), &rates, ad).unwrap();
            let a3 = ad_derailment_prob(&manifest(l), &plan(m + 1), &rates, ad).unwrap();
            prop_assert!(a2 >= a1 && a3 >= a1);
            let s1 = switching_derailment_prob(&manifest(l), &plan(m), &rates).unwrap();
            let s2 = switching_derailment_prob(&manifest(l + 1), &plan(m + 1), &rates).unwrap();
            prop_assert!(s2 >= s1);
        }

        #[test]
        fn decomposes_by_metric(l in 1usize..150, miles in 1.0f64..400.0) {
            let t = unit(l, 120.0 * l as f64);
            let causes = builtin_mainline(TrainType::Unit);
            let est = mainline_derailment(&t, &RouteSegment::new("a", miles, 30.0), &RateTable::builtin(), &causes).unwrap();
            let by_class = causes.percent_by_class();
            let r = RateTable::builtin().mainline(TrainType::Unit).unwrap();
            let independent = by_class.get(&MetricClass::TrainMiles).unwrap() / 100.0 * r.per_million_train_miles * 1e-6 * miles
                + by_class.get(&MetricClass::TonMiles).unwrap() / 100.0 * r.per_billion_gross_ton_miles * 1e-9 * t.gross_tonnage() * miles
                + by_class.get(&MetricClass::CarMiles).unwrap() / 100.0 * r.per_billion_car_miles * 1e-9 * l as f64 * miles;
            prop_assert!((est.probability - independent).abs() <= 1e-12 * independent);
        }
    }
}
