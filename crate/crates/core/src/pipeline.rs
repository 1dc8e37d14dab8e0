//! End-to-end evaluation of a scenario for both service options.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::consequence::{expected_casualties, mix_curves, CasualtyFunction};
use crate::derailment::{
    ad_derailment, mainline_derailment, switching_derailment_prob, DerailmentEstimate,
};
use crate::error::{Error, Result};
use crate::pmf::DiscretePmf;
use crate::quantity::{QuantityConvolver, QuantityPmf, MAX_LATTICE_INDEX};
use crate::release::{
    ad_tank_derail_pmf, combine_per_shipment, per_shipment_release_pmf, position_profile,
    release_count_pmf_mainline, switch_tank_derail_pmf, thin_release_pmf, PositionProfile,
    SwitchCut,
};
use crate::scenario::curves::{load_consequence_curves, MAX_RESPONSE_MINUTES};
use crate::scenario::tables::{load_cause_tables, load_rate_tables};
use crate::scenario::{
    load_scenario, CauseContext, CauseTables, ConsequenceCurveSet, RateTable, RouteSegment,
    Scenario, TrainConfig, TrainType,
};
use crate::severity::{pod_pmf, BetaParams, ConditionalSeverity, DiscretizedGe, PodContext};

/// File names looked up in a table directory.
pub const RATES_FILE: &str = "rates.csv";
pub const CAUSES_FILE: &str = "causes.csv";

/// A scenario together with every table it needs.
#[derive(Debug, Clone)]
pub struct Study {
    pub scenario: Scenario,
    pub rates: RateTable,
    pub causes: CauseTables,
    pub curves: ConsequenceCurveSet,
    casualty: CasualtyFunction,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Study {
    pub fn new(
        scenario: Scenario,
        rates: RateTable,
        causes: CauseTables,
        curves: ConsequenceCurveSet,
    ) -> Result<Self> {
        scenario.validate()?;
        let casualty = mix_curves(&curves)?;
        Ok(Self {
            scenario,
            rates,
            causes,
            curves,
            casualty,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with(path, None)
    }

    /// Loads a scenario file and its tables. Paths inside the scenario resolve
    /// against its directory. Tables not named by the scenario come from
    /// `table_dir` when given, otherwise from the built-in defaults.
    pub fn load_with(path: &Path, table_dir: Option<&Path>) -> Result<Self> {
        let scenario = load_scenario(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let rates = match (&scenario.tables.rates, table_dir) {
            (Some(p), _) => load_rate_tables(&resolve(base, p))?,
            (None, Some(dir)) => load_rate_tables(&dir.join(RATES_FILE))?,
            (None, None) => RateTable::builtin(),
        };
        let causes = match (&scenario.tables.causes, table_dir) {
            (Some(p), _) => load_cause_tables(&resolve(base, p))?,
            (None, Some(dir)) => load_cause_tables(&dir.join(CAUSES_FILE))?,
            (None, None) => CauseTables::builtin(),
        };
        let curves = load_consequence_curves(
            &resolve(base, &scenario.curves.file),
            scenario.curves.mix,
            scenario.curves.evacuation,
        )?;
        Self::new(scenario, rates, causes, curves)
    }

    pub fn casualty_function(&self) -> &CasualtyFunction {
        &self.casualty
    }

    /// Evaluates one service option at the given response times.
    pub fn analyze_option(&self, train_type: TrainType, times: &[f64]) -> Result<OptionAnalysis> {
        check_times(times)?;
        let s = &self.scenario;
        let train = s.train(train_type);
        let release = &s.release;
        let mut convolver = QuantityConvolver::new(&release.quantity_table);
        let mainline_causes = self.causes.get(CauseContext::Mainline, train_type)?;
        let ad_causes = self.causes.get(CauseContext::Ad, train_type)?;

        let mut segments = Vec::with_capacity(s.route.len());
        for seg in &s.route {
            let derailment = mainline_derailment(train, seg, &self.rates, mainline_causes)?;
            let (pod, severity) = mainline_models(s, train, seg);
            let profile = position_profile(&pod, &severity, train.consist(), release.cpr);
            let conditional = release_count_pmf_mainline(&profile, train.consist());
            let incident = self.incident(
                derailment.probability,
                conditional,
                times,
                &mut convolver,
                if s.options.mainline_mileage_factor {
                    seg.length_miles
                } else {
                    1.0
                },
            )?;
            segments.push(SegmentAnalysis {
                segment: seg.clone(),
                derailment,
                pod,
                profile,
                incident,
            });
        }

        let ad_derail = ad_derailment(train, &s.yards, &self.rates, ad_causes)?;
        let (ad_pod, ad_severity) = ad_models(s, train);
        let ad_tanks = ad_tank_derail_pmf(&ad_pod, &ad_severity, train.consist());
        let ad_conditional = thin_release_pmf(&ad_tanks, release.cpr, release.yard_speed_factor);
        let ad = AdAnalysis {
            derailment: ad_derail.clone(),
            pod: ad_pod,
            derailed_tanks: ad_tanks,
            incident: self.incident(ad_derail.probability, ad_conditional, times, &mut convolver, 1.0)?,
        };

        let switching = match train_type {
            TrainType::Unit => None,
            TrainType::Manifest => {
                let p = switching_derailment_prob(train, &s.yards, &self.rates)?;
                let cut = SwitchCut::new(s.yards.switching_approach, train.tank_count())?;
                let ge = yard_ge(s)?;
                let tanks = switch_tank_derail_pmf(&cut, &ge);
                let conditional = thin_release_pmf(&tanks, release.cpr, release.yard_speed_factor);
                Some(SwitchingAnalysis {
                    cut,
                    derailed_tanks: tanks,
                    incident: self.incident(p, conditional, times, &mut convolver, 1.0)?,
                })
            }
        };

        // Terminals for unit trains, yards (arrival/departure plus switching) for manifest trains.
        let mut branches = vec![(ad.incident.derailment_probability, &ad.incident.conditional_release)];
        if let Some(sw) = &switching {
            branches.push((sw.incident.derailment_probability, &sw.incident.conditional_release));
        }
        let yard_release = combine_per_shipment(&branches)?;
        let yard_quantity = convolver.total_quantity(&yard_release)?;
        let yard_tc = self.casualties(&yard_quantity, times)?;

        let overflow: f64 = segments.iter().map(|sg| sg.incident.quantity.overflow()).sum::<f64>()
            + yard_quantity.overflow();
        if overflow > 0.0 && !times.is_empty() {
            log::warn!(
                "{train_type}: {overflow:.3e} of per-shipment release probability exceeds {} gallons; casualties there use the largest anchor",
                crate::quantity::MAX_TRACKED_GALLONS
            );
        }
        let shipments = s.demand.shipments(train_type);
        let per_shipment_tc: Vec<TimedValue> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| TimedValue {
                t,
                value: segments.iter().map(|sg| sg.incident.weighted_tc[i].value).sum::<f64>()
                    + yard_tc[i].value,
            })
            .collect();
        let demand_tc = per_shipment_tc
            .iter()
            .map(|tv| TimedValue {
                t: tv.t,
                value: tv.value * shipments as f64,
            })
            .collect();
        Ok(OptionAnalysis {
            train_type,
            train: train.clone(),
            shipments,
            segments,
            ad,
            switching,
            yard_release,
            yard_quantity,
            yard_tc,
            per_shipment_tc,
            demand_tc,
        })
    }

    fn incident(
        &self,
        derailment_probability: f64,
        conditional_release: DiscretePmf,
        times: &[f64],
        convolver: &mut QuantityConvolver,
        weight: f64,
    ) -> Result<IncidentAnalysis> {
        let per_shipment_release = per_shipment_release_pmf(&conditional_release, derailment_probability)?;
        let quantity = convolver.total_quantity(&per_shipment_release)?;
        let tc = self.casualties(&quantity, times)?;
        let weighted_tc = tc
            .iter()
            .map(|v| TimedValue {
                t: v.t,
                value: v.value * weight,
            })
            .collect();
        Ok(IncidentAnalysis {
            derailment_probability,
            conditional_release,
            per_shipment_release,
            quantity,
            tc,
            weighted_tc,
        })
    }

    fn casualties(&self, q: &QuantityPmf, times: &[f64]) -> Result<Vec<TimedValue>> {
        times
            .iter()
            .map(|&t| {
                Ok(TimedValue {
                    t,
                    value: expected_casualties(q, &self.casualty, t)?,
                })
            })
            .collect()
    }

    pub fn analyze(&self, times: &[f64]) -> Result<[OptionAnalysis; 2]> {
        Ok([
            self.analyze_option(TrainType::Unit, times)?,
            self.analyze_option(TrainType::Manifest, times)?,
        ])
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    for &t in times {
        if !(0.0..=MAX_RESPONSE_MINUTES).contains(&t) {
            return Err(Error::OutOfRange {
                quantity: "response time (minutes)",
                value: t,
                min: 0.0,
                max: MAX_RESPONSE_MINUTES,
            });
        }
    }
    Ok(())
}

pub fn mainline_pod_params(s: &Scenario, train_type: TrainType) -> BetaParams {
    s.severity.pod.get(match train_type {
        TrainType::Unit => PodContext::MainlineUnit,
        TrainType::Manifest => PodContext::MainlineManifest,
    })
}

pub fn ad_pod_params(s: &Scenario, train_type: TrainType) -> BetaParams {
    s.severity.pod.get(match train_type {
        TrainType::Unit => PodContext::TerminalUnit,
        TrainType::Manifest => PodContext::YardManifest,
    })
}

/// POD pmf and per-POD severity for a mainline segment.
pub fn mainline_models(s: &Scenario, train: &TrainConfig, seg: &RouteSegment) -> (DiscretePmf, ConditionalSeverity) {
    let pod = pod_pmf(mainline_pod_params(s, train.train_type()), train.length_cars());
    let severity = ConditionalSeverity::mainline(train, seg.derailment_speed_mph, &s.severity.z.mainline);
    (pod, severity)
}

/// POD pmf and per-POD severity for arrival/departure incidents.
pub fn ad_models(s: &Scenario, train: &TrainConfig) -> (DiscretePmf, ConditionalSeverity) {
    let pod = pod_pmf(ad_pod_params(s, train.train_type()), train.length_cars());
    let z = match train.train_type() {
        TrainType::Unit => &s.severity.z.terminal_unit,
        TrainType::Manifest => &s.severity.z.yard_manifest,
    };
    (pod, ConditionalSeverity::length_driven(train, z))
}

pub fn yard_ge(s: &Scenario) -> Result<DiscretizedGe> {
    DiscretizedGe::new(s.severity.yard.get(s.yards.yard_type), s.severity.yard.max_cars)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimedValue {
    pub t: f64,
    pub value: f64,
}

/// One incident type: derailment probability, release count and quantity.
#[derive(Debug, Clone)]
pub struct IncidentAnalysis {
    pub derailment_probability: f64,
    /// Released-tank count given a derailment.
    pub conditional_release: DiscretePmf,
    pub per_shipment_release: DiscretePmf,
    /// Per-shipment gallons released.
    pub quantity: QuantityPmf,
    /// Expected casualties per shipment.
    pub tc: Vec<TimedValue>,
    /// `tc` times the segment mileage when that option is on, otherwise `tc`.
    pub weighted_tc: Vec<TimedValue>,
}

#[derive(Debug, Clone)]
pub struct SegmentAnalysis {
    pub segment: RouteSegment,
    pub derailment: DerailmentEstimate,
    pub pod: DiscretePmf,
    pub profile: PositionProfile,
    pub incident: IncidentAnalysis,
}

#[derive(Debug, Clone)]
pub struct AdAnalysis {
    pub derailment: DerailmentEstimate,
    pub pod: DiscretePmf,
    pub derailed_tanks: DiscretePmf,
    pub incident: IncidentAnalysis,
}

#[derive(Debug, Clone)]
pub struct SwitchingAnalysis {
    pub cut: SwitchCut,
    pub derailed_tanks: DiscretePmf,
    pub incident: IncidentAnalysis,
}

#[derive(Debug, Clone)]
pub struct OptionAnalysis {
    pub train_type: TrainType,
    pub train: TrainConfig,
    /// ⌈δ / c⌉.
    pub shipments: u32,
    pub segments: Vec<SegmentAnalysis>,
    pub ad: AdAnalysis,
    pub switching: Option<SwitchingAnalysis>,
    /// Per-shipment release count at terminals (unit) or in yards (manifest).
    pub yard_release: DiscretePmf,
    pub yard_quantity: QuantityPmf,
    pub yard_tc: Vec<TimedValue>,
    pub per_shipment_tc: Vec<TimedValue>,
    pub demand_tc: Vec<TimedValue>,
}

impl OptionAnalysis {
    /// Per-shipment gallons released over all incident types.
    pub fn total_quantity(&self) -> Result<QuantityPmf> {
        let parts: Vec<&QuantityPmf> = self
            .segments
            .iter()
            .map(|s| &s.incident.quantity)
            .chain(std::iter::once(&self.yard_quantity))
            .collect();
        let mut lattice = vec![0.0; MAX_LATTICE_INDEX + 1];
        let mut overflow = 0.0;
        for q in parts {
            for (a, m) in lattice.iter_mut().zip(q.lattice()).skip(1) {
                *a += m;
            }
            overflow += q.overflow();
        }
        let positive: f64 = lattice.iter().sum::<f64>() + overflow;
        if positive > 1.0 {
            return Err(Error::ProbabilityOverflow {
                what: "per-shipment release probability".into(),
                value: positive,
            });
        }
        lattice[0] = 1.0 - positive;
        QuantityPmf::new(lattice, overflow)
    }

    /// Per-shipment casualties from mainline segments (weighted as aggregated).
    pub fn mainline_tc(&self) -> Vec<TimedValue> {
        self.per_shipment_tc
            .iter()
            .enumerate()
            .map(|(i, tv)| TimedValue {
                t: tv.t,
                value: self.segments.iter().map(|s| s.incident.weighted_tc[i].value).sum(),
            })
            .collect()
    }
}
