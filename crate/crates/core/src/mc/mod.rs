//! Monte Carlo check of the analytic release-count and quantity distributions.
//!
//! Every lane draws from its own ChaCha8 stream, so results depend only on
//! the seed and trial count, never on thread scheduling.

mod sampler;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{ad_pod_params, mainline_pod_params, Study};
use crate::pmf::{DiscretePmf, SupportKind};
use crate::quantity::{QuantityConvolver, QuantityPmf, MAX_LATTICE_INDEX};
use crate::scenario::{
    CauseContext, MetricClass, QuantityTable, RouteSegment, SwitchingApproach, TrainConfig, TrainType,
};
use crate::release::EN_MASSE_BUFFER_CARS;

use sampler::{CarQuantitySampler, GeometricSeverity, PodSampler, YardSeveritySampler};

/// Independent random streams per run.
pub const LANES: u64 = 64;
pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_TV_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// Each trial is one shipment; most trials see no derailment.
    PerShipment,
    /// Each trial is one derailment.
    GivenDerailment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub conditioning: Conditioning,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64, conditioning: Conditioning) -> Result<Self> {
        if trials == 0 {
            return Err(Error::validation("trials", "must be at least 1"));
        }
        Ok(Self {
            trials,
            seed,
            conditioning,
        })
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            conditioning: Conditioning::GivenDerailment,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimContext {
    MainlineSegment(usize),
    Ad,
    Switching,
}

impl SimContext {
    fn phase(self, train_type: TrainType) -> u64 {
        let base = match train_type {
            TrainType::Unit => 0,
            TrainType::Manifest => 1 << 20,
        };
        base + match self {
            SimContext::Ad => 1,
            SimContext::Switching => 2,
            SimContext::MainlineSegment(i) => 16 + i as u64,
        }
    }
}

const QUANTITY_PHASE: u64 = 1 << 24;
const BLOCK_PHASE: u64 = 1 << 25;

fn lane_rng(seed: u64, phase: u64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((phase << 32) | lane);
    rng
}

/// Splits `trials` across the lanes and sums the per-lane histograms.
fn run_lanes<F>(trials: u64, seed: u64, phase: u64, bins: usize, trial: F) -> Vec<u64>
where
    F: Fn(&mut ChaCha8Rng) -> usize + Sync,
{
    let per = trials / LANES;
    let extra = trials % LANES;
    let hists: Vec<Vec<u64>> = (0..LANES)
        .into_par_iter()
        .map(|lane| {
            let mut rng = lane_rng(seed, phase, lane);
            let mut hist = vec![0u64; bins];
            let n = per + u64::from(lane < extra);
            for _ in 0..n {
                hist[trial(&mut rng)] += 1;
            }
            hist
        })
        .collect();
    let mut total = vec![0u64; bins];
    for h in hists {
        for (t, c) in total.iter_mut().zip(h) {
            *t += c;
        }
    }
    total
}

/// Empirical pmf from a histogram, trailing empty bins dropped.
pub fn histogram_pmf(kind: SupportKind, hist: &[u64]) -> Result<DiscretePmf> {
    let n: u64 = hist.iter().sum();
    if n == 0 {
        return Err(Error::validation("histogram", "no trials"));
    }
    let last = hist.iter().rposition(|&c| c > 0).unwrap_or(0);
    DiscretePmf::new(kind, hist[..=last].iter().map(|&c| c as f64 / n as f64).collect())
}

/// Total variation distance `½ Σ |a − b|`.
pub fn tv_distance(a: &DiscretePmf, b: &DiscretePmf) -> Result<f64> {
    if a.kind() != b.kind() {
        return Err(Error::SupportMismatch(a.kind(), b.kind()));
    }
    let n = a.len().max(b.len());
    Ok(0.5 * (0..n).map(|i| (a.mass(i) - b.mass(i)).abs()).sum::<f64>())
}

fn tank_positions(train: &TrainConfig) -> Vec<usize> {
    train
        .consist()
        .flags()
        .iter()
        .enumerate()
        .filter(|(_, t)| **t)
        .map(|(i, _)| i + 1)
        .collect()
}

fn tank_prefix(train: &TrainConfig) -> Vec<usize> {
    let mut prefix = vec![0usize];
    for &t in train.consist().flags() {
        prefix.push(prefix.last().unwrap() + usize::from(t));
    }
    prefix
}

fn thin<R: Rng>(rng: &mut R, n: usize, q: f64) -> usize {
    (0..n).filter(|_| rng.gen::<f64>() < q).count()
}

fn check_probability(what: &str, p: f64) -> Result<f64> {
    if p > 1.0 {
        return Err(Error::ProbabilityOverflow {
            what: what.into(),
            value: p,
        });
    }
    Ok(p)
}

/// Derailment probability per shipment, evaluated directly from the rate and cause tables.
fn derail_probability(study: &Study, train_type: TrainType, context: SimContext) -> Result<f64> {
    let s = &study.scenario;
    let train = s.train(train_type);
    let cars = train.length_cars() as f64;
    match context {
        SimContext::MainlineSegment(i) => {
            let seg = segment(study, i)?;
            let r = study.rates.mainline(train_type)?;
            let table = study.causes.get(CauseContext::Mainline, train_type)?;
            let mut p = 0.0;
            for row in table.rows() {
                let per_cause = match row.metric_class {
                    MetricClass::TrainMiles => r.per_million_train_miles * seg.length_miles / 1e6,
                    MetricClass::TonMiles => {
                        r.per_billion_gross_ton_miles * train.gross_tonnage() * seg.length_miles / 1e9
                    }
                    MetricClass::CarMiles => r.per_billion_car_miles * cars * seg.length_miles / 1e9,
                    _ => 0.0,
                };
                p += row.percent / 100.0 * per_cause;
            }
            check_probability("mainline derailment probability", p)
        }
        SimContext::Ad => {
            let r = study.rates.ad(train, s.yards.yard_type)?;
            let table = study.causes.get(CauseContext::Ad, train_type)?;
            let events = (2 + 2 * s.yards.intermediate_yards) as f64;
            let mut p = 0.0;
            for row in table.rows() {
                let per_cause = match row.metric_class {
                    MetricClass::TrainEvents => r.per_million_train_ad * events / 1e6,
                    MetricClass::CarEvents => r.per_billion_car_ad * cars * events / 1e9,
                    _ => 0.0,
                };
                p += row.percent / 100.0 * per_cause;
            }
            check_probability("arrival/departure derailment probability", p)
        }
        SimContext::Switching => {
            if train_type == TrainType::Unit {
                return Err(Error::NotApplicable("yard switching"));
            }
            let rate = study.rates.switching(train_type, s.yards.yard_type)?;
            let p = rate / 1e6 * cars * f64::from(s.yards.intermediate_yards + 1);
            check_probability("switching derailment probability", p)
        }
    }
}

fn segment(study: &Study, i: usize) -> Result<&RouteSegment> {
    study
        .scenario
        .route
        .get(i)
        .ok_or_else(|| Error::validation("segment", format!("no route segment {i}")))
}

type TrialFn<'a> = Box<dyn Fn(&mut ChaCha8Rng) -> usize + Sync + 'a>;

/// Per-trial sampler for one incident type, returning released tanks.
fn incident_sampler<'a>(
    study: &'a Study,
    train_type: TrainType,
    context: SimContext,
) -> Result<(usize, TrialFn<'a>)> {
    let s = &study.scenario;
    let train = s.train(train_type);
    let length = train.length_cars();
    let cpr = s.release.cpr;
    let yard_q = cpr * s.release.yard_speed_factor;
    let tanks = train.tank_count();
    match context {
        SimContext::MainlineSegment(i) => {
            let seg = segment(study, i)?;
            let pod = PodSampler::new(mainline_pod_params(s, train_type), length);
            let severity = GeometricSeverity::Mainline {
                coef: &s.severity.z.mainline,
                train,
                speed: seg.derailment_speed_mph,
            };
            let positions = tank_positions(train);
            // Each tank position gets its own release trial and its own derailed block.
            Ok((
                tanks + 1,
                Box::new(move |rng: &mut ChaCha8Rng| {
                    let mut released = 0;
                    for &j in &positions {
                        if rng.gen::<f64>() < cpr {
                            let k = pod.sample(rng);
                            let x = severity.sample(rng, length - k + 1);
                            if k <= j && j < k + x {
                                released += 1;
                            }
                        }
                    }
                    released
                }),
            ))
        }
        SimContext::Ad => {
            let pod = PodSampler::new(ad_pod_params(s, train_type), length);
            let coef = match train_type {
                TrainType::Unit => &s.severity.z.terminal_unit,
                TrainType::Manifest => &s.severity.z.yard_manifest,
            };
            let severity = GeometricSeverity::Length { coef, length };
            let prefix = tank_prefix(train);
            Ok((
                tanks + 1,
                Box::new(move |rng: &mut ChaCha8Rng| {
                    let k = pod.sample(rng);
                    let x = severity.sample(rng, length - k + 1);
                    let derailed = prefix[k + x - 1] - prefix[k - 1];
                    thin(rng, derailed, yard_q)
                }),
            ))
        }
        SimContext::Switching => {
            if train_type == TrainType::Unit {
                return Err(Error::NotApplicable("yard switching"));
            }
            let block = tanks;
            if block == 0 || block > crate::scenario::MAX_SWITCHED_TANK_BLOCK {
                return Err(Error::validation("tank_count", "switched tank blocks must hold 1..=20 cars"));
            }
            let buffer = match s.yards.switching_approach {
                SwitchingApproach::SwitchedAlone => 0,
                SwitchingApproach::SwitchedEnMasse => EN_MASSE_BUFFER_CARS,
            };
            let cut = block + buffer;
            let yard = s.severity.yard;
            let severity = YardSeveritySampler::new(yard.get(s.yards.yard_type), yard.max_cars);
            Ok((
                block + 1,
                Box::new(move |rng: &mut ChaCha8Rng| {
                    let k = rng.gen_range(1..=cut);
                    let x = severity.sample(rng, cut - k + 1);
                    let last = k + x - 1;
                    let derailed = last.saturating_sub((k - 1).max(buffer));
                    thin(rng, derailed, yard_q)
                }),
            ))
        }
    }
}

/// Released-tank histogram for one incident type.
pub fn simulate_release_histogram(
    study: &Study,
    train_type: TrainType,
    context: SimContext,
    cfg: &SimConfig,
) -> Result<Vec<u64>> {
    let p = match cfg.conditioning {
        Conditioning::PerShipment => derail_probability(study, train_type, context)?,
        Conditioning::GivenDerailment => 1.0,
    };
    let (bins, trial) = incident_sampler(study, train_type, context)?;
    Ok(run_lanes(cfg.trials, cfg.seed, context.phase(train_type), bins, |rng| {
        if p < 1.0 && rng.gen::<f64>() >= p {
            0
        } else {
            trial(rng)
        }
    }))
}

pub fn simulate_release_counts(
    study: &Study,
    train_type: TrainType,
    context: SimContext,
    cfg: &SimConfig,
) -> Result<DiscretePmf> {
    histogram_pmf(SupportKind::Count, &simulate_release_histogram(study, train_type, context, cfg)?)
}

/// Mainline released tanks when all tanks share one derailed block per trial.
/// Given a derailment only; used as a diagnostic next to the per-position sampler.
pub fn simulate_block_release_counts(
    study: &Study,
    train_type: TrainType,
    segment_index: usize,
    cfg: &SimConfig,
) -> Result<DiscretePmf> {
    let s = &study.scenario;
    let seg = segment(study, segment_index)?;
    let train = s.train(train_type);
    let length = train.length_cars();
    let pod = PodSampler::new(mainline_pod_params(s, train_type), length);
    let severity = GeometricSeverity::Mainline {
        coef: &s.severity.z.mainline,
        train,
        speed: seg.derailment_speed_mph,
    };
    let prefix = tank_prefix(train);
    let cpr = s.release.cpr;
    let phase = BLOCK_PHASE + SimContext::MainlineSegment(segment_index).phase(train_type);
    let hist = run_lanes(cfg.trials, cfg.seed, phase, train.tank_count() + 1, |rng| {
        let k = pod.sample(rng);
        let x = severity.sample(rng, length - k + 1);
        thin(rng, prefix[k + x - 1] - prefix[k - 1], cpr)
    });
    histogram_pmf(SupportKind::Count, &hist)
}

/// Gallons released for `trials` draws of the count histogram's empirical law.
pub fn simulate_quantity(counts: &[u64], table: &QuantityTable, cfg: &SimConfig) -> Result<QuantityPmf> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::validation("histogram", "no trials"));
    }
    let count_index = rand::distributions::WeightedIndex::new(counts)
        .map_err(|e| Error::validation("histogram", e.to_string()))?;
    let car = CarQuantitySampler::new(table);
    let overflow_bin = MAX_LATTICE_INDEX + 1;
    let hist = run_lanes(cfg.trials, cfg.seed, QUANTITY_PHASE, overflow_bin + 1, |rng| {
        use rand::distributions::Distribution;
        let cars = count_index.sample(rng);
        let mut total = 0;
        for _ in 0..cars {
            total += car.sample(rng);
            if total > MAX_LATTICE_INDEX {
                return overflow_bin;
            }
        }
        total
    });
    let lattice = hist[..overflow_bin].iter().map(|&c| c as f64 / cfg.trials as f64).collect();
    QuantityPmf::new(lattice, hist[overflow_bin] as f64 / cfg.trials as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    ReleasedTanks,
    /// Lattice index of gallons released; index 201 is the overflow bucket.
    GallonsLattice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub train_type: TrainType,
    pub context: String,
    pub measure: Measure,
    pub tv_distance: f64,
    pub empirical_mean: f64,
    pub analytic_mean: f64,
    pub empirical_variance: f64,
    pub analytic_variance: f64,
    /// Counted toward the pass/fail verdict.
    pub gated: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub schema: &'static str,
    pub scenario: String,
    pub trials: u64,
    pub seed: u64,
    pub conditioning: Conditioning,
    pub threshold: f64,
    pub comparisons: Vec<Comparison>,
    pub passed: bool,
}

pub const COMPARISON_SCHEMA: &str = "railrisk.validate/1";

fn context_label(study: &Study, context: SimContext) -> String {
    match context {
        SimContext::MainlineSegment(i) => format!("mainline:{}", study.scenario.route[i].segment_id),
        SimContext::Ad => "arrival_departure".into(),
        SimContext::Switching => "switching".into(),
    }
}

fn compare(
    train_type: TrainType,
    context: String,
    measure: Measure,
    empirical: &DiscretePmf,
    analytic: &DiscretePmf,
    threshold: f64,
    gated: bool,
) -> Result<Comparison> {
    let tv = tv_distance(empirical, analytic)?;
    Ok(Comparison {
        train_type,
        context,
        measure,
        tv_distance: tv,
        empirical_mean: empirical.mean(),
        analytic_mean: analytic.mean(),
        empirical_variance: empirical.variance(),
        analytic_variance: analytic.variance(),
        gated,
        passed: !gated || tv <= threshold,
    })
}

/// Simulates every incident type of both options and compares against the
/// analytic pmfs. Release counts are gated by `threshold`; quantities and the
/// shared-block mainline variant are reported only.
pub fn validate(study: &Study, cfg: &SimConfig, threshold: f64) -> Result<ComparisonReport> {
    let mut comparisons = Vec::new();
    for train_type in [TrainType::Unit, TrainType::Manifest] {
        let analysis = study.analyze_option(train_type, &[])?;
        let mut contexts: Vec<(SimContext, &crate::pipeline::IncidentAnalysis)> = analysis
            .segments
            .iter()
            .enumerate()
            .map(|(i, sg)| (SimContext::MainlineSegment(i), &sg.incident))
            .collect();
        contexts.push((SimContext::Ad, &analysis.ad.incident));
        if let Some(sw) = &analysis.switching {
            contexts.push((SimContext::Switching, &sw.incident));
        }
        let mut convolver = QuantityConvolver::new(&study.scenario.release.quantity_table);
        for (context, incident) in contexts {
            let label = context_label(study, context);
            let analytic_count = match cfg.conditioning {
                Conditioning::PerShipment => &incident.per_shipment_release,
                Conditioning::GivenDerailment => &incident.conditional_release,
            };
            let hist = simulate_release_histogram(study, train_type, context, cfg)?;
            let empirical = histogram_pmf(SupportKind::Count, &hist)?;
            comparisons.push(compare(
                train_type,
                label.clone(),
                Measure::ReleasedTanks,
                &empirical,
                analytic_count,
                threshold,
                true,
            )?);

            let q_cfg = SimConfig {
                seed: cfg.seed ^ context.phase(train_type),
                ..*cfg
            };
            let q_emp = simulate_quantity(&hist, &study.scenario.release.quantity_table, &q_cfg)?;
            let q_ana = convolver.total_quantity(analytic_count)?;
            comparisons.push(compare(
                train_type,
                label.clone(),
                Measure::GallonsLattice,
                &q_emp.to_extended_pmf(),
                &q_ana.to_extended_pmf(),
                threshold,
                false,
            )?);

            if let (SimContext::MainlineSegment(i), Conditioning::GivenDerailment) = (context, cfg.conditioning) {
                let block = simulate_block_release_counts(study, train_type, i, cfg)?;
                comparisons.push(compare(
                    train_type,
                    format!("{label}:shared_block"),
                    Measure::ReleasedTanks,
                    &block,
                    analytic_count,
                    threshold,
                    false,
                )?);
            }
        }
    }
    let passed = comparisons.iter().all(|c| c.passed);
    Ok(ComparisonReport {
        schema: COMPARISON_SCHEMA,
        scenario: study.scenario.name.clone(),
        trials: cfg.trials,
        seed: cfg.seed,
        conditioning: cfg.conditioning,
        threshold,
        comparisons,
        passed,
    })
}
