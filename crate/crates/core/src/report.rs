//! Report structures, text rendering and plot-ready data series.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::{IncidentAnalysis, OptionAnalysis, Study, TimedValue};
use crate::pmf::{DiscretePmf, LATTICE_GALLONS};
use crate::quantity::QuantityPmf;
use crate::scenario::tables::{RateContext, RateMetric};
use crate::scenario::{
    CauseContext, CauseTables, Evacuation, MetricClass, QuantityRow, QuantityTable, RateTable, TrainType,
};
use crate::severity::SeverityConfig;

pub const REPORT_SCHEMA: &str = "railrisk.report/1";
pub const COMPARE_SCHEMA: &str = "railrisk.compare/1";
pub const TABLES_SCHEMA: &str = "railrisk.tables/1";
pub const DEFAULT_TIMES: [f64; 2] = [4.0, 120.0];

/// Gallons-released summary. Quantiles are conditional on a release and are
/// `None` when no release is possible or the quantile falls above 150,000 gallons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantitySummary {
    pub prob_release: f64,
    pub mean_gallons: f64,
    pub overflow_prob: f64,
    pub median_gallons_given_release: Option<u32>,
    pub p95_gallons_given_release: Option<u32>,
}

impl QuantitySummary {
    pub fn of(q: &QuantityPmf) -> Self {
        let positive = q.prob_positive();
        let quantile = |p: f64| {
            if positive <= 0.0 {
                return None;
            }
            let mut acc = 0.0;
            for (g, m) in q.lattice().iter().enumerate().skip(1) {
                acc += m / positive;
                if acc >= p {
                    return Some(g as u32 * LATTICE_GALLONS);
                }
            }
            None
        };
        Self {
            prob_release: positive,
            mean_gallons: q.mean_gallons(),
            overflow_prob: q.overflow(),
            median_gallons_given_release: quantile(0.5),
            p95_gallons_given_release: quantile(0.95),
        }
    }
}

/// Intermediate distributions, written only in verbose mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncidentDetail {
    pub conditional_release: Vec<f64>,
    pub per_shipment_release: Vec<f64>,
    pub quantity_lattice: Vec<f64>,
    pub quantity_overflow: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pod: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derailed_tanks: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position_derail_prob: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position_release_prob: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncidentReport {
    pub label: String,
    pub derailment_probability: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub derailment_by_metric: BTreeMap<MetricClass, f64>,
    pub expected_released_tanks_given_derailment: f64,
    pub quantity: QuantitySummary,
    pub tc: Vec<TimedValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<IncidentDetail>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub segment_id: String,
    pub length_miles: f64,
    pub derailment_speed_mph: f64,
    pub incident: IncidentReport,
    pub weighted_tc: Vec<TimedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptionReport {
    pub train_type: TrainType,
    pub length_cars: usize,
    pub tank_cars: usize,
    pub capacity: u32,
    pub shipments: u32,
    pub segments: Vec<SegmentReport>,
    pub arrival_departure: IncidentReport,
    pub switching: Option<IncidentReport>,
    pub yard_quantity: QuantitySummary,
    pub yard_tc: Vec<TimedValue>,
    pub mainline_tc: Vec<TimedValue>,
    pub total_quantity: QuantitySummary,
    pub per_shipment_tc: Vec<TimedValue>,
    pub demand_tc: Vec<TimedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub schema: &'static str,
    pub scenario: String,
    pub tank_cars_required: u32,
    pub times_minutes: Vec<f64>,
    pub mainline_mileage_factor: bool,
    pub options: Vec<OptionReport>,
}

fn masses(p: &DiscretePmf) -> Vec<f64> {
    p.masses().to_vec()
}

fn incident_report(label: String, inc: &IncidentAnalysis, by_metric: BTreeMap<MetricClass, f64>, detail: Option<IncidentDetail>) -> IncidentReport {
    IncidentReport {
        label,
        derailment_probability: inc.derailment_probability,
        derailment_by_metric: by_metric,
        expected_released_tanks_given_derailment: inc.conditional_release.mean(),
        quantity: QuantitySummary::of(&inc.quantity),
        tc: inc.tc.clone(),
        detail,
    }
}

fn base_detail(inc: &IncidentAnalysis) -> IncidentDetail {
    IncidentDetail {
        conditional_release: masses(&inc.conditional_release),
        per_shipment_release: masses(&inc.per_shipment_release),
        quantity_lattice: inc.quantity.lattice().to_vec(),
        quantity_overflow: inc.quantity.overflow(),
        pod: None,
        derailed_tanks: None,
        position_derail_prob: None,
        position_release_prob: None,
    }
}

impl OptionReport {
    pub fn from_analysis(a: &OptionAnalysis, capacity: u32, verbose: bool) -> Result<Self> {
        let segments = a
            .segments
            .iter()
            .map(|s| SegmentReport {
                segment_id: s.segment.segment_id.clone(),
                length_miles: s.segment.length_miles,
                derailment_speed_mph: s.segment.derailment_speed_mph,
                incident: incident_report(
                    format!("mainline:{}", s.segment.segment_id),
                    &s.incident,
                    s.derailment.by_metric.clone(),
                    verbose.then(|| IncidentDetail {
                        pod: Some(masses(&s.pod)),
                        position_derail_prob: Some(s.profile.derail_prob.clone()),
                        position_release_prob: Some(s.profile.release_prob.clone()),
                        ..base_detail(&s.incident)
                    }),
                ),
                weighted_tc: s.incident.weighted_tc.clone(),
            })
            .collect();
        let arrival_departure = incident_report(
            "arrival_departure".into(),
            &a.ad.incident,
            a.ad.derailment.by_metric.clone(),
            verbose.then(|| IncidentDetail {
                pod: Some(masses(&a.ad.pod)),
                derailed_tanks: Some(masses(&a.ad.derailed_tanks)),
                ..base_detail(&a.ad.incident)
            }),
        );
        let switching = a.switching.as_ref().map(|sw| {
            incident_report(
                "switching".into(),
                &sw.incident,
                BTreeMap::new(),
                verbose.then(|| IncidentDetail {
                    derailed_tanks: Some(masses(&sw.derailed_tanks)),
                    ..base_detail(&sw.incident)
                }),
            )
        });
        Ok(Self {
            train_type: a.train_type,
            length_cars: a.train.length_cars(),
            tank_cars: a.train.tank_count(),
            capacity,
            shipments: a.shipments,
            segments,
            arrival_departure,
            switching,
            yard_quantity: QuantitySummary::of(&a.yard_quantity),
            yard_tc: a.yard_tc.clone(),
            mainline_tc: a.mainline_tc(),
            total_quantity: QuantitySummary::of(&a.total_quantity()?),
            per_shipment_tc: a.per_shipment_tc.clone(),
            demand_tc: a.demand_tc.clone(),
        })
    }
}

impl RiskReport {
    pub fn build(study: &Study, times: &[f64], verbose: bool) -> Result<Self> {
        let s = &study.scenario;
        let options = study
            .analyze(times)?
            .iter()
            .map(|a| OptionReport::from_analysis(a, s.demand.capacity(a.train_type), verbose))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            schema: REPORT_SCHEMA,
            scenario: s.name.clone(),
            tank_cars_required: s.demand.tank_cars_required,
            times_minutes: times.to_vec(),
            mainline_mileage_factor: s.options.mainline_mileage_factor,
            options,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        json(self)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}  (tank cars required: {})", self.scenario, self.tank_cars_required);
        for o in &self.options {
            let _ = writeln!(
                out,
                "\n[{}] {} cars, {} tank cars, capacity {}, shipments {}",
                o.train_type, o.length_cars, o.tank_cars, o.capacity, o.shipments
            );
            let _ = writeln!(out, "  {:<34} {:>12} {:>10} {:>12}", "incident", "P(derail)", "E[rel|D]", "P(release)");
            let rows = o
                .segments
                .iter()
                .map(|s| &s.incident)
                .chain(std::iter::once(&o.arrival_departure))
                .chain(o.switching.as_ref());
            for inc in rows {
                let _ = writeln!(
                    out,
                    "  {:<34} {:>12.4e} {:>10.4} {:>12.4e}",
                    inc.label,
                    inc.derailment_probability,
                    inc.expected_released_tanks_given_derailment,
                    inc.quantity.prob_release
                );
            }
            let q = &o.total_quantity;
            let _ = writeln!(
                out,
                "  gallons per shipment: mean {:.4}, P(>0) {:.4e}, P(>150000) {:.3e}, median|release {}, p95|release {}",
                q.mean_gallons,
                q.prob_release,
                q.overflow_prob,
                fmt_quantile(q.median_gallons_given_release),
                fmt_quantile(q.p95_gallons_given_release)
            );
            let _ = writeln!(out, "  {:>8} {:>14} {:>14} {:>14} {:>14}", "t (min)", "mainline TC", "yard TC", "TC/shipment", "TC demand");
            for i in 0..o.per_shipment_tc.len() {
                let _ = writeln!(
                    out,
                    "  {:>8} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
                    o.per_shipment_tc[i].t,
                    o.mainline_tc[i].value,
                    o.yard_tc[i].value,
                    o.per_shipment_tc[i].value,
                    o.demand_tc[i].value
                );
            }
        }
        out
    }
}

fn fmt_quantile(q: Option<u32>) -> String {
    q.map_or_else(|| "n/a".into(), |g| g.to_string())
}

/// Pretty JSON with a trailing newline.
pub fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::parse("report", e))?;
    s.push('\n');
    Ok(s)
}

/// Demand-level casualties of both options for one model component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentDelta {
    pub component: &'static str,
    pub t: f64,
    pub unit: Option<f64>,
    pub manifest: Option<f64>,
    /// `manifest − unit`, missing components counted as zero.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub schema: &'static str,
    pub scenario: String,
    pub shipments: BTreeMap<TrainType, u32>,
    pub components: Vec<ComponentDelta>,
    /// Option with the lower demand TC at each time; `None` on a tie.
    pub lower_risk: Vec<(f64, Option<TrainType>)>,
}

impl CompareReport {
    pub fn from_report(r: &RiskReport) -> Result<Self> {
        let find = |tt: TrainType| {
            r.options
                .iter()
                .find(|o| o.train_type == tt)
                .ok_or_else(|| Error::validation("report", format!("no {tt} option")))
        };
        let (u, m) = (find(TrainType::Unit)?, find(TrainType::Manifest)?);
        let demand = |o: &OptionReport, i: usize, which: &str| -> Option<f64> {
            let n = o.shipments as f64;
            match which {
                "mainline" => Some(o.mainline_tc[i].value * n),
                "arrival_departure" => Some(o.arrival_departure.tc[i].value * n),
                "switching" => o.switching.as_ref().map(|s| s.tc[i].value * n),
                _ => Some(o.demand_tc[i].value),
            }
        };
        let mut components = Vec::new();
        let mut lower_risk = Vec::new();
        for (i, &t) in r.times_minutes.iter().enumerate() {
            for name in ["mainline", "arrival_departure", "switching", "total"] {
                let (a, b) = (demand(u, i, name), demand(m, i, name));
                components.push(ComponentDelta {
                    component: name,
                    t,
                    unit: a,
                    manifest: b,
                    delta: b.unwrap_or(0.0) - a.unwrap_or(0.0),
                });
            }
            let (a, b) = (u.demand_tc[i].value, m.demand_tc[i].value);
            lower_risk.push((
                t,
                match a.partial_cmp(&b) {
                    Some(std::cmp::Ordering::Less) => Some(TrainType::Unit),
                    Some(std::cmp::Ordering::Greater) => Some(TrainType::Manifest),
                    _ => None,
                },
            ));
        }
        Ok(Self {
            schema: COMPARE_SCHEMA,
            scenario: r.scenario.clone(),
            shipments: [(TrainType::Unit, u.shipments), (TrainType::Manifest, m.shipments)].into(),
            components,
            lower_risk,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        json(self)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario: {}  shipments: unit {}, manifest {}",
            self.scenario, self.shipments[&TrainType::Unit], self.shipments[&TrainType::Manifest]
        );
        let _ = writeln!(out, "{:>8} {:<18} {:>14} {:>14} {:>14}", "t (min)", "component", "unit", "manifest", "delta");
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"));
        for c in &self.components {
            let _ = writeln!(
                out,
                "{:>8} {:<18} {:>14} {:>14} {:>14.6e}",
                c.t,
                c.component,
                cell(c.unit),
                cell(c.manifest),
                c.delta
            );
        }
        for (t, lower) in &self.lower_risk {
            let _ = writeln!(
                out,
                "lower demand TC at t={t}: {}",
                lower.map_or("tie".to_string(), |tt| tt.to_string())
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub train_type: TrainType,
    pub context: RateContext,
    pub metric: RateMetric,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauseRowReport {
    pub context: CauseContext,
    pub train_type: TrainType,
    pub cause_group: String,
    pub percent: f64,
    pub metric_class: MetricClass,
}

/// Echo of every loaded input table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TablesReport {
    pub schema: &'static str,
    pub rates: Vec<RateRow>,
    pub causes: Vec<CauseRowReport>,
    pub quantity: Vec<QuantityRow>,
    pub quantity_probability_sum: f64,
    pub severity: SeverityConfig,
    pub evacuation: Evacuation,
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

impl TablesReport {
    pub fn new(
        rates: &RateTable,
        causes: &CauseTables,
        quantity: &QuantityTable,
        severity: SeverityConfig,
        evacuation: Evacuation,
    ) -> Self {
        Self {
            schema: TABLES_SCHEMA,
            rates: rates
                .entries()
                .map(|((train_type, context, metric), rate)| RateRow {
                    train_type,
                    context,
                    metric,
                    rate,
                })
                .collect(),
            causes: causes
                .iter()
                .flat_map(|t| {
                    t.rows().iter().map(|r| CauseRowReport {
                        context: t.context(),
                        train_type: t.train_type(),
                        cause_group: r.cause_group.clone(),
                        percent: r.percent,
                        metric_class: r.metric_class,
                    })
                })
                .collect(),
            quantity: quantity.rows().to_vec(),
            quantity_probability_sum: quantity.probability_sum(),
            severity,
            evacuation,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        json(self)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::from("derailment rates\n");
        let _ = writeln!(out, "  {:<9} {:<16} {:<16} {:>10}", "train", "context", "metric", "rate");
        for r in &self.rates {
            let _ = writeln!(
                out,
                "  {:<9} {:<16} {:<16} {:>10}",
                r.train_type.as_str(),
                label(&r.context),
                label(&r.metric),
                r.rate
            );
        }
        out.push_str("\ncause shares\n");
        let _ = writeln!(out, "  {:<9} {:<9} {:<40} {:>8} {:<12}", "context", "train", "cause group", "percent", "metric");
        for c in &self.causes {
            let _ = writeln!(
                out,
                "  {:<9} {:<9} {:<40} {:>8} {:<12}",
                c.context.to_string(),
                c.train_type.as_str(),
                c.cause_group,
                c.percent,
                label(&c.metric_class)
            );
        }
        out.push_str("\nlading loss per releasing car\n");
        for q in &self.quantity {
            let _ = writeln!(out, "  {:>7} gal  {}", q.lading_loss_gallons, q.probability);
        }
        let _ = writeln!(out, "  sum {}", self.quantity_probability_sum);
        let s = &self.severity;
        out.push_str("\nseverity\n");
        let _ = writeln!(
            out,
            "  POD beta: mainline unit ({}, {}), mainline manifest ({}, {}), yard manifest ({}, {}), terminal unit ({}, {})",
            s.pod.mainline_unit.alpha,
            s.pod.mainline_unit.beta,
            s.pod.mainline_manifest.alpha,
            s.pod.mainline_manifest.beta,
            s.pod.yard_manifest.alpha,
            s.pod.yard_manifest.beta,
            s.pod.terminal_unit.alpha,
            s.pod.terminal_unit.beta
        );
        let m = &s.z.mainline;
        let _ = writeln!(
            out,
            "  mainline z: {} + {}*speed + {}*remaining + {}*tons_per_car + {}*empty_unit + {}*loaded_unit",
            m.intercept, m.speed, m.remaining_length, m.gross_tons_per_car, m.empty_unit, m.loaded_unit
        );
        let _ = writeln!(out, "  yard manifest z: {} + {}*length", s.z.yard_manifest.intercept, s.z.yard_manifest.length);
        let _ = writeln!(out, "  terminal unit z: {} + {}*length", s.z.terminal_unit.intercept, s.z.terminal_unit.length);
        let y = &s.yard;
        let _ = writeln!(
            out,
            "  yard switching GE (shape, rate): all ({}, {}), flat ({}, {}), hump ({}, {}); max cars {}",
            y.all.shape, y.all.rate, y.flat.shape, y.flat.rate, y.hump.shape, y.hump.rate, y.max_cars
        );
        let _ = writeln!(
            out,
            "\nevacuation landmarks: {} min nearby, {} min hazard zone",
            self.evacuation.nearby_minutes, self.evacuation.hazard_zone_minutes
        );
        out
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<option>_quantity.csv` (gallons, probability) and `<option>_tc.csv`
/// (minute, per-shipment TC, demand TC) for both options, on a one-minute grid.
pub fn write_series(study: &Study, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let grid: Vec<f64> = (0..=120).map(f64::from).collect();
    let mut written = Vec::new();
    for a in study.analyze(&grid)? {
        let name = a.train_type.as_str();
        let q = a.total_quantity()?;
        let mut csv = String::from("gallons,probability\n");
        for (g, m) in q.lattice().iter().enumerate() {
            let _ = writeln!(csv, "{},{m}", g as u32 * LATTICE_GALLONS);
        }
        let _ = writeln!(csv, ">150000,{}", q.overflow());
        let path = dir.join(format!("{name}_quantity.csv"));
        write_file(&path, &csv)?;
        written.push(path);

        let mut csv = String::from("minutes,tc_per_shipment,tc_demand\n");
        for (p, d) in a.per_shipment_tc.iter().zip(&a.demand_tc) {
            let _ = writeln!(csv, "{},{},{}", p.t, p.value, d.value);
        }
        let path = dir.join(format!("{name}_tc.csv"));
        write_file(&path, &csv)?;
        written.push(path);
    }
    Ok(written)
}
