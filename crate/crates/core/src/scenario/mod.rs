//! Scenario domain types and input ingestion.
//!
//! A [`Scenario`] describes one unit-versus-manifest comparison: both train
//! consists, the route, the yard plan, release and demand settings, and
//! model parameters. Data tables (derailment rates, cause shares and
//! consequence curves) are loaded separately by [`tables`] and [`curves`].

pub mod curves;
mod file;
pub mod tables;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::{DiscretePmf, SupportKind, LATTICE_GALLONS};
use crate::severity::SeverityConfig;

pub use curves::{
    ConsequenceCurveSet, CurveKey, Evacuation, LocationClass, MixWeights, SampledCurve, TrackMix,
    WindClass, WindMix,
};
pub use file::{load_scenario, scenario_from_toml, scenario_to_toml};
pub use tables::{
    AdRates, CauseContext, CauseRow, CauseTable, CauseTables, MainlineRates, MetricClass,
    RateTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainType {
    Unit,
    Manifest,
}

impl TrainType {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainType::Unit => "unit",
            TrainType::Manifest => "manifest",
        }
    }
}

impl fmt::Display for TrainType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Car-by-car tank indicator for a train, front to rear.
///
/// The text form is a whitespace-separated list of runs: `T` marks a tank
/// car and `N` any other car, each optionally followed by a repeat count,
/// e.g. `"N30 T20 N30"`. Runs of bare letters such as `"NTTN"` are also
/// accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Consist(Vec<bool>);

impl Consist {
    pub fn from_flags(flags: Vec<bool>) -> Self {
        Self(flags)
    }

    pub fn all_tank(cars: usize) -> Self {
        Self(vec![true; cars])
    }

    /// `leading` non-tank cars, then a block of `tanks`, then `trailing` non-tank cars.
    pub fn block(leading: usize, tanks: usize, trailing: usize) -> Self {
        let mut flags = vec![false; leading];
        flags.extend(std::iter::repeat(true).take(tanks));
        flags.extend(std::iter::repeat(false).take(trailing));
        Self(flags)
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tank_count(&self) -> usize {
        self.0.iter().filter(|t| **t).count()
    }

    /// Whether the car at 1-based `position` is a tank car.
    pub fn is_tank(&self, position: usize) -> bool {
        position >= 1 && self.0.get(position - 1).copied().unwrap_or(false)
    }
}

impl FromStr for Consist {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut flags = Vec::new();
        for token in s.split_whitespace() {
            let (letters, digits): (String, String) = {
                let split = token
                    .find(|c: char| c.is_ascii_digit())
                    .unwrap_or(token.len());
                (token[..split].to_string(), token[split..].to_string())
            };
            let parse_letter = |c: char| match c.to_ascii_uppercase() {
                'T' => Ok(true),
                'N' => Ok(false),
                other => Err(format!("unknown car code `{other}` (expected T or N)")),
            };
            if digits.is_empty() {
                for c in letters.chars() {
                    flags.push(parse_letter(c)?);
                }
            } else {
                let mut chars = letters.chars();
                let (Some(c), None) = (chars.next(), chars.next()) else {
                    return Err(format!("run `{token}` must be a single letter and a count"));
                };
                let n: usize = digits
                    .parse()
                    .map_err(|_| format!("bad repeat count in `{token}`"))?;
                let tank = parse_letter(c)?;
                flags.extend(std::iter::repeat(tank).take(n));
            }
        }
        Ok(Self(flags))
    }
}

impl fmt::Display for Consist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut i = 0;
        while i < self.0.len() {
            let tank = self.0[i];
            let run = self.0[i..].iter().take_while(|t| **t == tank).count();
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{}{}", if tank { 'T' } else { 'N' }, run)?;
            first = false;
            i += run;
        }
        Ok(())
    }
}

impl Serialize for Consist {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Consist {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Flags(Vec<bool>),
        }
        match Repr::deserialize(d)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Flags(flags) => Ok(Consist(flags)),
        }
    }
}

/// One train in a service option.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    train_type: TrainType,
    length_cars: usize,
    gross_tonnage: f64,
    avg_gross_tons_per_car: f64,
    loaded: bool,
    consist: Consist,
}

impl TrainConfig {
    /// Validates and builds a train. `avg_gross_tons_per_car` defaults to
    /// `gross_tonnage / length_cars`. Manifest trains must not be flagged loaded.
    pub fn new(
        train_type: TrainType,
        length_cars: usize,
        gross_tonnage: f64,
        avg_gross_tons_per_car: Option<f64>,
        loaded: bool,
        consist: Consist,
    ) -> Result<Self> {
        if length_cars == 0 {
            return Err(Error::validation("length_cars", "must be at least 1"));
        }
        if !(gross_tonnage.is_finite() && gross_tonnage > 0.0) {
            return Err(Error::validation("gross_tonnage", "must be positive"));
        }
        let gt = match avg_gross_tons_per_car {
            Some(v) if !(v.is_finite() && v > 0.0) => {
                return Err(Error::validation(
                    "avg_gross_tons_per_car",
                    "must be positive",
                ))
            }
            Some(v) => v,
            None => gross_tonnage / length_cars as f64,
        };
        if consist.len() != length_cars {
            return Err(Error::validation(
                "consist",
                format!(
                    "describes {} cars but length_cars is {length_cars}",
                    consist.len()
                ),
            ));
        }
        if train_type == TrainType::Manifest && loaded {
            return Err(Error::validation(
                "loaded",
                "the loaded/empty unit-train flag does not apply to manifest trains",
            ));
        }
        Ok(Self {
            train_type,
            length_cars,
            gross_tonnage,
            avg_gross_tons_per_car: gt,
            loaded,
            consist,
        })
    }

    pub fn train_type(&self) -> TrainType {
        self.train_type
    }

    /// Railcars excluding locomotives.
    pub fn length_cars(&self) -> usize {
        self.length_cars
    }

    pub fn gross_tonnage(&self) -> f64 {
        self.gross_tonnage
    }

    pub fn avg_gross_tons_per_car(&self) -> f64 {
        self.avg_gross_tons_per_car
    }

    pub fn loaded(&self) -> bool {
        self.loaded
    }

    pub fn consist(&self) -> &Consist {
        &self.consist
    }

    pub fn tank_count(&self) -> usize {
        self.consist.tank_count()
    }

    /// Loaded-unit-train indicator (1 or 0).
    pub fn lut(&self) -> f64 {
        if self.train_type == TrainType::Unit && self.loaded {
            1.0
        } else {
            0.0
        }
    }

    /// Empty-unit-train indicator (1 or 0).
    pub fn eut(&self) -> f64 {
        if self.train_type == TrainType::Unit && !self.loaded {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSegment {
    pub segment_id: String,
    pub length_miles: f64,
    /// Speed used by the mainline severity model, taken as the operating speed.
    pub derailment_speed_mph: f64,
}

impl RouteSegment {
    pub fn new(id: impl Into<String>, length_miles: f64, derailment_speed_mph: f64) -> Self {
        Self {
            segment_id: id.into(),
            length_miles,
            derailment_speed_mph,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.segment_id.trim().is_empty() {
            return Err(Error::validation("segment_id", "must not be empty"));
        }
        if !(self.length_miles.is_finite() && self.length_miles > 0.0) {
            return Err(Error::validation("length_miles", "must be positive"));
        }
        if !(self.derailment_speed_mph.is_finite() && self.derailment_speed_mph > 0.0) {
            return Err(Error::validation("derailment_speed_mph", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YardType {
    All,
    Flat,
    Hump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchingApproach {
    /// The tank block is switched as its own cut.
    SwitchedAlone,
    /// The tank block is switched behind a buffer of non-tank cars.
    SwitchedEnMasse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YardPlan {
    pub intermediate_yards: u32,
    #[serde(default = "default_yard_type")]
    pub yard_type: YardType,
    #[serde(default = "default_switching")]
    pub switching_approach: SwitchingApproach,
}

fn default_yard_type() -> YardType {
    YardType::All
}

fn default_switching() -> SwitchingApproach {
    SwitchingApproach::SwitchedAlone
}

impl YardPlan {
    /// Arrival/departure events per shipment: origin, destination, and an
    /// arrival plus a departure at every intermediate yard.
    pub fn ad_events(&self) -> u32 {
        2 + 2 * self.intermediate_yards
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityRow {
    pub lading_loss_gallons: u32,
    pub probability: f64,
}

/// Distribution of gallons lost by a single releasing tank car.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuantityTable {
    rows: Vec<QuantityRow>,
}

impl Default for QuantityTable {
    /// Lading loss for a non-pressurized 30,000-gallon tank car.
    fn default() -> Self {
        let rows = [
            (750, 0.336),
            (3_750, 0.095),
            (10_500, 0.133),
            (19_500, 0.123),
            (27_000, 0.313),
        ]
        .into_iter()
        .map(|(lading_loss_gallons, probability)| QuantityRow {
            lading_loss_gallons,
            probability,
        })
        .collect();
        Self { rows }
    }
}

impl QuantityTable {
    pub fn new(rows: Vec<QuantityRow>) -> Result<Self> {
        let table = Self { rows };
        table.validate()?;
        Ok(table)
    }

    pub fn rows(&self) -> &[QuantityRow] {
        &self.rows
    }

    pub fn probability_sum(&self) -> f64 {
        self.rows.iter().map(|r| r.probability).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::validation("quantity_table", "must have at least one row"));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.lading_loss_gallons == 0 || row.lading_loss_gallons % LATTICE_GALLONS != 0 {
                return Err(Error::validation(
                    format!("quantity_table[{i}].lading_loss_gallons"),
                    format!(
                        "{} is not a positive multiple of {LATTICE_GALLONS}",
                        row.lading_loss_gallons
                    ),
                ));
            }
            if !(row.probability.is_finite() && row.probability >= 0.0) {
                return Err(Error::validation(
                    format!("quantity_table[{i}].probability"),
                    "must be non-negative",
                ));
            }
        }
        let sum = self.probability_sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(
                "quantity_table",
                format!("probabilities sum to {sum}, expected 1"),
            ));
        }
        Ok(())
    }

    /// Per-car release quantity on the 750-gallon lattice.
    pub fn lattice_pmf(&self) -> DiscretePmf {
        let len = self
            .rows
            .iter()
            .map(|r| (r.lading_loss_gallons / LATTICE_GALLONS) as usize)
            .max()
            .unwrap_or(0)
            + 1;
        let mut masses = vec![0.0; len];
        for row in &self.rows {
            masses[(row.lading_loss_gallons / LATTICE_GALLONS) as usize] += row.probability;
        }
        DiscretePmf::from_normalized(SupportKind::GallonLattice750, masses)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReleaseConfig {
    /// Base conditional probability that a derailed tank car releases.
    pub cpr: f64,
    /// Multiplier on `cpr` for yard and terminal incidents.
    pub yard_speed_factor: f64,
    pub quantity_table: QuantityTable,
}

pub const DEFAULT_YARD_SPEED_FACTOR: f64 = 0.35;

impl ReleaseConfig {
    pub fn new(cpr: f64, yard_speed_factor: f64, quantity_table: QuantityTable) -> Result<Self> {
        if !(0.0..=1.0).contains(&cpr) {
            return Err(Error::validation("cpr", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&yard_speed_factor) {
            return Err(Error::validation("yard_speed_factor", "must lie in [0, 1]"));
        }
        quantity_table.validate()?;
        Ok(Self {
            cpr,
            yard_speed_factor,
            quantity_table,
        })
    }

    /// Release probability of a derailed tank car in yard/terminal incidents.
    pub fn yard_release_prob(&self) -> f64 {
        self.yard_speed_factor * self.cpr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demand {
    pub tank_cars_required: u32,
    pub unit_capacity: u32,
    pub manifest_capacity: u32,
}

impl Demand {
    fn validate(&self) -> Result<()> {
        if self.tank_cars_required == 0 {
            return Err(Error::validation("tank_cars_required", "must be at least 1"));
        }
        if self.unit_capacity == 0 {
            return Err(Error::validation("unit_capacity", "must be at least 1"));
        }
        if self.manifest_capacity == 0 {
            return Err(Error::validation("manifest_capacity", "must be at least 1"));
        }
        Ok(())
    }

    pub fn capacity(&self, train_type: TrainType) -> u32 {
        match train_type {
            TrainType::Unit => self.unit_capacity,
            TrainType::Manifest => self.manifest_capacity,
        }
    }

    /// Shipments needed to move the demand: ⌈δ / c⌉.
    pub fn shipments(&self, train_type: TrainType) -> u32 {
        self.tank_cars_required.div_ceil(self.capacity(train_type))
    }
}

/// Where the consequence curves come from and how they are mixed.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSource {
    /// CSV path, relative paths resolve against the scenario file's directory.
    pub file: PathBuf,
    pub mix: MixWeights,
    pub evacuation: Evacuation,
}

/// Optional table overrides; relative paths resolve against the scenario file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSources {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub causes: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    /// Multiply each segment's casualties by its mileage again when
    /// aggregating per demand. Off by default: segment derailment
    /// probabilities already scale with mileage.
    pub mainline_mileage_factor: bool,
}

/// A validated comparison scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub unit: TrainConfig,
    pub manifest: TrainConfig,
    pub route: Vec<RouteSegment>,
    pub yards: YardPlan,
    pub release: ReleaseConfig,
    pub demand: Demand,
    pub curves: CurveSource,
    pub severity: SeverityConfig,
    pub tables: TableSources,
    pub options: ModelOptions,
}

/// Largest tank block analysed for yard switching.
pub const MAX_SWITCHED_TANK_BLOCK: usize = 20;

impl Scenario {
    pub fn train(&self, train_type: TrainType) -> &TrainConfig {
        match train_type {
            TrainType::Unit => &self.unit,
            TrainType::Manifest => &self.manifest,
        }
    }

    /// Cross-field checks run after every field has been parsed.
    pub fn validate(&self) -> Result<()> {
        for (train, path) in [(&self.unit, "train.unit"), (&self.manifest, "train.manifest")] {
            if train.tank_count() == 0 {
                return Err(Error::validation(
                    format!("{path}.consist"),
                    "contains no tank cars",
                ));
            }
        }
        if self.unit.train_type() != TrainType::Unit {
            return Err(Error::validation("train.unit", "is not a unit train"));
        }
        if self.manifest.train_type() != TrainType::Manifest {
            return Err(Error::validation("train.manifest", "is not a manifest train"));
        }
        if self.manifest.tank_count() > MAX_SWITCHED_TANK_BLOCK {
            return Err(Error::validation(
                "train.manifest.consist",
                format!(
                    "{} tank cars; yard switching analysis supports blocks of at most {MAX_SWITCHED_TANK_BLOCK}",
                    self.manifest.tank_count()
                ),
            ));
        }
        if self.route.is_empty() {
            return Err(Error::validation("route.segments", "at least one segment is required"));
        }
        for (i, seg) in self.route.iter().enumerate() {
            seg.validate().map_err(|e| prefix(e, &format!("route.segments[{i}]")))?;
            if self.route[..i].iter().any(|s| s.segment_id == seg.segment_id) {
                return Err(Error::validation(
                    format!("route.segments[{i}].segment_id"),
                    format!("duplicate segment id `{}`", seg.segment_id),
                ));
            }
        }
        self.demand.validate().map_err(|e| prefix(e, "demand"))?;
        self.curves.mix.validate().map_err(|e| prefix(e, "curves"))?;
        self.curves
            .evacuation
            .validate()
            .map_err(|e| prefix(e, "curves.evacuation"))?;
        self.severity.validate().map_err(|e| prefix(e, "severity"))?;
        Ok(())
    }
}

/// Prepends a section path to a validation error's field.
pub(crate) fn prefix(err: Error, path: &str) -> Error {
    match err {
        Error::Validation { field, message } => Error::Validation {
            field: format!("{path}.{field}"),
            message,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consist_text_forms() {
        let c: Consist = "N2 T3 n1".parse().unwrap();
        assert_eq!(c.flags(), &[false, false, true, true, true, false]);
        assert_eq!(c.to_string(), "N2 T3 N1");
        assert_eq!(c.tank_count(), 3);
        assert!(c.is_tank(3) && !c.is_tank(1) && !c.is_tank(0) && !c.is_tank(7));

        let bare: Consist = "NTTN".parse().unwrap();
        assert_eq!(bare, Consist::block(1, 2, 1));
        assert!("X3".parse::<Consist>().is_err());
        assert!("TN3".parse::<Consist>().is_err());
    }

    #[test]
    fn gross_tons_per_car_defaults_to_ratio() {
        let t = TrainConfig::new(TrainType::Unit, 100, 14_300.0, None, true, Consist::all_tank(100))
            .unwrap();
        assert_eq!(t.avg_gross_tons_per_car(), 143.0);
        assert_eq!((t.lut(), t.eut()), (1.0, 0.0));
        assert_eq!(t.tank_count(), 100);
    }

    #[test]
    fn consist_length_must_match() {
        let err = TrainConfig::new(TrainType::Unit, 100, 1.0, None, true, Consist::all_tank(99))
            .unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "consist"));
    }

    #[test]
    fn manifest_cannot_be_loaded_unit() {
        assert!(
            TrainConfig::new(TrainType::Manifest, 3, 1.0, None, true, Consist::all_tank(3))
                .is_err()
        );
        let m = TrainConfig::new(TrainType::Manifest, 3, 1.0, None, false, Consist::all_tank(3))
            .unwrap();
        assert_eq!((m.lut(), m.eut()), (0.0, 0.0));
    }

    #[test]
    fn ad_events_follow_yard_count() {
        for m in 0..=5 {
            let plan = YardPlan {
                intermediate_yards: m,
                yard_type: YardType::All,
                switching_approach: SwitchingApproach::SwitchedAlone,
            };
            assert_eq!(plan.ad_events(), 2 + 2 * m);
        }
    }

    #[test]
    fn shipments_use_ceiling() {
        let d = Demand {
            tank_cars_required: 250,
            unit_capacity: 100,
            manifest_capacity: 20,
        };
        assert_eq!(d.shipments(TrainType::Unit), 3);
        assert_eq!(d.shipments(TrainType::Manifest), 13);
        let exact = Demand {
            tank_cars_required: 100,
            ..d
        };
        assert_eq!(exact.shipments(TrainType::Unit), 1);
    }

    #[test]
    fn default_quantity_table() {
        let t = QuantityTable::default();
        assert_eq!(t.probability_sum(), 1.0);
        let p = t.lattice_pmf();
        assert_eq!(p.mass(1), 0.336);
        assert_eq!(p.mass(5), 0.095);
        assert_eq!(p.mass(14), 0.133);
        assert_eq!(p.mass(26), 0.123);
        assert_eq!(p.mass(36), 0.313);
    }

    #[test]
    fn quantity_table_rejects_off_lattice() {
        let rows = vec![QuantityRow {
            lading_loss_gallons: 1000,
            probability: 1.0,
        }];
        assert!(QuantityTable::new(rows).is_err());
    }
}
