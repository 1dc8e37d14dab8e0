//! TOML scenario files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    prefix, Consist, CurveSource, Demand, Evacuation, MixWeights, ModelOptions, QuantityTable,
    ReleaseConfig, RouteSegment, Scenario, TableSources, TrackMix, TrainConfig, TrainType,
    WindMix, YardPlan, DEFAULT_YARD_SPEED_FACTOR,
};
use crate::error::{Error, Result};
use crate::severity::SeverityConfig;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    train: RawTrains,
    route: RawRoute,
    yards: YardPlan,
    release: RawRelease,
    demand: Demand,
    curves: RawCurves,
    #[serde(default)]
    severity: SeverityConfig,
    #[serde(default)]
    tables: TableSources,
    #[serde(default)]
    options: ModelOptions,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrains {
    unit: RawTrain,
    manifest: RawTrain,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    length_cars: usize,
    gross_tonnage: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    avg_gross_tons_per_car: Option<f64>,
    #[serde(default)]
    loaded: bool,
    consist: Consist,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoute {
    segments: Vec<RouteSegment>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRelease {
    cpr: f64,
    #[serde(default = "default_yard_speed_factor")]
    yard_speed_factor: f64,
    #[serde(default)]
    quantity_table: QuantityTable,
}

fn default_yard_speed_factor() -> f64 {
    DEFAULT_YARD_SPEED_FACTOR
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurves {
    file: PathBuf,
    #[serde(default)]
    track: TrackMix,
    #[serde(default)]
    wind: WindMix,
    #[serde(default)]
    evacuation: Evacuation,
}

fn train_from_raw(raw: RawTrain, train_type: TrainType) -> Result<TrainConfig> {
    let path = format!("train.{train_type}");
    if train_type == TrainType::Manifest && raw.loaded {
        return Err(Error::validation(
            format!("{path}.loaded"),
            "only unit trains carry the loaded flag",
        ));
    }
    TrainConfig::new(
        train_type,
        raw.length_cars,
        raw.gross_tonnage,
        raw.avg_gross_tons_per_car,
        raw.loaded,
        raw.consist,
    )
    .map_err(|e| prefix(e, &path))
}

fn train_to_raw(t: &TrainConfig) -> RawTrain {
    RawTrain {
        length_cars: t.length_cars(),
        gross_tonnage: t.gross_tonnage(),
        avg_gross_tons_per_car: Some(t.avg_gross_tons_per_car()),
        loaded: t.loaded(),
        consist: t.consist().clone(),
    }
}

impl TryFrom<RawScenario> for Scenario {
    type Error = Error;

    fn try_from(raw: RawScenario) -> Result<Self> {
        let unit = train_from_raw(raw.train.unit, TrainType::Unit)?;
        let manifest = train_from_raw(raw.train.manifest, TrainType::Manifest)?;
        let release = ReleaseConfig::new(
            raw.release.cpr,
            raw.release.yard_speed_factor,
            raw.release.quantity_table,
        )
        .map_err(|e| prefix(e, "release"))?;
        let scenario = Scenario {
            name: raw.name,
            unit,
            manifest,
            route: raw.route.segments,
            yards: raw.yards,
            release,
            demand: raw.demand,
            curves: CurveSource {
                file: raw.curves.file,
                mix: MixWeights {
                    track: raw.curves.track,
                    wind: raw.curves.wind,
                },
                evacuation: raw.curves.evacuation,
            },
            severity: raw.severity,
            tables: raw.tables,
            options: raw.options,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

impl From<&Scenario> for RawScenario {
    fn from(s: &Scenario) -> Self {
        RawScenario {
            name: s.name.clone(),
            train: RawTrains {
                unit: train_to_raw(&s.unit),
                manifest: train_to_raw(&s.manifest),
            },
            route: RawRoute {
                segments: s.route.clone(),
            },
            yards: s.yards,
            release: RawRelease {
                cpr: s.release.cpr,
                yard_speed_factor: s.release.yard_speed_factor,
                quantity_table: s.release.quantity_table.clone(),
            },
            demand: s.demand,
            curves: RawCurves {
                file: s.curves.file.clone(),
                track: s.curves.mix.track,
                wind: s.curves.mix.wind,
                evacuation: s.curves.evacuation,
            },
            severity: s.severity,
            tables: s.tables.clone(),
            options: s.options,
        }
    }
}

/// Parses and validates scenario TOML. `origin` names the source in errors.
pub fn scenario_from_toml(text: &str) -> Result<Scenario> {
    parse(text, "scenario")
}

fn parse(text: &str, origin: &str) -> Result<Scenario> {
    let de = toml::Deserializer::new(text);
    let raw: RawScenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().trim().to_string();
        if path.is_empty() || path == "." {
            Error::parse(origin, msg)
        } else {
            Error::Validation {
                field: path,
                message: msg,
            }
        }
    })?;
    Scenario::try_from(raw)
}

pub fn scenario_to_toml(scenario: &Scenario) -> Result<String> {
    toml::to_string(&RawScenario::from(scenario)).map_err(|e| Error::parse("scenario", e))
}

/// Reads a scenario file. Relative paths inside it are kept as written;
/// resolve them against the file's directory.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, &path.display().to_string())
}
