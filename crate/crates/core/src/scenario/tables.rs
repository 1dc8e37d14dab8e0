//! Derailment-rate and cause-share tables.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainType, YardType};
use crate::error::{Error, Result};

pub const DEFAULT_RATES_CSV: &str = include_str!("../../data/rates.csv");
pub const DEFAULT_CAUSES_CSV: &str = include_str!("../../data/causes.csv");

/// Cause-table percentages must total 100 within this tolerance.
pub const CAUSE_PERCENT_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateContext {
    Mainline,
    /// Manifest arrivals/departures and switching, all yard types.
    Yard,
    YardFlat,
    YardHump,
    /// Unit-train arrivals/departures at terminals.
    Terminal,
    /// Loaded unit trains at terminals.
    TerminalLoaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMetric {
    /// Per million train-miles.
    TrainMiles,
    /// Per billion gross ton-miles.
    GrossTonMiles,
    /// Per billion car-miles.
    CarMiles,
    /// Per million train arrivals/departures.
    TrainAd,
    /// Per billion car arrivals/departures.
    CarAd,
    /// Per million cars processed in yards.
    CarsProcessed,
}

impl RateMetric {
    fn is_mainline(self) -> bool {
        matches!(
            self,
            RateMetric::TrainMiles | RateMetric::GrossTonMiles | RateMetric::CarMiles
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MainlineRates {
    pub per_million_train_miles: f64,
    pub per_billion_gross_ton_miles: f64,
    pub per_billion_car_miles: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdRates {
    pub per_million_train_ad: f64,
    pub per_billion_car_ad: f64,
}

#[derive(Debug, Deserialize)]
struct RateRecord {
    train_type: TrainType,
    context: RateContext,
    metric: RateMetric,
    rate: f64,
}

/// Derailment rates keyed by train type, operating context and traffic metric.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateTable {
    rates: BTreeMap<(TrainType, RateContext, RateMetric), f64>,
}

impl RateTable {
    /// The shipped default table.
    pub fn builtin() -> Self {
        Self::from_csv_reader(DEFAULT_RATES_CSV.as_bytes(), "builtin rates.csv")
            .expect("builtin rate table is valid")
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Adds or replaces one rate, checking the same rules as CSV ingestion.
    pub fn with_rate(
        mut self,
        train_type: TrainType,
        context: RateContext,
        metric: RateMetric,
        rate: f64,
    ) -> Result<Self> {
        check_rate(train_type, context, metric, rate)?;
        self.rates.insert((train_type, context, metric), rate);
        Ok(self)
    }

    pub fn from_csv_reader<R: Read>(reader: R, origin: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rates = BTreeMap::new();
        for (i, rec) in rdr.deserialize::<RateRecord>().enumerate() {
            let rec = rec.map_err(|e| Error::parse(origin, e))?;
            let field = format!("{origin}: record {}", i + 1);
            check_rate(rec.train_type, rec.context, rec.metric, rec.rate)
                .map_err(|e| super::prefix(e, &field))?;
            if rates
                .insert((rec.train_type, rec.context, rec.metric), rec.rate)
                .is_some()
            {
                return Err(Error::validation(field, "duplicate rate entry"));
            }
        }
        Ok(Self { rates })
    }

    pub fn get(&self, train_type: TrainType, context: RateContext, metric: RateMetric) -> Option<f64> {
        self.rates.get(&(train_type, context, metric)).copied()
    }

    fn require(&self, train_type: TrainType, context: RateContext, metric: RateMetric) -> Result<f64> {
        self.get(train_type, context, metric).ok_or_else(|| {
            Error::validation(
                "rates",
                format!("no {metric:?} rate for {train_type} trains in context {context:?}"),
            )
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = ((TrainType, RateContext, RateMetric), f64)> + '_ {
        self.rates.iter().map(|(k, v)| (*k, *v))
    }

    pub fn mainline(&self, train_type: TrainType) -> Result<MainlineRates> {
        Ok(MainlineRates {
            per_million_train_miles: self.require(train_type, RateContext::Mainline, RateMetric::TrainMiles)?,
            per_billion_gross_ton_miles: self.require(
                train_type,
                RateContext::Mainline,
                RateMetric::GrossTonMiles,
            )?,
            per_billion_car_miles: self.require(train_type, RateContext::Mainline, RateMetric::CarMiles)?,
        })
    }

    /// Context used for arrival/departure rates of `train`.
    ///
    /// Manifest trains use the row for their yard type. Loaded unit trains use
    /// the loaded-unit row when the table has one, otherwise the all-unit row.
    pub fn ad_context(&self, train: &TrainConfig, yard_type: YardType) -> RateContext {
        match train.train_type() {
            TrainType::Manifest => yard_context(yard_type),
            TrainType::Unit => {
                let loaded_present = self
                    .get(TrainType::Unit, RateContext::TerminalLoaded, RateMetric::TrainAd)
                    .is_some();
                if train.loaded() && loaded_present {
                    RateContext::TerminalLoaded
                } else {
                    RateContext::Terminal
                }
            }
        }
    }

    pub fn ad(&self, train: &TrainConfig, yard_type: YardType) -> Result<AdRates> {
        let ctx = self.ad_context(train, yard_type);
        let tt = train.train_type();
        Ok(AdRates {
            per_million_train_ad: self.require(tt, ctx, RateMetric::TrainAd)?,
            per_billion_car_ad: self.require(tt, ctx, RateMetric::CarAd)?,
        })
    }

    /// Yard switching derailments per million cars processed; manifest trains only.
    pub fn switching(&self, train_type: TrainType, yard_type: YardType) -> Result<f64> {
        match train_type {
            TrainType::Unit => Err(Error::NotApplicable("yard switching")),
            TrainType::Manifest => {
                self.require(TrainType::Manifest, yard_context(yard_type), RateMetric::CarsProcessed)
            }
        }
    }
}

fn yard_context(yard_type: YardType) -> RateContext {
    match yard_type {
        YardType::All => RateContext::Yard,
        YardType::Flat => RateContext::YardFlat,
        YardType::Hump => RateContext::YardHump,
    }
}

fn check_rate(train_type: TrainType, context: RateContext, metric: RateMetric, rate: f64) -> Result<()> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::validation("rate", format!("{rate} must be non-negative")));
    }
    let ok = match context {
        RateContext::Mainline => metric.is_mainline(),
        RateContext::Yard | RateContext::YardFlat | RateContext::YardHump => {
            train_type == TrainType::Manifest && !metric.is_mainline()
        }
        RateContext::Terminal | RateContext::TerminalLoaded => {
            train_type == TrainType::Unit
                && matches!(metric, RateMetric::TrainAd | RateMetric::CarAd)
        }
    };
    if ok {
        Ok(())
    } else {
        Err(Error::validation(
            "metric",
            format!("{metric:?} is not a valid metric for {train_type} trains in context {context:?}"),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauseContext {
    Mainline,
    /// Arrival/departure events in yards and terminals.
    Ad,
}

impl fmt::Display for CauseContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CauseContext::Mainline => "mainline",
            CauseContext::Ad => "ad",
        })
    }
}

/// Traffic metric a cause's derailment rate scales with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricClass {
    TrainMiles,
    TonMiles,
    CarMiles,
    TrainEvents,
    CarEvents,
}

impl MetricClass {
    fn valid_for(self, context: CauseContext) -> bool {
        match context {
            CauseContext::Mainline => matches!(
                self,
                MetricClass::TrainMiles | MetricClass::TonMiles | MetricClass::CarMiles
            ),
            CauseContext::Ad => matches!(self, MetricClass::TrainEvents | MetricClass::CarEvents),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauseRow {
    pub cause_group: String,
    pub percent: f64,
    pub metric_class: MetricClass,
}

impl CauseRow {
    pub fn new(cause_group: impl Into<String>, percent: f64, metric_class: MetricClass) -> Self {
        Self {
            cause_group: cause_group.into(),
            percent,
            metric_class,
        }
    }

    /// Fraction of derailments due to this cause.
    pub fn share(&self) -> f64 {
        self.percent / 100.0
    }
}

/// One cause-share table for a context and train type.
#[derive(Debug, Clone, PartialEq)]
pub struct CauseTable {
    context: CauseContext,
    train_type: TrainType,
    rows: Vec<CauseRow>,
}

impl CauseTable {
    pub fn new(context: CauseContext, train_type: TrainType, rows: Vec<CauseRow>) -> Result<Self> {
        let name = format!("{context}/{train_type}");
        for row in &rows {
            if !(row.percent.is_finite() && (0.0..=100.0).contains(&row.percent)) {
                return Err(Error::validation(
                    format!("{name}: {}", row.cause_group),
                    "percent must lie in [0, 100]",
                ));
            }
            if !row.metric_class.valid_for(context) {
                return Err(Error::validation(
                    format!("{name}: {}", row.cause_group),
                    format!("metric class {:?} is not valid in context {context}", row.metric_class),
                ));
            }
        }
        let table = Self {
            context,
            train_type,
            rows,
        };
        let sum = table.total_percent();
        if (sum - 100.0).abs() > CAUSE_PERCENT_TOLERANCE {
            return Err(Error::Checksum { table: name, sum });
        }
        Ok(table)
    }

    pub fn context(&self) -> CauseContext {
        self.context
    }

    pub fn train_type(&self) -> TrainType {
        self.train_type
    }

    pub fn rows(&self) -> &[CauseRow] {
        &self.rows
    }

    pub fn total_percent(&self) -> f64 {
        self.rows.iter().map(|r| r.percent).sum()
    }

    /// Summed percent per metric class.
    pub fn percent_by_class(&self) -> BTreeMap<MetricClass, f64> {
        let mut out = BTreeMap::new();
        for row in &self.rows {
            *out.entry(row.metric_class).or_insert(0.0) += row.percent;
        }
        out
    }
}

#[derive(Debug, Deserialize)]
struct CauseRecord {
    context: CauseContext,
    train_type: TrainType,
    cause_group: String,
    percent: f64,
    metric_class: MetricClass,
}

/// All cause tables, one per (context, train type).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CauseTables {
    tables: BTreeMap<(CauseContext, TrainType), CauseTable>,
}

impl CauseTables {
    pub fn builtin() -> Self {
        Self::from_csv_reader(DEFAULT_CAUSES_CSV.as_bytes(), "builtin causes.csv")
            .expect("builtin cause tables are valid")
    }

    pub fn from_tables(tables: impl IntoIterator<Item = CauseTable>) -> Self {
        Self {
            tables: tables
                .into_iter()
                .map(|t| ((t.context, t.train_type), t))
                .collect(),
        }
    }

    pub fn from_csv_reader<R: Read>(reader: R, origin: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut grouped: BTreeMap<(CauseContext, TrainType), Vec<CauseRow>> = BTreeMap::new();
        for rec in rdr.deserialize::<CauseRecord>() {
            let rec = rec.map_err(|e| Error::parse(origin, e))?;
            grouped
                .entry((rec.context, rec.train_type))
                .or_default()
                .push(CauseRow::new(rec.cause_group, rec.percent, rec.metric_class));
        }
        let mut tables = BTreeMap::new();
        for ((ctx, tt), rows) in grouped {
            tables.insert((ctx, tt), CauseTable::new(ctx, tt, rows)?);
        }
        Ok(Self { tables })
    }

    pub fn get(&self, context: CauseContext, train_type: TrainType) -> Result<&CauseTable> {
        self.tables.get(&(context, train_type)).ok_or_else(|| {
            Error::validation(
                "causes",
                format!("no {context} cause table for {train_type} trains"),
            )
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &CauseTable> {
        self.tables.values()
    }
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a rates CSV (`train_type, context, metric, rate`).
pub fn load_rate_tables(path: &Path) -> Result<RateTable> {
    RateTable::from_csv_reader(open(path)?, &path.display().to_string())
}

/// Loads a cause CSV (`context, train_type, cause_group, percent, metric_class`).
pub fn load_cause_tables(path: &Path) -> Result<CauseTables> {
    CauseTables::from_csv_reader(open(path)?, &path.display().to_string())
}
