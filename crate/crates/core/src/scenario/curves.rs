//! Consequence curves: casualties versus evacuation response time for each
//! release-size anchor, location class and wind class.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Release sizes (gallons) at which curves are sampled: one, three and five full cars.
pub const CURVE_ANCHORS_GALLONS: [u32; 3] = [30_000, 90_000, 150_000];

/// Response-time domain of every curve, in minutes.
pub const MAX_RESPONSE_MINUTES: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationClass {
    Urban,
    Suburban,
    Rural,
    /// Curves already averaged over locations.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindClass {
    Low,
    Medium,
    High,
    /// Curves already averaged over wind classes.
    Mixed,
}

impl fmt::Display for LocationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LocationClass::Urban => "urban",
            LocationClass::Suburban => "suburban",
            LocationClass::Rural => "rural",
            LocationClass::Mixed => "mixed",
        })
    }
}

impl fmt::Display for WindClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindClass::Low => "low",
            WindClass::Medium => "medium",
            WindClass::High => "high",
            WindClass::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CurveKey {
    pub location: LocationClass,
    pub wind: WindClass,
    pub anchor_gallons: u32,
}

/// A casualty curve sampled on a time grid, linear between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SampledCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::validation(
                "curve",
                "needs at least two (time, casualties) samples",
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("curve.time_min", "times must be strictly increasing"));
        }
        if times[0] != 0.0 || *times.last().unwrap() != MAX_RESPONSE_MINUTES {
            return Err(Error::validation(
                "curve.time_min",
                format!("samples must span exactly [0, {MAX_RESPONSE_MINUTES}] minutes"),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation("curve.casualties", "must be non-negative"));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation on the time grid; `t` must lie within [0, 120].
    pub fn value_at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|s| *s <= t);
        if i == 0 {
            return self.values[0];
        }
        if i == self.times.len() {
            return *self.values.last().unwrap();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackMix {
    pub urban: f64,
    pub suburban: f64,
    pub rural: f64,
}

impl Default for TrackMix {
    fn default() -> Self {
        Self {
            urban: 0.01,
            suburban: 0.04,
            rural: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindMix {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl Default for WindMix {
    fn default() -> Self {
        Self {
            low: 0.50,
            medium: 0.49,
            high: 0.01,
        }
    }
}

/// Route and weather characterization used to average the curves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixWeights {
    pub track: TrackMix,
    pub wind: WindMix,
}

impl MixWeights {
    pub fn location_weight(&self, loc: LocationClass) -> f64 {
        match loc {
            LocationClass::Urban => self.track.urban,
            LocationClass::Suburban => self.track.suburban,
            LocationClass::Rural => self.track.rural,
            LocationClass::Mixed => 1.0,
        }
    }

    pub fn wind_weight(&self, wind: WindClass) -> f64 {
        match wind {
            WindClass::Low => self.wind.low,
            WindClass::Medium => self.wind.medium,
            WindClass::High => self.wind.high,
            WindClass::Mixed => 1.0,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let groups = [
            ("track", [self.track.urban, self.track.suburban, self.track.rural]),
            ("wind", [self.wind.low, self.wind.medium, self.wind.high]),
        ];
        for (name, w) in groups {
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::validation(name, "weights must be non-negative"));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::validation(name, format!("weights sum to {sum}, expected 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Evacuation {
    pub nearby_minutes: f64,
    pub hazard_zone_minutes: f64,
}

impl Default for Evacuation {
    fn default() -> Self {
        Self {
            nearby_minutes: 4.0,
            hazard_zone_minutes: 120.0,
        }
    }
}

impl Evacuation {
    pub(crate) fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("nearby_minutes", self.nearby_minutes),
            ("hazard_zone_minutes", self.hazard_zone_minutes),
        ] {
            if !(0.0..=MAX_RESPONSE_MINUTES).contains(&v) {
                return Err(Error::validation(field, "must lie in [0, 120]"));
            }
        }
        Ok(())
    }

    pub fn landmarks(&self) -> [f64; 2] {
        [self.nearby_minutes, self.hazard_zone_minutes]
    }
}

/// The full set of consequence curves plus the weights used to mix them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsequenceCurveSet {
    curves: BTreeMap<CurveKey, SampledCurve>,
    pub mix: MixWeights,
    pub evacuation: Evacuation,
}

#[derive(Debug, Deserialize)]
struct CurveRecord {
    location_class: LocationClass,
    wind_class: WindClass,
    anchor_gallons: u32,
    time_min: f64,
    casualties: f64,
}

impl ConsequenceCurveSet {
    /// Builds a set and checks that it is complete (see [`Self::missing_curve`]).
    pub fn new(
        curves: BTreeMap<CurveKey, SampledCurve>,
        mix: MixWeights,
        evacuation: Evacuation,
    ) -> Result<Self> {
        mix.validate()?;
        evacuation.validate()?;
        for (key, curve) in &curves {
            if !CURVE_ANCHORS_GALLONS.contains(&key.anchor_gallons) {
                return Err(Error::validation(
                    "anchor_gallons",
                    format!("{} is not one of {:?}", key.anchor_gallons, CURVE_ANCHORS_GALLONS),
                ));
            }
            for landmark in evacuation.landmarks() {
                if !curve.times.contains(&landmark) {
                    return Err(Error::validation(
                        "time_min",
                        format!(
                            "curve ({}, {}, {}) does not sample the {landmark}-minute evacuation landmark",
                            key.location, key.wind, key.anchor_gallons
                        ),
                    ));
                }
            }
        }
        let set = Self {
            curves,
            mix,
            evacuation,
        };
        let any_mixed = set
            .curves
            .keys()
            .any(|k| k.location == LocationClass::Mixed || k.wind == WindClass::Mixed);
        if any_mixed && !set.is_premixed() {
            return Err(Error::validation(
                "location_class",
                "pre-mixed curves (mixed, mixed) cannot be combined with per-class curves",
            ));
        }
        if let Some(key) = set.missing_curve() {
            return Err(Error::MissingCurve {
                location: key.location.to_string(),
                wind: key.wind.to_string(),
                anchor_gallons: key.anchor_gallons,
            });
        }
        Ok(set)
    }

    pub fn from_csv_reader<R: Read>(
        reader: R,
        origin: &str,
        mix: MixWeights,
        evacuation: Evacuation,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut samples: BTreeMap<CurveKey, Vec<(f64, f64)>> = BTreeMap::new();
        for (line, rec) in rdr.deserialize::<CurveRecord>().enumerate() {
            let rec = rec.map_err(|e| Error::parse(origin, e))?;
            let key = CurveKey {
                location: rec.location_class,
                wind: rec.wind_class,
                anchor_gallons: rec.anchor_gallons,
            };
            if !(0.0..=MAX_RESPONSE_MINUTES).contains(&rec.time_min) {
                return Err(Error::validation(
                    format!("{origin}: record {}", line + 1),
                    "time_min must lie in [0, 120]",
                ));
            }
            samples
                .entry(key)
                .or_default()
                .push((rec.time_min, rec.casualties));
        }
        let mut curves = BTreeMap::new();
        for (key, mut pts) in samples {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (times, values) = pts.into_iter().unzip();
            let curve = SampledCurve::new(times, values).map_err(|e| {
                crate::scenario::prefix(
                    e,
                    &format!("{origin}: ({}, {}, {})", key.location, key.wind, key.anchor_gallons),
                )
            })?;
            curves.insert(key, curve);
        }
        Self::new(curves, mix, evacuation)
    }

    pub fn get(&self, key: &CurveKey) -> Option<&SampledCurve> {
        self.curves.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CurveKey, &SampledCurve)> {
        self.curves.iter()
    }

    /// True when the set holds only pre-mixed (`mixed`, `mixed`) curves.
    pub fn is_premixed(&self) -> bool {
        self.curves
            .keys()
            .all(|k| k.location == LocationClass::Mixed && k.wind == WindClass::Mixed)
    }

    /// The first absent (location, wind, anchor) triple, if any.
    pub fn missing_curve(&self) -> Option<CurveKey> {
        let premixed = !self.curves.is_empty() && self.is_premixed();
        let (locations, winds): (&[LocationClass], &[WindClass]) = if premixed {
            (&[LocationClass::Mixed], &[WindClass::Mixed])
        } else {
            (
                &[LocationClass::Urban, LocationClass::Suburban, LocationClass::Rural],
                &[WindClass::Low, WindClass::Medium, WindClass::High],
            )
        };
        for &location in locations {
            for &wind in winds {
                for anchor_gallons in CURVE_ANCHORS_GALLONS {
                    let key = CurveKey {
                        location,
                        wind,
                        anchor_gallons,
                    };
                    if !self.curves.contains_key(&key) {
                        return Some(key);
                    }
                }
            }
        }
        None
    }
}

/// Loads a curve CSV (`location_class, wind_class, anchor_gallons, time_min, casualties`).
pub fn load_consequence_curves(
    path: &Path,
    mix: MixWeights,
    evacuation: Evacuation,
) -> Result<ConsequenceCurveSet> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ConsequenceCurveSet::from_csv_reader(file, &path.display().to_string(), mix, evacuation)
}

/// Synthetic placeholder curves shipped for tests and demonstrations only.
pub const PLACEHOLDER_CURVES_CSV: &str = include_str!("../../data/curves_placeholder.csv");
