//! Point of derailment and derailment severity.
//!
//! The point of derailment (POD) is the position of the first derailed car,
//! `k` in `1..=L`. Severity is the number of cars derailed given `k`. For
//! mainline and arrival/departure incidents it follows a truncated
//! geometric law whose success probability comes from a logistic model.
//! For yard switching it follows a discretized generalized exponential.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::DiscretePmf;
use crate::scenario::{TrainConfig, YardType};
use crate::special::beta_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.beta.is_finite() && self.beta > 0.0)
        {
            return Err(Error::validation("alpha", "beta parameters must be positive"));
        }
        Ok(())
    }

    pub fn cdf(&self, u: f64) -> f64 {
        beta_cdf(self.alpha, self.beta, u)
    }
}

/// Which fitted POD distribution applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PodContext {
    MainlineUnit,
    MainlineManifest,
    YardManifest,
    TerminalUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodParams {
    pub mainline_unit: BetaParams,
    pub mainline_manifest: BetaParams,
    pub yard_manifest: BetaParams,
    pub terminal_unit: BetaParams,
}

impl Default for PodParams {
    fn default() -> Self {
        Self {
            mainline_unit: BetaParams::new(0.7549, 0.9582),
            mainline_manifest: BetaParams::new(0.7842, 1.1002),
            yard_manifest: BetaParams::new(0.5350, 0.9121),
            terminal_unit: BetaParams::new(0.7729, 0.9034),
        }
    }
}

impl PodParams {
    pub fn get(&self, ctx: PodContext) -> BetaParams {
        match ctx {
            PodContext::MainlineUnit => self.mainline_unit,
            PodContext::MainlineManifest => self.mainline_manifest,
            PodContext::YardManifest => self.yard_manifest,
            PodContext::TerminalUnit => self.terminal_unit,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("mainline_unit", self.mainline_unit),
            ("mainline_manifest", self.mainline_manifest),
            ("yard_manifest", self.yard_manifest),
            ("terminal_unit", self.terminal_unit),
        ] {
            p.validate().map_err(|_| {
                Error::validation(name, "beta parameters must be positive and finite")
            })?;
        }
        Ok(())
    }
}

/// POD pmf on `1..=length`: the Beta distribution of the relative position
/// binned into `length` equal cells. Index 0 carries no mass.
pub fn pod_pmf(params: BetaParams, length: usize) -> DiscretePmf {
    let l = length as f64;
    let mut masses = vec![0.0; length + 1];
    let mut prev = 0.0;
    for (k, m) in masses.iter_mut().enumerate().skip(1) {
        let cur = if k == length { 1.0 } else { params.cdf(k as f64 / l) };
        *m = (cur - prev).max(0.0);
        prev = cur;
    }
    DiscretePmf::from_normalized(crate::pmf::SupportKind::Count, masses)
}

/// Logistic coefficients of the mainline severity model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MainlineZ {
    pub intercept: f64,
    /// Per mph of derailment speed.
    pub speed: f64,
    /// Per car at and behind the POD.
    pub remaining_length: f64,
    /// Per gross ton per car.
    pub gross_tons_per_car: f64,
    pub empty_unit: f64,
    pub loaded_unit: f64,
}

impl Default for MainlineZ {
    fn default() -> Self {
        Self {
            intercept: -0.952,
            speed: -0.0306,
            remaining_length: -0.0018,
            gross_tons_per_car: -0.00239,
            empty_unit: 0.119,
            loaded_unit: -0.339,
        }
    }
}

impl MainlineZ {
    pub fn z(&self, speed_mph: f64, remaining_length: usize, train: &TrainConfig) -> f64 {
        self.intercept
            + self.speed * speed_mph
            + self.remaining_length * remaining_length as f64
            + self.gross_tons_per_car * train.avg_gross_tons_per_car()
            + self.empty_unit * train.eut()
            + self.loaded_unit * train.lut()
    }
}

/// Logistic model driven by train length only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthZ {
    pub intercept: f64,
    pub length: f64,
}

impl LengthZ {
    pub fn z(&self, length: usize) -> f64 {
        self.intercept + self.length * length as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeverityZ {
    pub mainline: MainlineZ,
    /// Manifest arrivals/departures in yards.
    pub yard_manifest: LengthZ,
    /// Unit-train arrivals/departures at terminals.
    pub terminal_unit: LengthZ,
}

impl Default for SeverityZ {
    fn default() -> Self {
        Self {
            mainline: MainlineZ::default(),
            yard_manifest: LengthZ {
                intercept: -1.595,
                length: -0.0029,
            },
            terminal_unit: LengthZ {
                intercept: -1.574,
                length: -0.0016,
            },
        }
    }
}

impl SeverityZ {
    fn validate(&self) -> Result<()> {
        let m = &self.mainline;
        let all = [
            m.intercept,
            m.speed,
            m.remaining_length,
            m.gross_tons_per_car,
            m.empty_unit,
            m.loaded_unit,
            self.yard_manifest.intercept,
            self.yard_manifest.length,
            self.terminal_unit.intercept,
            self.terminal_unit.length,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("z", "coefficients must be finite"));
        }
        Ok(())
    }
}

/// Generalized exponential density `shape * rate * e^(-rate x) * (1 - e^(-rate x))^(shape - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeParams {
    pub shape: f64,
    pub rate: f64,
}

impl GeParams {
    pub const fn new(shape: f64, rate: f64) -> Self {
        Self { shape, rate }
    }

    pub fn density(&self, x: f64) -> f64 {
        let e = (-self.rate * x).exp();
        self.shape * self.rate * e * ((self.shape - 1.0) * (-e).ln_1p()).exp()
    }

    fn validate(&self) -> Result<()> {
        if !(self.shape.is_finite() && self.shape > 0.0 && self.rate.is_finite() && self.rate > 0.0)
        {
            return Err(Error::validation("shape", "shape and rate must be positive"));
        }
        Ok(())
    }
}

/// Yard switching severity parameters per yard type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YardSeverityParams {
    pub all: GeParams,
    pub flat: GeParams,
    pub hump: GeParams,
    /// Largest severity considered; mass above it is lumped at the cap.
    pub max_cars: usize,
}

impl Default for YardSeverityParams {
    fn default() -> Self {
        Self {
            all: GeParams::new(1.44, 1.1),
            flat: GeParams::new(1.01, 1.68),
            hump: GeParams::new(1.0, 3.12),
            max_cars: 20,
        }
    }
}

impl YardSeverityParams {
    pub fn get(&self, yard_type: YardType) -> GeParams {
        match yard_type {
            YardType::All => self.all,
            YardType::Flat => self.flat,
            YardType::Hump => self.hump,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, p) in [("all", self.all), ("flat", self.flat), ("hump", self.hump)] {
            p.validate().map_err(|e| crate::scenario::prefix(e, name))?;
        }
        if self.max_cars == 0 {
            return Err(Error::validation("max_cars", "must be at least 1"));
        }
        Ok(())
    }
}

/// All severity-model parameters, overridable from the scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeverityConfig {
    pub pod: PodParams,
    pub z: SeverityZ,
    pub yard: YardSeverityParams,
}

impl SeverityConfig {
    pub fn validate(&self) -> Result<()> {
        self.pod.validate().map_err(|e| crate::scenario::prefix(e, "pod"))?;
        self.z.validate()?;
        self.yard.validate().map_err(|e| crate::scenario::prefix(e, "yard"))?;
        Ok(())
    }
}

/// Truncated geometric masses on `1..=max_cars`, returned at indices `0..max_cars`.
///
/// `p = 1 / (1 + e^(-z))`, mass at `x` is `p (1-p)^(x-1) / (1 - (1-p)^max_cars)`.
pub fn truncated_geometric(z: f64, max_cars: usize) -> Vec<f64> {
    debug_assert!(max_cars >= 1);
    if max_cars == 1 {
        return vec![1.0];
    }
    let p = 1.0 / (1.0 + (-z).exp());
    // ln(1 - p) = -ln(1 + e^z)
    let ln_q = -z.exp().ln_1p();
    let denom = -(max_cars as f64 * ln_q).exp_m1();
    if denom.is_nan() || denom <= 0.0 || !ln_q.is_finite() {
        // p is 1 to machine precision: every derailment stops at one car.
        let mut out = vec![0.0; max_cars];
        out[0] = 1.0;
        return out;
    }
    (0..max_cars)
        .map(|i| p * (i as f64 * ln_q).exp() / denom)
        .collect()
}

/// Severity distribution for every POD of one train in one context.
///
/// Row `k` (1-based) holds `P(X = x | k)` for `x` in `1..=L-k+1` together with
/// survival values `P(X >= x | k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSeverity {
    length: usize,
    rows: Vec<Vec<f64>>,
    survival: Vec<Vec<f64>>,
}

impl ConditionalSeverity {
    /// Builds from explicit rows; row `k` must hold `L - k + 1` non-negative
    /// masses summing to one.
    pub fn from_rows(length: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != length {
            return Err(Error::validation("severity", format!("expected {length} rows")));
        }
        for (i, row) in rows.iter().enumerate() {
            let k = i + 1;
            if row.len() > length - k + 1 || row.is_empty() {
                return Err(Error::validation(
                    format!("severity[{k}]"),
                    format!("row must hold 1..={} masses", length - k + 1),
                ));
            }
            DiscretePmf::count(std::iter::once(0.0).chain(row.iter().copied()).collect())
                .map_err(|e| crate::scenario::prefix(e, &format!("severity[{k}]")))?;
        }
        Ok(Self::from_rows_unchecked(length, rows))
    }

    fn from_rows_unchecked(length: usize, rows: Vec<Vec<f64>>) -> Self {
        let survival = rows
            .iter()
            .map(|row| {
                let mut s = vec![0.0; row.len() + 1];
                for i in (0..row.len()).rev() {
                    s[i] = s[i + 1] + row[i];
                }
                s
            })
            .collect();
        Self {
            length,
            rows,
            survival,
        }
    }

    /// Mainline severity on a segment with derailment speed `speed_mph`.
    pub fn mainline(train: &TrainConfig, speed_mph: f64, z: &MainlineZ) -> Self {
        let l = train.length_cars();
        let rows = (1..=l)
            .map(|k| {
                let remaining = l - k + 1;
                truncated_geometric(z.z(speed_mph, remaining, train), remaining)
            })
            .collect();
        Self::from_rows_unchecked(l, rows)
    }

    /// Arrival/departure severity with a length-only logistic model.
    pub fn length_driven(train: &TrainConfig, z: &LengthZ) -> Self {
        let l = train.length_cars();
        let zv = z.z(l);
        let rows = (1..=l).map(|k| truncated_geometric(zv, l - k + 1)).collect();
        Self::from_rows_unchecked(l, rows)
    }

    /// Yard switching severity for a train of `length` cars.
    pub fn yard(ge: &DiscretizedGe, length: usize) -> Self {
        let rows = (1..=length).map(|k| ge.conditional(length, k)).collect();
        Self::from_rows_unchecked(length, rows)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Masses for POD `k`; index `x - 1` holds `P(X = x | k)`.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k - 1]
    }

    pub fn prob(&self, k: usize, x: usize) -> f64 {
        if k == 0 || k > self.length || x == 0 {
            return 0.0;
        }
        self.rows[k - 1].get(x - 1).copied().unwrap_or(0.0)
    }

    /// `P(X >= x | k)`.
    pub fn survival(&self, k: usize, x: usize) -> f64 {
        if x <= 1 {
            return 1.0;
        }
        self.survival[k - 1].get(x - 1).copied().unwrap_or(0.0)
    }
}

const GE_TAIL_REL_TOL: f64 = 1e-18;
const GE_MAX_TERMS: usize = 1_000_000;

/// Generalized exponential density evaluated at the positive integers and normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedGe {
    params: GeParams,
    max_cars: usize,
    /// Normalized masses at x = 1..=max_cars (index x - 1).
    probs: Vec<f64>,
    /// `P(X >= x)` at x = 1..=max_cars (index x - 1).
    tails: Vec<f64>,
}

impl DiscretizedGe {
    pub fn new(params: GeParams, max_cars: usize) -> Result<Self> {
        params.validate()?;
        if max_cars == 0 {
            return Err(Error::validation("max_cars", "must be at least 1"));
        }
        let mut terms = Vec::new();
        let mut total = 0.0;
        let mut beyond_cap = 0.0;
        for x in 1..=GE_MAX_TERMS {
            let f = params.density(x as f64);
            terms.push(f);
            total += f;
            if x >= max_cars {
                beyond_cap += f;
                // The capped tail is the smallest quantity kept, so it sets the cutoff.
                if f <= GE_TAIL_REL_TOL * beyond_cap {
                    break;
                }
            }
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::validation("shape", "density does not normalize"));
        }
        // Sum smallest-first so the tail keeps its relative precision.
        let mut tails_all = vec![0.0; terms.len() + 1];
        for i in (0..terms.len()).rev() {
            tails_all[i] = tails_all[i + 1] + terms[i] / total;
        }
        let probs = terms.iter().take(max_cars).map(|t| t / total).collect();
        let tails = tails_all[..max_cars].to_vec();
        Ok(Self {
            params,
            max_cars,
            probs,
            tails,
        })
    }

    pub fn params(&self) -> GeParams {
        self.params
    }

    pub fn max_cars(&self) -> usize {
        self.max_cars
    }

    /// `P(X = x)` before any cap.
    pub fn prob(&self, x: usize) -> f64 {
        if x == 0 || x > self.max_cars {
            return 0.0;
        }
        self.probs[x - 1]
    }

    /// `P(X >= x)` for `x` up to `max_cars`.
    pub fn tail(&self, x: usize) -> f64 {
        if x <= 1 {
            return 1.0;
        }
        self.tails.get(x - 1).copied().unwrap_or(0.0)
    }

    /// Severity given POD `k` in a train of `length`: capped at
    /// `min(max_cars, length - k + 1)` with the excess mass on the cap.
    pub fn conditional(&self, length: usize, k: usize) -> Vec<f64> {
        let cap = self.max_cars.min(length + 1 - k);
        let mut out: Vec<f64> = (1..cap).map(|x| self.prob(x)).collect();
        out.push(self.tail(cap));
        out
    }
}

/// Yard switching severity given POD `k`, as a pmf on `0..=cap` (no mass at 0).
pub fn yard_switch_severity_pmf(ge: &DiscretizedGe, length: usize, k: usize) -> Result<DiscretePmf> {
    if k == 0 || k > length {
        return Err(Error::OutOfRange {
            quantity: "point of derailment",
            value: k as f64,
            min: 1.0,
            max: length as f64,
        });
    }
    let mut masses = vec![0.0];
    masses.extend(ge.conditional(length, k));
    DiscretePmf::count(masses)
}

/// Mainline or arrival/departure severity given POD `k`, as a pmf on `0..=L-k+1`.
pub fn linehaul_severity_pmf(z: f64, length: usize, k: usize) -> Result<DiscretePmf> {
    if k == 0 || k > length {
        return Err(Error::OutOfRange {
            quantity: "point of derailment",
            value: k as f64,
            min: 1.0,
            max: length as f64,
        });
    }
    let mut masses = vec![0.0];
    masses.extend(truncated_geometric(z, length - k + 1));
    DiscretePmf::count(masses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Consist, TrainType};
    use proptest::prelude::*;

    fn unit(l: usize) -> TrainConfig {
        TrainConfig::new(TrainType::Unit, l, 143.0 * l as f64, None, true, Consist::all_tank(l)).unwrap()
    }

    #[test]
    fn pod_uniform_when_beta_is_one_one() {
        let p = pod_pmf(BetaParams::new(1.0, 1.0), 40);
        for k in 1..=40 {
            assert!((p.mass(k) - 1.0 / 40.0).abs() < 1e-14);
        }
        assert_eq!(p.mass(0), 0.0);
    }

    #[test]
    fn truncated_geometric_matches_direct_formula() {
        let z: f64 = -1.3;
        let p = 1.0 / (1.0 + (-z).exp());
        let q: f64 = 1.0 - p;
        let n = 17;
        let m = truncated_geometric(z, n);
        let norm = 1.0 - q.powi(n as i32);
        for (i, v) in m.iter().enumerate() {
            let direct = p * q.powi(i as i32) / norm;
            assert!((v - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn truncated_geometric_single_car() {
        assert_eq!(truncated_geometric(-4.0, 1), vec![1.0]);
        let m = truncated_geometric(50.0, 5);
        assert!((m[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mainline_z_for_loaded_unit() {
        let t = unit(100);
        let z = MainlineZ::default().z(40.0, 100, &t);
        let expect = -0.952 - 0.0306 * 40.0 - 0.0018 * 100.0 - 0.00239 * 143.0 - 0.339;
        assert!((z - expect).abs() < 1e-12);
    }

    #[test]
    fn conditional_survival_consistent() {
        let t = unit(30);
        let s = ConditionalSeverity::mainline(&t, 35.0, &MainlineZ::default());
        for k in 1..=30 {
            assert_eq!(s.row(k).len(), 30 - k + 1);
            assert!((s.survival(k, 1) - 1.0).abs() < 1e-12);
            for x in 1..=(31 - k) {
                let d = s.survival(k, x) - s.survival(k, x + 1);
                assert!((d - s.prob(k, x)).abs() < 1e-14);
            }
            assert_eq!(s.survival(k, 32 - k), 0.0);
        }
    }

    #[test]
    fn ge_tail_beyond_twenty_is_small() {
        let defaults = YardSeverityParams::default();
        for yt in [YardType::All, YardType::Flat, YardType::Hump] {
            let ge = DiscretizedGe::new(defaults.get(yt), 20).unwrap();
            assert!(ge.tail(21) < 1e-3);
            assert!(ge.tail(20) < 1e-3);
            let sum: f64 = (1..20).map(|x| ge.prob(x)).sum::<f64>() + ge.tail(20);
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn yard_conditional_caps_at_remaining_length() {
        let ge = DiscretizedGe::new(GeParams::new(1.44, 1.1), 20).unwrap();
        let row = ge.conditional(30, 28);
        assert_eq!(row.len(), 3);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(ge.conditional(100, 1).len(), 20);
        assert!(yard_switch_severity_pmf(&ge, 30, 31).is_err());
    }

    #[test]
    fn exponential_special_case() {
        // shape 1 is geometric on the integers with ratio e^-rate.
        let ge = DiscretizedGe::new(GeParams::new(1.0, 0.7), 20).unwrap();
        let r: f64 = (-0.7f64).exp();
        for x in 1..20 {
            let expect = (1.0 - r) * r.powi(x as i32 - 1);
            assert!((ge.prob(x) - expect).abs() < 1e-14);
        }
        assert!((ge.tail(20) - r.powi(19)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn pod_normalized_and_nonnegative(
            a in 0.2f64..5.0, b in 0.2f64..5.0, l in 1usize..200
        ) {
            let p = pod_pmf(BetaParams::new(a, b), l);
            prop_assert!(p.masses().iter().all(|m| *m >= 0.0));
            prop_assert!((p.total() - 1.0).abs() < 1e-9);
            prop_assert_eq!(p.len(), l + 1);
        }

        #[test]
        fn truncated_geometric_normalized(z in -8.0f64..8.0, n in 1usize..300) {
            let m = truncated_geometric(z, n);
            prop_assert!(m.iter().all(|v| *v >= 0.0));
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(m.windows(2).all(|w| w[1] <= w[0]));
        }

        #[test]
        fn yard_rows_normalized(
            shape in 0.3f64..4.0, rate in 0.2f64..5.0, l in 1usize..60, k_frac in 0.0f64..1.0
        ) {
            let ge = DiscretizedGe::new(GeParams::new(shape, rate), 20).unwrap();
            let k = 1 + ((l - 1) as f64 * k_frac) as usize;
            let p = yard_switch_severity_pmf(&ge, l, k).unwrap();
            prop_assert!((p.total() - 1.0).abs() < 1e-9);
            prop_assert!(p.max_support() <= 20.min(l - k + 1));
        }
    }
}
