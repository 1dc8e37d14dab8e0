//! Event-chain risk model for hazardous-material releases from unit and
//! manifest trains.
//!
//! The chain runs from derailment probability ([`derailment`]) through point
//! of derailment and severity ([`severity`]), the number of tank cars
//! releasing ([`release`]), total gallons released ([`quantity`]) and
//! expected casualties ([`consequence`]). [`pipeline::Study`] evaluates a
//! whole [`Scenario`], and [`mc`] is an independent Monte Carlo check of the
//! analytic distributions.

pub mod consequence;
pub mod derailment;
pub mod error;
pub mod mc;
pub mod pipeline;
pub mod pmf;
pub mod quantity;
pub mod release;
pub mod report;
pub mod scenario;
pub mod severity;
pub mod special;

pub use error::{Error, Result};
pub use pipeline::{OptionAnalysis, Study, TimedValue};
pub use pmf::{DiscretePmf, SupportKind, LATTICE_GALLONS};
pub use quantity::QuantityPmf;
pub use scenario::{
    load_scenario, scenario_from_toml, scenario_to_toml, Consist, Scenario, TrainConfig, TrainType,
};
