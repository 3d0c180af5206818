//! Synthetic data with known parameters: cointegrated quote pairs, trade
//! histories with their true gain path, bias scenarios and spread series.

mod pair;
mod scenario;
mod spreads;
mod trades;

pub use pair::{gen_cointegrated_pair, simulate_mids, SynthDataset, SynthSpec};
pub use scenario::{gen_biased_scenario, BiasKind, ScenarioDataset, ScenarioOracle, ScenarioSpec};
pub use spreads::{gen_gbm_bars, gen_spread_bars, GbmSpec, SpreadSpec};
pub use trades::{gen_trades, GainPoint, TradeBar, TradeSimulation, TradeSpec};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::econometrics::EstimationError;
use crate::ingest::IngestError;
use crate::quotegrid::GridError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("unstable dynamics: {0}")]
    Unstable(String),
    #[error("non-positive price {price} at bar {bar}")]
    NonPositivePrice { bar: usize, price: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("ingest: {0}")]
    Ingest(String),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

impl From<IngestError> for SynthError {
    fn from(e: IngestError) -> Self {
        SynthError::Ingest(e.to_string())
    }
}

/// Innovation distribution, scaled to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Innovations {
    #[default]
    Gaussian,
    StudentT { df: f64 },
}

impl Innovations {
    pub fn validate(&self) -> Result<(), SynthError> {
        match self {
            Innovations::Gaussian => Ok(()),
            Innovations::StudentT { df } if *df > 2.0 && df.is_finite() => Ok(()),
            Innovations::StudentT { df } => Err(SynthError::InvalidSpec(format!(
                "Student-t innovations need df > 2, got {df}"
            ))),
        }
    }

    pub(crate) fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Innovations::Gaussian => StandardNormal.sample(rng),
            Innovations::StudentT { df } => {
                let t: f64 = StudentT::new(df).expect("validated").sample(rng);
                t * ((df - 2.0) / df).sqrt()
            }
        }
    }
}
