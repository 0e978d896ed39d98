//! Data ingestion, synthetic scenarios and the canonical dataset file.

mod identifiability;
mod ingest;
mod population;
mod scenario;
mod stochastic;

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Observations, Population};

pub use identifiability::{identifiability_counterexample, identifiability_demo, simulate_process, DemoSpec, Process};
pub use ingest::{align_counts, ingest_cases, read_case_csv, AlignedCounts, IngestOptions, RawCaseSeries};
pub use population::{state_names, state_population};
pub use scenario::{
    generate_scenario, scenario_beta, scenario_constants, scenario_r0, GroundTruth, RateTransform, ScenarioId,
    ScenarioSpec, SimulatedData,
};
pub use stochastic::{apply, binomial_chain, binomial_step, stochastic_generate, CountState, StochasticTruth, Transitions};

/// On-disk form of [`Observations`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub cases: Vec<f64>,
    pub i_d0: f64,
    pub population: f64,
    pub day0: NaiveDate,
    /// Free-form provenance note, e.g. the generating scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl Dataset {
    pub fn from_observations(obs: &Observations, source: Option<String>) -> Self {
        Self {
            cases: obs.cases.clone(),
            i_d0: obs.i_d0,
            population: obs.population.get(),
            day0: obs.day0,
            source,
        }
    }

    pub fn to_observations(&self) -> Result<Observations> {
        Observations::new(self.cases.clone(), self.i_d0, Population::new(self.population)?, self.day0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_json_round_trip() {
        let obs = Observations::new(
            vec![1.5, 2.0, 1e-3],
            103.0,
            Population::new(12_671_821.0).unwrap(),
            NaiveDate::from_ymd_opt(2020, 3, 14).unwrap(),
        )
        .unwrap();
        let ds = Dataset::from_observations(&obs, Some("test".into()));
        let back = Dataset::from_json(&ds.to_json().unwrap()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_observations().unwrap(), obs);
    }
}
