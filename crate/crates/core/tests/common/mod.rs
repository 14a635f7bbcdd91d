#![allow(dead_code)]

pub mod oracles;

use std::fs;
use std::path::PathBuf;

use impact_core::config::RunConfig;
use impact_core::detection::{analyze_all, detect, PairAssessment};
use impact_core::ingest::read_events_csv;
use impact_core::{ImpactConflict, ServiceEvent, ServiceRequest};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn events(name: &str) -> Vec<ServiceEvent> {
    read_events_csv(fs::File::open(fixture(name)).unwrap()).unwrap()
}

pub fn config(name: &str) -> RunConfig {
    RunConfig::from_toml_str(&fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

pub struct Scenario {
    pub requests: Vec<ServiceRequest>,
    pub history: Vec<ServiceEvent>,
    pub config: RunConfig,
}

impl Scenario {
    pub fn load(requests: &str, config_file: &str) -> Self {
        Scenario {
            requests: events(requests).into_iter().map(ServiceRequest::from).collect(),
            history: events("history.csv"),
            config: config(config_file),
        }
    }

    pub fn one() -> Self {
        Self::load("scenario1_requests.csv", "scenario1.toml")
    }

    pub fn two() -> Self {
        Self::load("scenario2_requests.csv", "scenario2.toml")
    }

    pub fn two_at_night() -> Self {
        Self::load("scenario2_requests.csv", "scenario2_night.toml")
    }

    pub fn detect(&self) -> Vec<ImpactConflict> {
        let c = &self.config;
        detect(&self.requests, &self.history, &c.rooms, &c.affinity, &c.detection).unwrap()
    }

    pub fn assessments(&self) -> Vec<PairAssessment> {
        let c = &self.config;
        analyze_all(&self.requests, &self.history, &c.rooms, &c.affinity, &c.detection).unwrap()
    }
}

/// 256 cases from a fixed seed, no failure files.
pub fn prop_config(seed: u64) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases: 256,
        rng_seed: proptest::test_runner::RngSeed::Fixed(seed),
        failure_persistence: None,
        ..proptest::test_runner::Config::default()
    }
}
