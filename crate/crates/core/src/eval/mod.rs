//! Evaluation: contact matching, error metrics, and simulated experiment
//! suites.

mod matching;
mod metrics;
mod suite;

pub use matching::{match_contacts, Assignment};
pub use metrics::{score, ScenarioScore};
pub use suite::{
    built_in_suite, multi_contact_suite, single_contact_suite, two_distance_suite, CaseReport,
    ExperimentCase, ExperimentSpec, NoiseSettings, SuiteAggregate, SuiteOutcome, SuiteReport,
    SuiteRunner, GRAVITY,
};
