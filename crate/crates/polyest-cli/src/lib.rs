//! Experiment driver, reporting, design bundles, and the acceptance suite
//! for the polyhedral-estimation library.

pub mod accept;
pub mod bundle;
pub mod config;
pub mod experiments;
pub mod plot;
pub mod report;
