//! Seizure-detection pipeline engine.

pub mod dsp;
pub mod edf;
pub mod preprocess;
pub mod epoching;
pub mod features;
pub mod selection;
pub mod models;
pub mod evaluation;
pub mod ensemble;
pub mod postprocess;
pub mod store;
pub mod config;
pub mod synthetic;
pub mod pipeline;
