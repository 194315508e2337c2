//! Analyses over the exported message and participant tables: tone markers
//! of rephrased text, topic preservation, and placebo-controlled effects by
//! dose subgroup.

pub mod effects;
pub mod embed;
pub mod features;
pub mod kmeans;
pub mod labels;
pub mod project;
pub mod report;
pub mod stats;
pub mod synthetic;
pub mod tone;
pub mod topics;
