//! Differentiable probabilistic temporal-logic alignment over
//! spatio-temporal scene-graph databases.

pub mod fact_db;
pub mod provenance;
pub mod spec_lang;
pub mod checker;
pub mod cli;
pub mod oracle;
pub mod losses;
pub mod synthgen;
pub mod trainer;
