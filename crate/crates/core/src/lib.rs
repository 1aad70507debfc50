//! Knowledge-base–backed decision support: a declared ontology over
//! categorical precedents, significant probabilistic rules mined from them,
//! fixed-point invariants, explainable predictions and a reinforcement
//! loop driven by expected action results and success functions.

pub mod cli;
pub mod ingest;
pub mod lpi;
pub mod ontology;
pub mod pfc;
pub mod recommend;
pub mod sim;
pub mod store;
pub mod synth;
pub mod taskd;
pub mod tfs;
