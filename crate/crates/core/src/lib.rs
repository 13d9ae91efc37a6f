//! Argument sufficiency assessment through conclusion generation.
//!
//! The pipeline reconstructs an argument's masked conclusion with a denoising
//! sequence-to-sequence model ([`generator`]), then classifies the argument's
//! sufficiency from structured combinations of premises, gold conclusion and generated
//! conclusion ([`classifier`]). [`corpus`] builds the data and fold plans, [`metrics`]
//! holds every measurement used for evaluation and [`harness`] runs the repeated
//! cross-validation matrix and renders reports.

pub mod classifier;
pub mod corpus;
pub mod generator;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod records;
pub mod seeds;
pub mod text;
