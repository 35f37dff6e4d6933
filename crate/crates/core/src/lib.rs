//! Berthing trajectory planning: ship dynamics, multiple-shooting transcription
//! and an SQP solver.

pub mod audit;
pub mod artifacts;
pub mod cli;
pub mod config;
pub mod constraints;
pub mod dynamics;
pub mod geometry;
pub mod plan;
pub mod plot;
pub mod scenarios;
pub mod solver;
pub mod transcription;
