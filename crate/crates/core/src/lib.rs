//! Scoring engine for navigation explanations.
//!
//! An explanation is compiled into a small guidance program, grounded on a
//! gridworld, and followed by a simulated listener that only sees a local
//! window. Repeated attempts yield the success, path length and replanning
//! statistics that make up an explanation's utility.

pub mod analysis;
pub mod gridworld;
pub mod guidance;
pub mod lexicon;
pub mod pipeline;
pub mod planner;
pub mod scoring;
pub mod seed;
pub mod translator;
