//! Grammar-constrained robot morphology search.

pub mod compiler;
pub mod components;
pub mod control;
pub mod evolution;
pub mod generator;
pub mod grammar;
pub mod prompts;
pub mod seeds;
pub mod sim;
