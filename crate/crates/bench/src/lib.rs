//! Dataset generation, training and evaluation driver for polarbf.

pub mod commands;
pub mod dataset;
pub mod eval;
pub mod manifest;
pub mod report;
pub mod selftest;
pub mod sim;
pub mod training;
