//! Study harness for the `abckit` core: reference fixtures, deterministic
//! verification, the cell runner behind the result tables, the run manifest,
//! and the SVG plot.

pub mod config;
pub mod fixtures;
pub mod manifest;
pub mod plot;
pub mod tables;
pub mod verify;
