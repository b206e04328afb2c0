//! Open-vocabulary virtual object placement.
//!
//! This crate wires the pure algorithms of [`octoplace_core`] to the outside
//! world: scene bundle and mesh files ([`bundle`]), model capability
//! adapters ([`backends`]), demo scenes ([`golden`]), the placement orchestrator ([`pipeline`]),
//! study files ([`study`]) and the judgment HTTP service ([`service`]).

pub mod backends;
pub mod bundle;
pub mod golden;
pub mod pipeline;
pub mod service;
pub mod study;

pub use octoplace_core as core;
