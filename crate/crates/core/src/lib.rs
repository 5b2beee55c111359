//! Desk-scale reproduction of metadata-driven sampling-based GNN training.
//!
//! The crate covers the per-iteration multi-hop sampling pipeline, the
//! Poisson-binomial execution envelope used to provision buffers and launch
//! grids once, memory provisioning strategies, and a serialized cost model
//! comparing host-mediated, device-pilot and capture/replay orchestration.
//!
//! Modules map onto the pipeline bottom-up:
//!
//! - [`graph`]: CSR storage, synthetic generators, edge-list and binary I/O.
//! - [`sampler`]: with-replacement multi-hop sampling, dedup/relabel, gather indices.
//! - [`envelope`]: hit model, Poisson-binomial moments, quantiles, envelope bounds.
//! - [`exec`]: kernel pipeline construction and the orchestration cost model.
//! - [`provision`]: MaxSG / exact / envelope memory plans and the fixed-identity arena.
//! - [`bench`]: experiment configuration and the CLI commands.

pub mod bench;
pub mod envelope;
pub mod error;
pub mod exec;
pub mod graph;
pub mod provision;
pub mod sampler;

pub use error::{Error, Result};
