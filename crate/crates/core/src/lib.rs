//! Link-level simulator for the downlink of a cell-free massive MIMO network
//! assisted by reconfigurable intelligent surfaces (RIS).
//!
//! A set of `M` single-antenna access points jointly serves `K` single-antenna
//! users, helped by `S` passive surfaces of `N` reflecting elements each.
//! Surfaces apply random unit-amplitude phase shifts; access points estimate
//! only the aggregate per-user channel from uplink pilots (MMSE) and transmit
//! with conjugate beamforming.
//!
//! The crate provides both rate metrics for this system:
//!
//! * a deterministic closed-form per-user achievable rate built from the
//!   aggregate channel statistics, and
//! * a Monte-Carlo rate that simulates pilot reception, estimation, and
//!   beamforming on fresh channel realizations.
//!
//! [`experiments`] drives the network-level studies (validation sweep,
//! min-rate and throughput CDFs, AP-replacement sweep) on top of the
//! lower-level modules. All randomness is derived from a single master seed
//! through labeled substreams, so every result is reproducible bit-for-bit
//! regardless of thread count.

pub mod channels;
pub mod downlink;
pub mod estimation;
pub mod experiments;
pub mod geometry;
pub mod large_scale;
mod linalg;
pub mod scenario;

pub use scenario::{ScenarioConfig, SeedContext};
