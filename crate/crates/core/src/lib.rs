//! Sensing-assisted secure transmission with movable-antenna arrays.
//!
//! The pipeline has two stages. A sensing stage places transmit and receive
//! antennas to minimize the CRB of the eavesdropper's spatial AoDs and then
//! estimates them by grid-search MLE. A communication stage uses the resulting
//! uncertainty region to jointly design a robust beamformer and the transmit
//! antenna positions for worst-case secrecy rate.

// NaN must fail the validity checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod benchmarks;
pub mod comm_opt;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod scene;
pub mod sensing;
pub mod rng;
pub mod sensing_opt;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{
    comm_channel, echo_channel, field_response, path_gain, ArrayLayout, GainKind, PathGain,
    Position, SpatialAngles, Wavevector,
};
pub use scene::{dbm_to_watts, dbsm_to_m2, Scene, SceneConstants};
pub use sensing::{CrbPair, UncertaintyRegion};
