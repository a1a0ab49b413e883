//! Synchronization of desynchronized logical patches before lattice surgery.
//!
//! The crate is organised bottom-up:
//!
//! - [`timing`]: logical clocks, cycle times and slack between patches.
//! - [`policies`]: the Passive, Active, Active-intra, Extra Rounds and Hybrid
//!   synchronization policies, k-patch planning and program-level LER estimates.
//! - [`circuits`]: timed stabilizer circuits (repetition code, rotated surface
//!   code memory, two-patch lattice surgery) with synchronization idles woven in.
//! - [`noise`]: circuit-level depolarizing noise and T1/T2 idling channels.
//! - [`sim`]: bit-packed Pauli-frame Monte Carlo sampling.
//! - [`decoders`]: matching graphs, union-find / exact / lookup-table decoders and
//!   logical error rate estimation.
//! - [`syncengine`]: a model of the counter-based synchronization hardware.
//! - [`experiments`]: JSON-configured sweeps and case studies driven by the CLI.

pub mod circuits;
pub mod decoders;
pub mod error;
pub mod experiments;
pub mod noise;
pub mod policies;
pub mod sim;
pub mod syncengine;
pub mod timing;

pub use error::{Error, Result};
pub use timing::{LatencyProfile, Nanos, PatchId, PatchTimingState, SlackAssignment};
