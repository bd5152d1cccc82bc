//! Analytical multiport reduction for pixel-based RF and microwave layouts.
//!
//! A one-time prior impedance matrix over every virtual port of a pixel design
//! space is reduced, for any binary pixel/via pattern, to the impedance seen at
//! a chosen set of I/O ports:
//!
//! ```text
//! Z_io = Z_io,io - Z_io,vp (Z_L + Z_vp,vp)^-1 Z_vp,io
//! ```
//!
//! where `Z_L` is the diagonal load matrix obtained from the pattern
//! (short for connected metal, open for gaps). Open ports are removed from the
//! system outright since they carry no current.
//!
//! The [`synth`] module provides a lossy lumped network over the same port
//! graph together with a brute-force nodal solver, so the whole pipeline can be
//! checked against an independent ground truth.

pub mod dataset;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod pattern;
pub mod prior;
pub mod solver;
pub mod synth;
pub mod topology;

pub use error::{Error, Result};
pub use linalg::{c64, CMatrix};
pub use pattern::{IoSelection, LoadAssignment, LoadState, PixelPattern};
pub use prior::{PartitionedPrior, PriorData};
pub use solver::{NetworkResponse, Representation};
pub use topology::{DesignSpace, FrequencyGrid, PortClass, PortTopology};
