//! Toolkit for controlled underextrusion in FDM printing.
//!
//! The crate is split along the workflow: [`gcode`] parses and replays
//! Marlin-flavor G-code losslessly, [`flow`] holds the conservation-of-mass
//! extrusion geometry, [`region`] rewrites flow inside porous regions and
//! cleans up redundant tool changes, [`sim`] rasterizes deposited layers to
//! measure porosity, and [`bench`] analyzes mechanical test traces against
//! published reference values. [`cli`] ties them together behind the
//! `porogen` binary.

// Guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod flow;
pub mod gcode;
pub mod region;
pub mod sim;

pub use flow::{FlowError, FlowParams, Regime};
pub use gcode::{GCodeDocument, GCodeLine, LineKind, MachineState, PrintMove};
pub use region::{RegionShape, RegionSpec, TransformReport};
pub use sim::{LayerRaster, PorosityReport};

/// Version of the JSON report schema emitted by the CLI.
pub const REPORT_SCHEMA_VERSION: u32 = 1;
