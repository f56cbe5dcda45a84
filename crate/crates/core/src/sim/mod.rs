//! Per-layer deposition simulation.
//!
//! Each extruding move is swept into a 2-D capsule (the stadium footprint
//! seen from above) on a square occupancy grid. A cell is filled when its
//! centre lies within half a line width of the move's segment; stamping is
//! a set union, so it does not depend on move order. Porosity is the empty
//! fraction of cells whose centres fall inside a query rectangle.

mod export;
mod measure;
mod raster;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::flow::{self, FlowParams, Regime};
use crate::gcode::{
    replay_with, GCodeDocument, MachineState, PrintMove, ReplayError, ReplayOptions,
};

pub use export::{export_raster, RasterFormat};
pub use measure::{measure_fiber_width, Axis, Scanline};
pub use raster::{stamp_layer, stamp_layer_in, LayerRaster, Rect};

/// Default cell size, mm.
pub const DEFAULT_RESOLUTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("resolution {resolution} mm too coarse to resolve fibers of width {width} mm (needs <= width/4)")]
    ResolutionTooCoarse { resolution: f64, width: f64 },
    #[error("resolution must be positive, got {0}")]
    InvalidResolution(f64),
    #[error("moves span several layers (z = {0} and {1})")]
    MixedLayers(f64, f64),
    #[error("{moves} moves but {widths} widths")]
    WidthCountMismatch { moves: usize, widths: usize },
    #[error("invalid width {0} mm")]
    InvalidWidth(f64),
    #[error("query region lies outside the raster")]
    RegionOutsideRaster,
    #[error("no probe crossed a filled cell")]
    NoFiberFound,
    #[error("probe runs parallel to the fiber axis")]
    ProbeParallelToFiber,
    #[error("unsupported raster format `{0}` (expected pgm or csv)")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub resolution: f64,
    /// Filament diameter, nominal width and layer height; flow is unused.
    pub params: FlowParams,
    /// Inclusive z filter, mm.
    pub z_range: Option<(f64, f64)>,
    pub parallel: bool,
    pub replay: ReplayOptions,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            resolution: DEFAULT_RESOLUTION,
            params: FlowParams::default(),
            z_range: None,
            parallel: true,
            replay: ReplayOptions::default(),
        }
    }
}

/// A simulated layer with the moves that built it.
#[derive(Debug, Clone)]
pub struct SimulatedLayer {
    pub raster: LayerRaster,
    /// Extruding moves stamped into this layer.
    pub deposits: usize,
    /// Length-weighted mean stamped width, mm (0 without deposits).
    pub mean_width: f64,
    /// Length-weighted flow fraction recovered from the E values.
    pub effective_gamma: f64,
}

fn z_key(z: f64) -> i64 {
    (z * 1e6).round() as i64
}

/// Replays `doc` and rasterizes every layer that deposits material (or,
/// for a document without deposition, every layer it travels through).
pub fn simulate_document(
    doc: &GCodeDocument,
    config: &SimConfig,
) -> Result<Vec<SimulatedLayer>, SimError> {
    if !(config.resolution.is_finite() && config.resolution > 0.0) {
        return Err(SimError::InvalidResolution(config.resolution));
    }
    let replay = replay_with(doc, MachineState::default(), config.replay)?;
    let in_range = |z: f64| {
        config
            .z_range
            .is_none_or(|(lo, hi)| z >= lo - 1e-9 && z <= hi + 1e-9)
    };

    let deposits: Vec<&PrintMove> = replay
        .moves
        .iter()
        .filter(|m| m.delta_e > 0.0 && m.xy_length() > 0.0)
        .collect();
    let mut layers: BTreeMap<i64, (f64, Vec<&PrintMove>, Vec<&PrintMove>)> = BTreeMap::new();
    for m in &deposits {
        let z = m.end[2];
        if in_range(z) {
            layers
                .entry(z_key(z))
                .or_insert((z, Vec::new(), Vec::new()))
                .1
                .push(m);
        }
    }
    if deposits.is_empty() {
        for m in replay
            .moves
            .iter()
            .filter(|m| m.xy_length() > 0.0 && in_range(m.end[2]))
        {
            let z = m.end[2];
            layers
                .entry(z_key(z))
                .or_insert((z, Vec::new(), Vec::new()))
                .2
                .push(m);
        }
    }

    let p = config.params;
    let build = |(z, stamped, travel): &(f64, Vec<&PrintMove>, Vec<&PrintMove>)| -> Result<SimulatedLayer, SimError> {
        let mut moves = Vec::with_capacity(stamped.len());
        let mut widths = Vec::with_capacity(stamped.len());
        let mut total_len = 0.0;
        let mut width_sum = 0.0;
        let mut gamma_sum = 0.0;
        for m in stamped {
            let len = m.xy_length();
            let w = flow::width_from_feed(m.delta_e, len, p.filament_diameter, p.layer_height)
                .map_err(|_| SimError::InvalidWidth(m.delta_e / len))?;
            let gamma = m.delta_e * p.filament_area() / (p.nominal_width * p.layer_height * len);
            let mut flat = (*m).clone();
            flat.start[2] = *z;
            flat.end[2] = *z;
            moves.push(flat);
            widths.push(w);
            total_len += len;
            width_sum += w * len;
            gamma_sum += gamma * len;
        }
        let bounds = layer_bounds(&moves, &widths, travel, p.nominal_width);
        let mut raster = stamp_layer_in(&moves, &widths, config.resolution, bounds)?;
        raster.z = *z;
        Ok(SimulatedLayer {
            raster,
            deposits: moves.len(),
            mean_width: if total_len > 0.0 { width_sum / total_len } else { 0.0 },
            effective_gamma: if total_len > 0.0 { gamma_sum / total_len } else { 0.0 },
        })
    };

    let entries: Vec<_> = layers.into_values().collect();
    if config.parallel {
        entries.par_iter().map(build).collect()
    } else {
        entries.iter().map(build).collect()
    }
}

/// Bounding box of capsules (or, without deposits, of travel) plus margin.
fn layer_bounds(
    moves: &[PrintMove],
    widths: &[f64],
    travel: &[&PrintMove],
    fallback_margin: f64,
) -> Rect {
    let margin = widths.iter().copied().fold(0.0, f64::max);
    let mut r = Rect::empty();
    for m in moves {
        r.include(m.start[0], m.start[1]);
        r.include(m.end[0], m.end[1]);
    }
    if moves.is_empty() {
        for m in travel {
            r.include(m.start[0], m.start[1]);
            r.include(m.end[0], m.end[1]);
        }
        return r.expanded(fallback_margin);
    }
    r.expanded(margin)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerPorosity {
    pub z: f64,
    pub porosity: f64,
    pub filled_cells: usize,
    pub total_cells: usize,
    pub deposits: usize,
    pub mean_width_mm: f64,
    pub effective_gamma: f64,
    pub regime: Option<Regime>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaSummary {
    /// Effective flow fraction rounded to 0.01.
    pub gamma: f64,
    pub layers: usize,
    pub mean_porosity: f64,
    pub mean_width_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PorosityReport {
    pub resolution: f64,
    pub region: Option<Rect>,
    pub layers: Vec<LayerPorosity>,
    pub by_gamma: Vec<GammaSummary>,
}

/// Porosity of every layer inside `region` (whole raster when `None`).
pub fn porosity_report(
    layers: &[SimulatedLayer],
    region: Option<Rect>,
    layer_height: f64,
    resolution: f64,
) -> Result<PorosityReport, SimError> {
    let mut rows = Vec::with_capacity(layers.len());
    for layer in layers {
        let query = region.unwrap_or_else(|| layer.raster.extent());
        let (filled, total) = layer.raster.count_in(&query)?;
        rows.push(LayerPorosity {
            z: layer.raster.z,
            porosity: (total - filled) as f64 / total as f64,
            filled_cells: filled,
            total_cells: total,
            deposits: layer.deposits,
            mean_width_mm: layer.mean_width,
            effective_gamma: layer.effective_gamma,
            regime: (layer.deposits > 0).then(|| Regime::of(layer.mean_width, layer_height)),
        });
    }

    let mut groups: BTreeMap<i64, Vec<&LayerPorosity>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.deposits > 0) {
        groups
            .entry((row.effective_gamma * 100.0).round() as i64)
            .or_default()
            .push(row);
    }
    let by_gamma = groups
        .into_iter()
        .map(|(key, rows)| {
            let n = rows.len() as f64;
            GammaSummary {
                gamma: key as f64 / 100.0,
                layers: rows.len(),
                mean_porosity: rows.iter().map(|r| r.porosity).sum::<f64>() / n,
                mean_width_mm: rows.iter().map(|r| r.mean_width_mm).sum::<f64>() / n,
            }
        })
        .collect();

    Ok(PorosityReport {
        resolution,
        region,
        layers: rows,
        by_gamma,
    })
}

/// Porosity of one raster inside `region`.
pub fn porosity(raster: &LayerRaster, region: &Rect) -> Result<f64, SimError> {
    let (filled, total) = raster.count_in(region)?;
    Ok((total - filled) as f64 / total as f64)
}
