use serde::{Deserialize, Serialize};

use super::{LayerRaster, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// A probe line running along `along` at the fixed coordinate `at` of the
/// other axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scanline {
    pub along: Axis,
    pub at: f64,
}

impl Scanline {
    pub fn new(along: Axis, at: f64) -> Self {
        Scanline { along, at }
    }
}

/// Lengths of the filled runs a probe crosses, mm.
fn chords(raster: &LayerRaster, probe: &Scanline) -> Vec<f64> {
    let (fixed_axis, n_fixed, n_run) = match probe.along {
        Axis::X => (1, raster.ny, raster.nx),
        Axis::Y => (0, raster.nx, raster.ny),
    };
    let k = ((probe.at - raster.origin[fixed_axis]) / raster.resolution).floor();
    if !(k >= 0.0 && (k as usize) < n_fixed) {
        return Vec::new();
    }
    let k = k as usize;
    let filled = |s: usize| match probe.along {
        Axis::X => raster.get(s, k),
        Axis::Y => raster.get(k, s),
    };
    let mut runs = Vec::new();
    let mut run = 0usize;
    for s in 0..n_run {
        if filled(s) {
            run += 1;
        } else if run > 0 {
            runs.push(run as f64 * raster.resolution);
            run = 0;
        }
    }
    if run > 0 {
        runs.push(run as f64 * raster.resolution);
    }
    runs
}

/// Mean chord length of filled runs crossed by probes perpendicular to
/// fibers lying along `fiber_axis`. Probes that hit nothing are skipped.
pub fn measure_fiber_width(
    raster: &LayerRaster,
    fiber_axis: Axis,
    probes: &[Scanline],
) -> Result<f64, SimError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for probe in probes {
        if probe.along == fiber_axis {
            return Err(SimError::ProbeParallelToFiber);
        }
        for c in chords(raster, probe) {
            total += c;
            count += 1;
        }
    }
    if count == 0 {
        return Err(SimError::NoFiberFound);
    }
    Ok(total / count as f64)
}
