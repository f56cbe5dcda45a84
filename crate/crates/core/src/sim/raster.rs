use serde::Serialize;

use crate::gcode::PrintMove;

use super::SimError;

/// Axis-aligned rectangle in the XY plane, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Rect {
            x_min: x_min.min(x_max),
            y_min: y_min.min(y_max),
            x_max: x_max.max(x_min),
            y_max: y_max.max(y_min),
        }
    }

    pub(crate) fn empty() -> Self {
        Rect {
            x_min: f64::INFINITY,
            y_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_max: f64::NEG_INFINITY,
        }
    }

    pub(crate) fn is_empty(&self) -> bool {
        !(self.x_min <= self.x_max && self.y_min <= self.y_max)
    }

    pub(crate) fn include(&mut self, x: f64, y: f64) {
        self.x_min = self.x_min.min(x);
        self.y_min = self.y_min.min(y);
        self.x_max = self.x_max.max(x);
        self.y_max = self.y_max.max(y);
    }

    pub(crate) fn expanded(&self, margin: f64) -> Rect {
        Rect {
            x_min: self.x_min - margin,
            y_min: self.y_min - margin,
            x_max: self.x_max + margin,
            y_max: self.y_max + margin,
        }
    }
}

/// Occupancy grid of one layer. Cell `(i, j)` has its centre at
/// `origin + ((i + 0.5), (j + 0.5)) * resolution`; row `j = 0` is the
/// lowest y.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRaster {
    pub z: f64,
    pub resolution: f64,
    pub origin: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    cells: Vec<bool>,
}

impl LayerRaster {
    /// Empty raster covering `bounds`, with the origin snapped to a multiple
    /// of the resolution so that rasters of one resolution share a grid.
    pub fn covering(bounds: Rect, resolution: f64, z: f64) -> Result<Self, SimError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(SimError::InvalidResolution(resolution));
        }
        let bounds = if bounds.is_empty() {
            Rect::new(0.0, 0.0, resolution, resolution)
        } else {
            bounds
        };
        let ox = (bounds.x_min / resolution).floor() * resolution;
        let oy = (bounds.y_min / resolution).floor() * resolution;
        let nx = (((bounds.x_max - ox) / resolution).ceil() as usize).max(1);
        let ny = (((bounds.y_max - oy) / resolution).ceil() as usize).max(1);
        Ok(LayerRaster {
            z,
            resolution,
            origin: [ox, oy],
            nx,
            ny,
            cells: vec![false; nx * ny],
        })
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.nx + i]
    }

    pub fn set(&mut self, i: usize, j: usize, filled: bool) {
        self.cells[j * self.nx + i] = filled;
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.resolution,
            self.origin[1] + (j as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn filled_cells(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn filled_area(&self) -> f64 {
        self.filled_cells() as f64 * self.resolution * self.resolution
    }

    pub fn extent(&self) -> Rect {
        Rect {
            x_min: self.origin[0],
            y_min: self.origin[1],
            x_max: self.origin[0] + self.nx as f64 * self.resolution,
            y_max: self.origin[1] + self.ny as f64 * self.resolution,
        }
    }

    /// Grid index range `[lo, hi)` of cell centres within `[a, b]` along
    /// one axis, unclamped.
    fn center_range(&self, axis: usize, a: f64, b: f64) -> (i64, i64) {
        let o = self.origin[axis];
        let lo = ((a - o) / self.resolution - 0.5).ceil() as i64;
        let hi = ((b - o) / self.resolution - 0.5).floor() as i64 + 1;
        (lo, hi)
    }

    /// `(filled, total)` over grid cells whose centres lie in `region`.
    /// Grid cells beyond the raster count as empty.
    pub fn count_in(&self, region: &Rect) -> Result<(usize, usize), SimError> {
        let ext = self.extent();
        if region.is_empty()
            || region.x_max < ext.x_min
            || region.x_min > ext.x_max
            || region.y_max < ext.y_min
            || region.y_min > ext.y_max
        {
            return Err(SimError::RegionOutsideRaster);
        }
        let (i0, i1) = self.center_range(0, region.x_min, region.x_max);
        let (j0, j1) = self.center_range(1, region.y_min, region.y_max);
        let total = ((i1 - i0).max(0) * (j1 - j0).max(0)) as usize;
        if total == 0 {
            return Err(SimError::RegionOutsideRaster);
        }
        let ci0 = i0.clamp(0, self.nx as i64) as usize;
        let ci1 = i1.clamp(0, self.nx as i64) as usize;
        let cj0 = j0.clamp(0, self.ny as i64) as usize;
        let cj1 = j1.clamp(0, self.ny as i64) as usize;
        let mut filled = 0;
        for j in cj0..cj1 {
            let row = &self.cells[j * self.nx..(j + 1) * self.nx];
            filled += row[ci0..ci1].iter().filter(|&&c| c).count();
        }
        Ok((filled, total))
    }

    /// Fills every cell whose centre is within `radius` of segment `a`-`b`.
    pub fn stamp_capsule(&mut self, a: [f64; 2], b: [f64; 2], radius: f64) {
        let (j0, j1) = self.center_range(1, a[1].min(b[1]) - radius, a[1].max(b[1]) + radius);
        let j0 = j0.clamp(0, self.ny as i64) as usize;
        let j1 = j1.clamp(0, self.ny as i64) as usize;
        for j in j0..j1 {
            let y = self.origin[1] + (j as f64 + 0.5) * self.resolution;
            let Some((xa, xb)) = capsule_row(a, b, radius, y) else {
                continue;
            };
            let (i0, i1) = self.center_range(0, xa, xb);
            let i0 = i0.clamp(0, self.nx as i64) as usize;
            let i1 = i1.clamp(0, self.nx as i64) as usize;
            if i0 < i1 {
                self.cells[j * self.nx + i0..j * self.nx + i1].fill(true);
            }
        }
    }

    pub(crate) fn cells(&self) -> &[bool] {
        &self.cells
    }
}

/// X interval of the capsule `{p : dist(p, ab) <= r}` on the line at `y`.
/// The capsule is convex, so the cut is the hull of the cuts through both
/// end discs and the swept rectangle.
fn capsule_row(a: [f64; 2], b: [f64; 2], r: f64, y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in [a, b] {
        let dy = y - c[1];
        let h2 = r * r - dy * dy;
        if h2 >= 0.0 {
            let h = h2.sqrt();
            lo = lo.min(c[0] - h);
            hi = hi.max(c[0] + h);
        }
    }
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    if len > 0.0 {
        let (nx, ny) = (-dy / len * r, dx / len * r);
        let corners = [
            [a[0] + nx, a[1] + ny],
            [b[0] + nx, b[1] + ny],
            [b[0] - nx, b[1] - ny],
            [a[0] - nx, a[1] - ny],
        ];
        for k in 0..4 {
            let p = corners[k];
            let q = corners[(k + 1) % 4];
            if (p[1] - y) * (q[1] - y) <= 0.0 {
                if p[1] == q[1] {
                    lo = lo.min(p[0].min(q[0]));
                    hi = hi.max(p[0].max(q[0]));
                } else {
                    let x = p[0] + (y - p[1]) / (q[1] - p[1]) * (q[0] - p[0]);
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Stamps extruding moves into a raster sized to their footprint plus one
/// line-width margin. Non-extruding moves are ignored.
pub fn stamp_layer(
    moves: &[PrintMove],
    widths: &[f64],
    resolution: f64,
) -> Result<LayerRaster, SimError> {
    let mut bounds = Rect::empty();
    let mut margin: f64 = 0.0;
    for (m, &w) in moves.iter().zip(widths) {
        if m.is_deposition() {
            bounds.include(m.start[0], m.start[1]);
            bounds.include(m.end[0], m.end[1]);
            margin = margin.max(w);
        }
    }
    stamp_layer_in(moves, widths, resolution, bounds.expanded(margin))
}

/// As [`stamp_layer`], over a caller-chosen area.
pub fn stamp_layer_in(
    moves: &[PrintMove],
    widths: &[f64],
    resolution: f64,
    bounds: Rect,
) -> Result<LayerRaster, SimError> {
    if moves.len() != widths.len() {
        return Err(SimError::WidthCountMismatch {
            moves: moves.len(),
            widths: widths.len(),
        });
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(SimError::InvalidResolution(resolution));
    }
    let mut z = None;
    let mut narrowest = f64::INFINITY;
    for (m, &w) in moves.iter().zip(widths) {
        if !m.is_deposition() {
            continue;
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(SimError::InvalidWidth(w));
        }
        for mz in [m.start[2], m.end[2]] {
            match z {
                None => z = Some(mz),
                Some(z0) if (mz - z0).abs() > 1e-6 => return Err(SimError::MixedLayers(z0, mz)),
                _ => {}
            }
        }
        narrowest = narrowest.min(w);
    }
    if resolution > narrowest / 4.0 {
        return Err(SimError::ResolutionTooCoarse {
            resolution,
            width: narrowest,
        });
    }
    let mut raster = LayerRaster::covering(bounds, resolution, z.unwrap_or(0.0))?;
    for (m, &w) in moves.iter().zip(widths) {
        if m.is_deposition() {
            raster.stamp_capsule([m.start[0], m.start[1]], [m.end[0], m.end[1]], w / 2.0);
        }
    }
    Ok(raster)
}
