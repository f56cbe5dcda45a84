use crate::gcode::PrintMove;

use super::RegionShape;

/// A maximal run of a move that is entirely inside or outside a shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipPiece {
    /// Parameter range on the parent move, `0 <= t0 <= t1 <= 1`.
    pub t0: f64,
    pub t1: f64,
    pub start: [f64; 3],
    pub end: [f64; 3],
    /// Share of the parent's extrusion, proportional to length.
    pub delta_e: f64,
    pub inside: bool,
}

impl ClipPiece {
    pub fn length(&self) -> f64 {
        crate::gcode::distance(&self.start, &self.end)
    }
}

/// Open parameter interval on the infinite line `p0 + t (p1 - p0)` lying
/// strictly inside the shape, or `None`.
pub(crate) fn inside_interval(
    shape: &RegionShape,
    p0: &[f64; 3],
    p1: &[f64; 3],
) -> Option<(f64, f64)> {
    let d = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
    match *shape {
        RegionShape::AxisAlignedBox { min, max } => {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for i in 0..3 {
                let (a, b) = slab_interval(p0[i], d[i], min[i], max[i])?;
                lo = lo.max(a);
                hi = hi.min(b);
            }
            (lo < hi).then_some((lo, hi))
        }
        RegionShape::ZSlab { z_min, z_max } => slab_interval(p0[2], d[2], z_min, z_max),
        RegionShape::Cylinder {
            center,
            radius,
            z_min,
            z_max,
        } => {
            let (zl, zh) = slab_interval(p0[2], d[2], z_min, z_max)?;
            let fx = p0[0] - center[0];
            let fy = p0[1] - center[1];
            let a = d[0] * d[0] + d[1] * d[1];
            let c = fx * fx + fy * fy - radius * radius;
            let (dl, dh) = if a == 0.0 {
                if c < 0.0 {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    return None;
                }
            } else {
                let b = 2.0 * (fx * d[0] + fy * d[1]);
                let disc = b * b - 4.0 * a * c;
                if disc <= 0.0 {
                    // tangent lines only touch the boundary
                    return None;
                }
                let sq = disc.sqrt();
                let q = -0.5 * (b + b.signum() * sq);
                let (r1, r2) = if q == 0.0 {
                    let r = sq / (2.0 * a);
                    (-r, r)
                } else {
                    (q / a, c / q)
                };
                (r1.min(r2), r1.max(r2))
            };
            let lo = zl.max(dl);
            let hi = zh.min(dh);
            (lo < hi).then_some((lo, hi))
        }
    }
}

fn slab_interval(origin: f64, dir: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if dir == 0.0 {
        return (lo < origin && origin < hi).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let a = (lo - origin) / dir;
    let b = (hi - origin) / dir;
    Some((a.min(b), a.max(b)))
}

/// The part of `[0, 1]` inside the shape, if it has positive width.
pub(crate) fn inside_span(shape: &RegionShape, mv: &PrintMove) -> Option<(f64, f64)> {
    let (lo, hi) = inside_interval(shape, &mv.start, &mv.end)?;
    let lo = lo.max(0.0);
    let hi = hi.min(1.0);
    (lo < hi).then_some((lo, hi))
}

/// Splits a linear move at the shape boundary into ordered, maximal pieces.
pub fn clip_move(mv: &PrintMove, shape: &RegionShape) -> Vec<ClipPiece> {
    if mv.start == mv.end {
        return vec![ClipPiece {
            t0: 0.0,
            t1: 1.0,
            start: mv.start,
            end: mv.end,
            delta_e: mv.delta_e,
            inside: shape.contains(&mv.start),
        }];
    }
    let mut cuts = vec![(0.0, false)];
    if let Some((lo, hi)) = inside_span(shape, mv) {
        if lo > 0.0 {
            cuts.push((lo, true));
        } else {
            cuts[0].1 = true;
        }
        if hi < 1.0 {
            cuts.push((hi, false));
        }
    }
    pieces_from_cuts(mv, &cuts, |inside| inside)
}

/// Builds pieces from ascending `(t_start, label)` cuts beginning at 0.
pub(crate) fn pieces_from_cuts<L: Copy, F: Fn(L) -> bool>(
    mv: &PrintMove,
    cuts: &[(f64, L)],
    is_inside: F,
) -> Vec<ClipPiece> {
    cuts.iter()
        .enumerate()
        .map(|(k, &(t0, label))| {
            let t1 = cuts.get(k + 1).map_or(1.0, |c| c.0);
            ClipPiece {
                t0,
                t1,
                start: mv.point_at(t0),
                end: mv.point_at(t1),
                delta_e: mv.delta_e * (t1 - t0),
                inside: is_inside(label),
            }
        })
        .collect()
}
