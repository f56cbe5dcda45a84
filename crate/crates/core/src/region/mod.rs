//! Region-selective flow rewriting.
//!
//! Regions are open sets: a point on a region boundary is outside. A move
//! crossing a boundary is clipped so only the part inside is rescaled.

mod clip;
mod sample;
mod toolchange;
mod transform;

use serde::Serialize;
use thiserror::Error;

use crate::flow::FlowError;
use crate::gcode::{ParseError, ReplayError};

pub use clip::{clip_move, ClipPiece};
pub use sample::{plan_porous_sample, SampleSpec};
pub use toolchange::{remove_redundant_toolchanges, ToolAlias, ToolchangeMarkers};
pub use transform::{apply_regions, apply_regions_with, RegionTally, TransformReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("region `{label}`: {reason}")]
    InvalidRegion { label: String, reason: String },
    #[error("regions `{first}` and `{second}` overlap")]
    Overlap { first: String, second: String },
    #[error("line {line}: tool T{tool} has no physical extruder mapping")]
    UnmappedTool { line: usize, tool: u32 },
    #[error("sample: {0}")]
    InvalidSample(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Geometric extent of a region, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RegionShape {
    AxisAlignedBox {
        min: [f64; 3],
        max: [f64; 3],
    },
    ZSlab {
        z_min: f64,
        z_max: f64,
    },
    Cylinder {
        center: [f64; 2],
        radius: f64,
        z_min: f64,
        z_max: f64,
    },
}

impl RegionShape {
    pub fn validate(&self) -> Result<(), String> {
        let not_nan = |v: f64| !v.is_nan();
        match *self {
            RegionShape::AxisAlignedBox { min, max } => {
                for i in 0..3 {
                    if min[i].is_nan() || max[i].is_nan() || !(min[i] < max[i]) {
                        return Err(format!("box bounds must satisfy min < max on every axis, got {min:?} / {max:?}"));
                    }
                }
                Ok(())
            }
            RegionShape::ZSlab { z_min, z_max } => {
                if not_nan(z_min) && not_nan(z_max) && z_min < z_max {
                    Ok(())
                } else {
                    Err(format!("slab needs z_min < z_max, got {z_min} / {z_max}"))
                }
            }
            RegionShape::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => {
                if !(center[0].is_finite() && center[1].is_finite()) {
                    return Err("cylinder center must be finite".into());
                }
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(format!("cylinder radius must be positive, got {radius}"));
                }
                if !(z_min < z_max) {
                    return Err(format!(
                        "cylinder needs z_min < z_max, got {z_min} / {z_max}"
                    ));
                }
                Ok(())
            }
        }
    }

    /// Open-set membership.
    pub fn contains(&self, p: &[f64; 3]) -> bool {
        match *self {
            RegionShape::AxisAlignedBox { min, max } => {
                (0..3).all(|i| min[i] < p[i] && p[i] < max[i])
            }
            RegionShape::ZSlab { z_min, z_max } => z_min < p[2] && p[2] < z_max,
            RegionShape::Cylinder {
                center,
                radius,
                z_min,
                z_max,
            } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                z_min < p[2] && p[2] < z_max && dx * dx + dy * dy < radius * radius
            }
        }
    }

    fn z_range(&self) -> (f64, f64) {
        match *self {
            RegionShape::AxisAlignedBox { min, max } => (min[2], max[2]),
            RegionShape::ZSlab { z_min, z_max } | RegionShape::Cylinder { z_min, z_max, .. } => {
                (z_min, z_max)
            }
        }
    }

    /// Whether the two open sets share any point.
    pub fn overlaps(&self, other: &RegionShape) -> bool {
        let (a0, a1) = self.z_range();
        let (b0, b1) = other.z_range();
        if !(a0 < b1 && b0 < a1) {
            return false;
        }
        use RegionShape::*;
        match (*self, *other) {
            (ZSlab { .. }, _) | (_, ZSlab { .. }) => true,
            (
                AxisAlignedBox {
                    min: amin,
                    max: amax,
                },
                AxisAlignedBox {
                    min: bmin,
                    max: bmax,
                },
            ) => (0..2).all(|i| amin[i] < bmax[i] && bmin[i] < amax[i]),
            (
                Cylinder {
                    center: c1,
                    radius: r1,
                    ..
                },
                Cylinder {
                    center: c2,
                    radius: r2,
                    ..
                },
            ) => (c1[0] - c2[0]).hypot(c1[1] - c2[1]) < r1 + r2,
            (AxisAlignedBox { min, max }, Cylinder { center, radius, .. })
            | (Cylinder { center, radius, .. }, AxisAlignedBox { min, max }) => {
                let nx = center[0].clamp(min[0], max[0]);
                let ny = center[1].clamp(min[1], max[1]);
                (center[0] - nx).hypot(center[1] - ny) < radius
            }
        }
    }
}

/// A volume plus the flow fraction to print inside it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSpec {
    pub label: String,
    pub shape: RegionShape,
    /// Absolute flow fraction inside the region.
    pub target_gamma: f64,
    /// mm/min, applied to extruding moves inside the region only.
    pub feedrate_override: Option<f64>,
}

impl RegionSpec {
    pub fn new(label: impl Into<String>, shape: RegionShape, target_gamma: f64) -> Self {
        RegionSpec {
            label: label.into(),
            shape,
            target_gamma,
            feedrate_override: None,
        }
    }

    pub fn validate(&self) -> Result<(), RegionError> {
        let invalid = |reason: String| RegionError::InvalidRegion {
            label: self.label.clone(),
            reason,
        };
        self.shape.validate().map_err(invalid)?;
        crate::flow::check_flow_fraction(self.target_gamma).map_err(|e| invalid(e.to_string()))?;
        if let Some(f) = self.feedrate_override {
            if !(f.is_finite() && f > 0.0) {
                return Err(invalid(format!(
                    "feedrate override must be positive, got {f}"
                )));
            }
        }
        Ok(())
    }
}

/// Validates every region and rejects overlapping pairs.
pub fn validate_regions(regions: &[RegionSpec]) -> Result<(), RegionError> {
    for r in regions {
        r.validate()?;
    }
    for (i, a) in regions.iter().enumerate() {
        for b in &regions[i + 1..] {
            if a.shape.overlaps(&b.shape) {
                return Err(RegionError::Overlap {
                    first: a.label.clone(),
                    second: b.label.clone(),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(min: [f64; 3], max: [f64; 3]) -> RegionShape {
        RegionShape::AxisAlignedBox { min, max }
    }

    #[test]
    fn boundary_points_are_outside() {
        let s = bx([0.0; 3], [1.0; 3]);
        assert!(s.contains(&[0.5, 0.5, 0.5]));
        assert!(!s.contains(&[1.0, 0.5, 0.5]));
        let c = RegionShape::Cylinder {
            center: [0.0, 0.0],
            radius: 1.0,
            z_min: 0.0,
            z_max: 1.0,
        };
        assert!(!c.contains(&[1.0, 0.0, 0.5]));
        assert!(c.contains(&[0.99, 0.0, 0.5]));
    }

    #[test]
    fn touching_regions_do_not_overlap() {
        let a = RegionSpec::new("a", bx([0.0; 3], [1.0; 3]), 0.3);
        let b = RegionSpec::new("b", bx([1.0, 0.0, 0.0], [2.0, 1.0, 1.0]), 0.3);
        assert!(validate_regions(&[a.clone(), b]).is_ok());
        let c = RegionSpec::new(
            "c",
            RegionShape::ZSlab {
                z_min: 0.5,
                z_max: 3.0,
            },
            0.5,
        );
        assert_eq!(
            validate_regions(&[a, c]),
            Err(RegionError::Overlap {
                first: "a".into(),
                second: "c".into()
            })
        );
    }

    #[test]
    fn box_cylinder_overlap_uses_nearest_point() {
        let b = bx([0.0; 3], [1.0; 3]);
        let near = RegionShape::Cylinder {
            center: [1.5, 0.5],
            radius: 0.6,
            z_min: 0.0,
            z_max: 1.0,
        };
        let far = RegionShape::Cylinder {
            center: [1.5, 1.5],
            radius: 0.6,
            z_min: 0.0,
            z_max: 1.0,
        };
        assert!(b.overlaps(&near));
        assert!(!b.overlaps(&far));
    }

    #[test]
    fn rejects_malformed_bounds() {
        assert!(RegionSpec::new("x", bx([0.0; 3], [1.0, 0.0, 1.0]), 0.3)
            .validate()
            .is_err());
        assert!(RegionSpec::new("x", bx([0.0; 3], [1.0; 3]), 2.5)
            .validate()
            .is_err());
        let cyl = RegionShape::Cylinder {
            center: [0.0, 0.0],
            radius: 0.0,
            z_min: 0.0,
            z_max: 1.0,
        };
        assert!(RegionSpec::new("x", cyl, 0.3).validate().is_err());
    }
}
