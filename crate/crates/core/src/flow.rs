//! Conservation-of-mass extrusion geometry.
//!
//! A deposited line is modelled as a stadium (rectangle with semicircular
//! ends) of width `l_w` and height `l_h`. Equating the filament volume fed
//! by the extruder with the deposited volume gives the line width as an
//! affine function of the slicer flow fraction:
//!
//! ```text
//! l_w = gamma * l_wn - l_h * (pi/4 - 1)
//! ```
//!
//! Below `l_w < l_h` the stadium no longer exists; the width is still
//! reported (it predicts free-standing fiber diameters well) but tagged as
//! [`Regime::Fiber`] and volume accounting switches to a circular section.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

/// `pi/4 - 1`: area deficit of the stadium's round ends, per unit `l_h^2`.
const END_CAP_DEFICIT: f64 = FRAC_PI_4 - 1.0;

pub const MAX_FLOW_FRACTION: f64 = 2.0;

pub const DEFAULT_FILAMENT_DIAMETER: f64 = 1.75;
pub const DEFAULT_NOMINAL_WIDTH: f64 = 0.4;
pub const DEFAULT_LAYER_HEIGHT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("{name} must be a finite positive length, got {value}")]
    NonPositiveLength { name: &'static str, value: f64 },
    #[error("flow fraction must lie in (0, 2], got {0}")]
    FlowOutOfRange(f64),
    #[error(
        "unreachable width {target:.4} mm: feasible widths are ({min:.4}, {max:.4}] mm for flow in (0, 2]"
    )]
    UnreachableWidth { target: f64, min: f64, max: f64 },
    #[error("line width {width} mm is below layer height {layer_height} mm (fiber regime); use fiber_area")]
    FiberRegime { width: f64, layer_height: f64 },
    #[error("path length must be positive to define a width")]
    ZeroPathLength,
    #[error("cannot read flow `{text}`: {reason}")]
    BadFlowText { text: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `l_w >= l_h`: a fused trace with stadium cross-section.
    Trace,
    /// `l_w < l_h`: a free-standing fiber.
    Fiber,
}

impl Regime {
    pub fn of(width: f64, layer_height: f64) -> Self {
        if width < layer_height {
            Regime::Fiber
        } else {
            Regime::Trace
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Trace => "trace",
            Regime::Fiber => "fiber",
        }
    }
}

/// Printer and slicer settings that drive the extrusion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowParams {
    /// mm
    pub filament_diameter: f64,
    /// Nominal line width, usually the nozzle diameter. mm
    pub nominal_width: f64,
    /// mm
    pub layer_height: f64,
    /// Slicer flow multiplier as a fraction (1.0 == 100 %).
    pub flow_fraction: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            filament_diameter: DEFAULT_FILAMENT_DIAMETER,
            nominal_width: DEFAULT_NOMINAL_WIDTH,
            layer_height: DEFAULT_LAYER_HEIGHT,
            flow_fraction: 1.0,
        }
    }
}

fn check_length(name: &'static str, value: f64) -> Result<(), FlowError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(FlowError::NonPositiveLength { name, value })
    }
}

pub fn check_flow_fraction(gamma: f64) -> Result<(), FlowError> {
    if gamma.is_finite() && gamma > 0.0 && gamma <= MAX_FLOW_FRACTION {
        Ok(())
    } else {
        Err(FlowError::FlowOutOfRange(gamma))
    }
}

/// Reads a flow setting written either as a percentage with an explicit
/// `%` suffix (`"30%"`) or as a fraction (`"0.3"`).
pub fn parse_flow_fraction(text: &str) -> Result<f64, FlowError> {
    let t = text.trim();
    let bad = |reason: String| FlowError::BadFlowText {
        text: text.to_string(),
        reason,
    };
    let (number, percent) = match t.strip_suffix('%') {
        Some(n) => (n.trim_end(), true),
        None => (t, false),
    };
    let v: f64 = number.parse().map_err(|_| bad("not a number".into()))?;
    let gamma = if percent { v / 100.0 } else { v };
    if !percent && gamma > MAX_FLOW_FRACTION && gamma <= 100.0 * MAX_FLOW_FRACTION {
        return Err(bad(format!("{v} is out of range as a fraction; write `{v}%` for percent")));
    }
    check_flow_fraction(gamma)?;
    Ok(gamma)
}

impl FlowParams {
    pub fn new(
        filament_diameter: f64,
        nominal_width: f64,
        layer_height: f64,
        flow_fraction: f64,
    ) -> Result<Self, FlowError> {
        let p = FlowParams {
            filament_diameter,
            nominal_width,
            layer_height,
            flow_fraction,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        check_length("filament diameter", self.filament_diameter)?;
        check_length("nominal width", self.nominal_width)?;
        check_length("layer height", self.layer_height)?;
        check_flow_fraction(self.flow_fraction)
    }

    pub fn with_flow(self, flow_fraction: f64) -> Self {
        FlowParams {
            flow_fraction,
            ..self
        }
    }

    /// Cross-section area of the raw filament, mm².
    pub fn filament_area(&self) -> f64 {
        FRAC_PI_4 * self.filament_diameter * self.filament_diameter
    }
}

/// Predicted line width and its regime. The value is not clamped.
pub fn line_width(p: &FlowParams) -> (f64, Regime) {
    let w = p.flow_fraction * p.nominal_width - p.layer_height * END_CAP_DEFICIT;
    (w, Regime::of(w, p.layer_height))
}

/// Smallest width the model can reach, approached as the flow goes to zero.
pub fn min_width(layer_height: f64) -> f64 {
    -layer_height * END_CAP_DEFICIT
}

/// Flow fraction that yields `target_width`.
pub fn gamma_for_width(
    target_width: f64,
    nominal_width: f64,
    layer_height: f64,
) -> Result<f64, FlowError> {
    check_length("target width", target_width)?;
    check_length("nominal width", nominal_width)?;
    check_length("layer height", layer_height)?;
    let gamma = (target_width + layer_height * END_CAP_DEFICIT) / nominal_width;
    if gamma > 0.0 && gamma <= MAX_FLOW_FRACTION {
        Ok(gamma)
    } else {
        Err(FlowError::UnreachableWidth {
            target: target_width,
            min: min_width(layer_height),
            max: MAX_FLOW_FRACTION * nominal_width + min_width(layer_height),
        })
    }
}

/// Stadium cross-section area, mm². Only defined for `l_w >= l_h`.
pub fn cross_section_area(line_width: f64, layer_height: f64) -> Result<f64, FlowError> {
    check_length("layer height", layer_height)?;
    if line_width < layer_height {
        return Err(FlowError::FiberRegime {
            width: line_width,
            layer_height,
        });
    }
    Ok((line_width - layer_height) * layer_height + FRAC_PI_4 * layer_height * layer_height)
}

/// Circular section of a free fiber of diameter `line_width`, mm².
pub fn fiber_area(line_width: f64) -> f64 {
    FRAC_PI_4 * line_width * line_width
}

/// Section area for whichever regime the width falls in.
pub fn deposited_area(line_width: f64, layer_height: f64) -> f64 {
    match Regime::of(line_width, layer_height) {
        Regime::Trace => {
            (line_width - layer_height) * layer_height + FRAC_PI_4 * layer_height * layer_height
        }
        Regime::Fiber => fiber_area(line_width),
    }
}

/// Filament length the slicer feeds to deposit a path of length `path_length`.
pub fn filament_feed(p: &FlowParams, path_length: f64) -> f64 {
    p.flow_fraction * (p.nominal_width * p.layer_height * path_length) / p.filament_area()
}

/// Actual line width produced by feeding `feed` mm of filament over `path_length` mm.
pub fn width_from_feed(
    feed: f64,
    path_length: f64,
    filament_diameter: f64,
    layer_height: f64,
) -> Result<f64, FlowError> {
    if !(path_length > 0.0) {
        return Err(FlowError::ZeroPathLength);
    }
    let filament_area = FRAC_PI_4 * filament_diameter * filament_diameter;
    Ok(filament_area * feed / (layer_height * path_length) - layer_height * END_CAP_DEFICIT)
}

/// All quantities of one extrusion along a straight path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtrusionEvent {
    pub path_length: f64,
    pub filament_feed: f64,
    pub volume_in: f64,
    pub volume_out: f64,
    pub line_width: f64,
    pub regime: Regime,
}

/// Builds the extrusion for a path; `volume_out` uses the regime's section.
pub fn extrusion_event(p: &FlowParams, path_length: f64) -> ExtrusionEvent {
    let feed = filament_feed(p, path_length);
    let (width, regime) = line_width(p);
    ExtrusionEvent {
        path_length,
        filament_feed: feed,
        volume_in: p.filament_area() * feed,
        volume_out: deposited_area(width, p.layer_height) * path_length,
        line_width: width,
        regime,
    }
}

/// One row of the published microscopy table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicroscopyRow {
    pub flow_percent: u32,
    /// µm, as printed (integer-truncated model value)
    pub predicted_um: f64,
    /// µm
    pub measured_um: f64,
    /// µm
    pub abs_error_um: f64,
}

/// Microscopy measurements of fiber diameter for a 0.4 mm nozzle at 0.2 mm layers.
pub const MICROSCOPY_REFERENCE: [MicroscopyRow; 8] = [
    MicroscopyRow {
        flow_percent: 10,
        predicted_um: 82.0,
        measured_um: 73.0,
        abs_error_um: 9.0,
    },
    MicroscopyRow {
        flow_percent: 20,
        predicted_um: 122.0,
        measured_um: 123.0,
        abs_error_um: 1.0,
    },
    MicroscopyRow {
        flow_percent: 30,
        predicted_um: 162.0,
        measured_um: 164.0,
        abs_error_um: 2.0,
    },
    MicroscopyRow {
        flow_percent: 40,
        predicted_um: 202.0,
        measured_um: 193.0,
        abs_error_um: 9.0,
    },
    MicroscopyRow {
        flow_percent: 50,
        predicted_um: 242.0,
        measured_um: 252.0,
        abs_error_um: 10.0,
    },
    MicroscopyRow {
        flow_percent: 60,
        predicted_um: 282.0,
        measured_um: 277.0,
        abs_error_um: 5.0,
    },
    MicroscopyRow {
        flow_percent: 80,
        predicted_um: 362.0,
        measured_um: 366.0,
        abs_error_um: 4.0,
    },
    MicroscopyRow {
        flow_percent: 100,
        predicted_um: 442.0,
        measured_um: 430.0,
        abs_error_um: 12.0,
    },
];

/// Mean absolute error quoted in the running text of the source publication, µm.
/// It disagrees with the table's own error column (mean 6.5 µm).
pub const QUOTED_MAE_RESULTS_UM: f64 = 7.0;
/// A second quote of the same comparison elsewhere in the publication, µm.
pub const QUOTED_MAE_DISCUSSION_UM: f64 = 8.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MicroscopyComparisonRow {
    pub flow_percent: u32,
    /// Model width, µm.
    pub model_um: f64,
    pub regime: Regime,
    pub reference_predicted_um: f64,
    pub measured_um: f64,
    /// |model - measured|, µm.
    pub model_abs_error_um: f64,
    pub reference_abs_error_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MicroscopyComparison {
    pub rows: Vec<MicroscopyComparisonRow>,
    /// Mean of |model - measured|, µm.
    pub model_mae_um: f64,
    /// Mean of the table's own predicted-vs-measured errors, µm.
    pub reference_mae_um: f64,
    pub quoted_mae_um: [f64; 2],
}

/// Evaluates the model at every microscopy flow setting and compares.
pub fn table1_report(base: &FlowParams) -> MicroscopyComparison {
    let rows: Vec<MicroscopyComparisonRow> = MICROSCOPY_REFERENCE
        .iter()
        .map(|r| {
            let (w, regime) = line_width(&base.with_flow(r.flow_percent as f64 / 100.0));
            let model_um = w * 1000.0;
            MicroscopyComparisonRow {
                flow_percent: r.flow_percent,
                model_um,
                regime,
                reference_predicted_um: r.predicted_um,
                measured_um: r.measured_um,
                model_abs_error_um: (model_um - r.measured_um).abs(),
                reference_abs_error_um: (r.predicted_um - r.measured_um).abs(),
            }
        })
        .collect();
    let n = rows.len() as f64;
    MicroscopyComparison {
        model_mae_um: rows.iter().map(|r| r.model_abs_error_um).sum::<f64>() / n,
        reference_mae_um: rows.iter().map(|r| r.reference_abs_error_um).sum::<f64>() / n,
        rows,
        quoted_mae_um: [QUOTED_MAE_RESULTS_UM, QUOTED_MAE_DISCUSSION_UM],
    }
}

/// CSV export of the reference table.
pub fn microscopy_reference_csv() -> String {
    let mut out = String::from("flow_percent,predicted_um,measured_um,abs_error_um\n");
    for r in &MICROSCOPY_REFERENCE {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.flow_percent, r.predicted_um, r.measured_um, r.abs_error_um
        );
    }
    out
}
