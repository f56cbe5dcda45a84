//! Rectilinear test-sample toolpaths: a fully extruded base with a porous
//! top section printed at reduced flow and wider line pitch.

use std::fmt::Write as _;

use serde::Serialize;

use crate::flow::{filament_feed, FlowParams};
use crate::gcode::{format_axis, format_e, format_feedrate, parse_document, GCodeDocument};

use super::RegionError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSpec {
    /// Lower-left corner of the footprint, mm.
    pub origin: [f64; 2],
    /// Footprint extent in X and Y, mm.
    pub footprint: [f64; 2],
    /// Height of the fully extruded base, mm.
    pub solid_height: f64,
    /// Height of the porous section on top, mm.
    pub porous_height: f64,
    /// Printer settings; `flow_fraction` is the porous section's flow.
    pub params: FlowParams,
    /// Line pitch of the base, mm.
    pub solid_spacing: f64,
    /// Line pitch of the porous section, mm.
    pub porous_pitch: f64,
    /// mm/min
    pub print_feedrate: f64,
    /// mm/min
    pub travel_feedrate: f64,
    pub relative_e: bool,
}

impl Default for SampleSpec {
    /// 20 x 20 mm footprint, 1 mm solid base, 2 mm porous top at 30 % flow,
    /// printed at 80 mm/s.
    fn default() -> Self {
        let params = FlowParams::default().with_flow(0.3);
        SampleSpec {
            origin: [0.0, 0.0],
            footprint: [20.0, 20.0],
            solid_height: 1.0,
            porous_height: 2.0,
            solid_spacing: params.nominal_width,
            porous_pitch: 2.0 * params.nominal_width,
            params,
            print_feedrate: 80.0 * 60.0,
            travel_feedrate: 150.0 * 60.0,
            relative_e: false,
        }
    }
}

impl SampleSpec {
    pub fn with_porous_gamma(mut self, gamma: f64) -> Self {
        self.params.flow_fraction = gamma;
        self
    }

    fn layer_count(&self, height: f64, what: &str) -> Result<usize, RegionError> {
        let n = height / self.params.layer_height;
        let rounded = n.round();
        if !(height >= 0.0) || (n - rounded).abs() > 1e-6 {
            return Err(RegionError::InvalidSample(format!(
                "{what} height {height} mm is not a multiple of the layer height {} mm",
                self.params.layer_height
            )));
        }
        Ok(rounded as usize)
    }

    /// Number of (solid, porous) layers.
    pub fn layers(&self) -> Result<(usize, usize), RegionError> {
        Ok((
            self.layer_count(self.solid_height, "solid")?,
            self.layer_count(self.porous_height, "porous")?,
        ))
    }

    /// Z of the top of the solid base, mm.
    pub fn porous_start_z(&self) -> f64 {
        self.solid_height
    }
}

/// Line centre offsets across an extent for a given pitch, centred.
fn line_offsets(extent: f64, pitch: f64) -> Vec<f64> {
    let n = ((extent / pitch + 1e-9).floor() as usize).max(1);
    let first = (extent - (n - 1) as f64 * pitch) / 2.0;
    (0..n).map(|k| first + k as f64 * pitch).collect()
}

pub fn plan_porous_sample(spec: &SampleSpec) -> Result<GCodeDocument, RegionError> {
    spec.params.validate()?;
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !(positive(spec.footprint[0]) && positive(spec.footprint[1])) {
        return Err(RegionError::InvalidSample(
            "footprint must be positive".into(),
        ));
    }
    if !(positive(spec.solid_spacing) && positive(spec.porous_pitch)) {
        return Err(RegionError::InvalidSample(
            "line spacing must be positive".into(),
        ));
    }
    if !(positive(spec.print_feedrate) && positive(spec.travel_feedrate)) {
        return Err(RegionError::InvalidSample(
            "feedrates must be positive".into(),
        ));
    }
    let (n_solid, n_porous) = spec.layers()?;
    let lh = spec.params.layer_height;
    let full = spec.params.with_flow(1.0);
    let porous = spec.params;

    let mut g = String::new();
    let _ = writeln!(
        g,
        "; rectilinear sample {}x{} mm, solid {} mm, porous {} mm at {}% flow",
        spec.footprint[0],
        spec.footprint[1],
        spec.solid_height,
        spec.porous_height,
        format_e(porous.flow_fraction * 100.0)
    );
    g.push_str("M104 S210\nM109 S210\nG90\n");
    g.push_str(if spec.relative_e { "M83\n" } else { "M82\n" });
    g.push_str("G92 E0\n");

    let travel = format_feedrate(spec.travel_feedrate);
    let print = format_feedrate(spec.print_feedrate);
    let mut e_total = 0.0;

    for layer in 0..n_solid + n_porous {
        let is_porous = layer >= n_solid;
        let (params, pitch) = if is_porous {
            (&porous, spec.porous_pitch)
        } else {
            (&full, spec.solid_spacing)
        };
        let z = (layer + 1) as f64 * lh;
        let _ = writeln!(
            g,
            ";LAYER:{layer} {}",
            if is_porous { "porous" } else { "solid" }
        );
        let _ = writeln!(g, "G0 Z{} F{travel}", format_axis(z));

        // even layers run along X, odd layers along Y
        let along = layer % 2;
        let across = 1 - along;
        let along_extent = spec.footprint[along];
        let inset = if along_extent > spec.params.nominal_width {
            spec.params.nominal_width / 2.0
        } else {
            0.0
        };
        let (a0, a1) = (inset, along_extent - inset);
        for (k, offset) in line_offsets(spec.footprint[across], pitch)
            .into_iter()
            .enumerate()
        {
            let (from, to) = if k % 2 == 0 { (a0, a1) } else { (a1, a0) };
            let mut start = [0.0; 2];
            let mut end = [0.0; 2];
            start[along] = from;
            end[along] = to;
            start[across] = offset;
            end[across] = offset;
            for p in [&mut start, &mut end] {
                p[0] += spec.origin[0];
                p[1] += spec.origin[1];
            }
            let _ = writeln!(
                g,
                "G0 X{} Y{} F{travel}",
                format_axis(start[0]),
                format_axis(start[1])
            );
            let feed = filament_feed(params, (to - from).abs());
            let e_word = if spec.relative_e {
                format_e(feed)
            } else {
                e_total += feed;
                format_e(e_total)
            };
            let _ = writeln!(
                g,
                "G1 X{} Y{} E{e_word} F{print}",
                format_axis(end[0]),
                format_axis(end[1])
            );
        }
    }
    g.push_str("M104 S0\n");
    Ok(parse_document(g.as_bytes())?)
}
