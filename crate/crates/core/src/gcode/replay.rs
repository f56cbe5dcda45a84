//! Kinematic replay of a parsed document into straight print moves.

use std::f64::consts::PI;

use thiserror::Error;

use super::{GCodeDocument, GCodeLine, LineKind};

/// Default maximum chordal deviation when linearizing arcs, in mm.
pub const DEFAULT_ARC_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisMode {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineState {
    /// mm
    pub position: [f64; 3],
    /// Logical extruder axis value, mm of filament.
    pub e_axis: f64,
    /// mm/min; `None` until a motion command sets it.
    pub feedrate: Option<f64>,
    pub xyz_mode: AxisMode,
    pub e_mode: AxisMode,
    pub active_tool: u32,
}

impl Default for MachineState {
    fn default() -> Self {
        MachineState {
            position: [0.0; 3],
            e_axis: 0.0,
            feedrate: None,
            xyz_mode: AxisMode::Absolute,
            e_mode: AxisMode::Absolute,
            active_tool: 0,
        }
    }
}

/// One straight segment of motion.
#[derive(Debug, Clone, PartialEq)]
pub struct PrintMove {
    pub start: [f64; 3],
    pub end: [f64; 3],
    /// Filament fed during the move; negative for retractions.
    pub delta_e: f64,
    /// mm/min
    pub feedrate: f64,
    /// Index of the originating line in the document.
    pub source_line: usize,
    pub tool: u32,
}

impl PrintMove {
    pub fn length(&self) -> f64 {
        distance(&self.start, &self.end)
    }

    /// Path length projected on the XY plane.
    pub fn xy_length(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }

    pub fn is_travel(&self) -> bool {
        self.delta_e == 0.0
    }

    pub fn is_retraction(&self) -> bool {
        self.delta_e < 0.0
    }

    /// Extrudes while the nozzle moves.
    pub fn is_deposition(&self) -> bool {
        self.delta_e > 0.0 && self.length() > 0.0
    }

    pub fn point_at(&self, t: f64) -> [f64; 3] {
        lerp(&self.start, &self.end, t)
    }
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

pub(crate) fn lerp(a: &[f64; 3], b: &[f64; 3], t: f64) -> [f64; 3] {
    if t == 0.0 {
        return *a;
    }
    if t == 1.0 {
        return *b;
    }
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

/// A `T<n>` command seen during replay, whether or not it changed the tool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolChangeEvent {
    pub line: usize,
    pub previous: u32,
    pub tool: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub moves: Vec<PrintMove>,
    pub final_state: MachineState,
    pub tool_changes: Vec<ToolChangeEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayOptions {
    pub arc_tolerance: f64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            arc_tolerance: DEFAULT_ARC_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("line {line}: arc has no resolvable center (needs I/J or R)")]
    ArcWithoutCenter { line: usize },
    #[error("line {line}: arc radius {radius} cannot reach the end point")]
    ArcRadiusTooSmall { line: usize, radius: f64 },
    #[error("line {line}: motion before any feedrate was set")]
    MotionBeforeFeedrate { line: usize },
    #[error("line {line}: invalid tool index")]
    InvalidTool { line: usize },
}

impl ReplayError {
    /// 1-based line number of the failure.
    pub fn line(&self) -> usize {
        match self {
            ReplayError::ArcWithoutCenter { line }
            | ReplayError::ArcRadiusTooSmall { line, .. }
            | ReplayError::MotionBeforeFeedrate { line }
            | ReplayError::InvalidTool { line } => *line,
        }
    }
}

pub fn replay(doc: &GCodeDocument, initial: MachineState) -> Result<Replay, ReplayError> {
    replay_with(doc, initial, ReplayOptions::default())
}

pub fn replay_with(
    doc: &GCodeDocument,
    initial: MachineState,
    options: ReplayOptions,
) -> Result<Replay, ReplayError> {
    let mut machine = Machine {
        state: initial,
        moves: Vec::new(),
        tool_changes: Vec::new(),
        options,
    };
    for (index, line) in doc.lines.iter().enumerate() {
        machine.step(index, line)?;
    }
    Ok(Replay {
        moves: machine.moves,
        final_state: machine.state,
        tool_changes: machine.tool_changes,
    })
}

struct Machine {
    state: MachineState,
    moves: Vec<PrintMove>,
    tool_changes: Vec<ToolChangeEvent>,
    options: ReplayOptions,
}

impl Machine {
    fn step(&mut self, index: usize, line: &GCodeLine) -> Result<(), ReplayError> {
        let Some(cmd) = line.command() else {
            return Ok(());
        };
        match line.kind {
            LineKind::Motion => {
                if let Some(f) = line.value('F') {
                    if f > 0.0 {
                        self.state.feedrate = Some(f);
                    }
                }
                if cmd.value == 0.0 || cmd.value == 1.0 {
                    self.linear(index, line)
                } else {
                    self.arc(index, line, cmd.value == 2.0)
                }
            }
            LineKind::Mode => {
                match (cmd.letter, cmd.value as u32) {
                    ('G', 90) => {
                        // Marlin: G90/G91 also switch the extruder; M82/M83 override it
                        self.state.xyz_mode = AxisMode::Absolute;
                        self.state.e_mode = AxisMode::Absolute;
                    }
                    ('G', 91) => {
                        // Marlin: G90/G91 also switch the extruder; M82/M83 override it
                        self.state.xyz_mode = AxisMode::Relative;
                        self.state.e_mode = AxisMode::Relative;
                    }
                    ('M', 82) => self.state.e_mode = AxisMode::Absolute,
                    ('M', 83) => self.state.e_mode = AxisMode::Relative,
                    _ => {}
                }
                Ok(())
            }
            LineKind::SetPosition => {
                let axes = ['X', 'Y', 'Z'];
                let any = axes
                    .iter()
                    .chain(['E'].iter())
                    .any(|&a| line.word(a).is_some());
                if !any {
                    self.state.position = [0.0; 3];
                    self.state.e_axis = 0.0;
                }
                for (i, a) in axes.iter().enumerate() {
                    if let Some(v) = line.value(*a) {
                        self.state.position[i] = v;
                    }
                }
                if let Some(v) = line.value('E') {
                    self.state.e_axis = v;
                }
                Ok(())
            }
            LineKind::ToolChange => {
                if cmd.value < 0.0 || cmd.value.fract() != 0.0 {
                    return Err(ReplayError::InvalidTool { line: index + 1 });
                }
                let tool = cmd.value as u32;
                self.tool_changes.push(ToolChangeEvent {
                    line: index,
                    previous: self.state.active_tool,
                    tool,
                });
                self.state.active_tool = tool;
                Ok(())
            }
            LineKind::Other if cmd.is('G', 28) => {
                let named: Vec<usize> = (0..3).filter(|&i| line.word(['X', 'Y', 'Z'][i]).is_some()).collect();
                let axes = if named.is_empty() { vec![0, 1, 2] } else { named };
                for i in axes {
                    self.state.position[i] = 0.0;
                }
                Ok(())
            }
            LineKind::Other | LineKind::CommentOnly => Ok(()),
        }
    }

    fn target(&self, line: &GCodeLine) -> ([f64; 3], Option<f64>) {
        let mut end = self.state.position;
        for (i, axis) in ['X', 'Y', 'Z'].iter().enumerate() {
            if let Some(v) = line.value(*axis) {
                end[i] = match self.state.xyz_mode {
                    AxisMode::Absolute => v,
                    AxisMode::Relative => self.state.position[i] + v,
                };
            }
        }
        let delta_e = line.value('E').map(|v| match self.state.e_mode {
            AxisMode::Absolute => v - self.state.e_axis,
            AxisMode::Relative => v,
        });
        (end, delta_e)
    }

    fn has_motion_words(line: &GCodeLine) -> bool {
        ['X', 'Y', 'Z', 'E'].iter().any(|&a| line.word(a).is_some())
    }

    fn feedrate(&self, index: usize) -> Result<f64, ReplayError> {
        self.state
            .feedrate
            .ok_or(ReplayError::MotionBeforeFeedrate { line: index + 1 })
    }

    fn linear(&mut self, index: usize, line: &GCodeLine) -> Result<(), ReplayError> {
        if !Self::has_motion_words(line) {
            return Ok(());
        }
        let feedrate = self.feedrate(index)?;
        let (end, delta_e) = self.target(line);
        let delta_e = delta_e.unwrap_or(0.0);
        self.moves.push(PrintMove {
            start: self.state.position,
            end,
            delta_e,
            feedrate,
            source_line: index,
            tool: self.state.active_tool,
        });
        self.state.position = end;
        self.state.e_axis += delta_e;
        Ok(())
    }

    fn arc(&mut self, index: usize, line: &GCodeLine, clockwise: bool) -> Result<(), ReplayError> {
        let feedrate = self.feedrate(index)?;
        let start = self.state.position;
        let (end, delta_e) = self.target(line);
        let delta_e = delta_e.unwrap_or(0.0);
        let center = arc_center(line, &start, &end, clockwise).map_err(|e| e.at(index + 1))?;

        let points = linearize_arc(&start, &end, center, clockwise, self.options.arc_tolerance);
        let n = points.len();
        let mut prev = start;
        let mut prev_e = 0.0;
        for (k, p) in points.into_iter().enumerate() {
            let e_here = delta_e * (k + 1) as f64 / n as f64;
            self.moves.push(PrintMove {
                start: prev,
                end: p,
                delta_e: e_here - prev_e,
                feedrate,
                source_line: index,
                tool: self.state.active_tool,
            });
            prev = p;
            prev_e = e_here;
        }
        self.state.position = end;
        self.state.e_axis += delta_e;
        Ok(())
    }
}

enum CenterError {
    Missing,
    RadiusTooSmall(f64),
}

impl CenterError {
    fn at(self, line: usize) -> ReplayError {
        match self {
            CenterError::Missing => ReplayError::ArcWithoutCenter { line },
            CenterError::RadiusTooSmall(radius) => ReplayError::ArcRadiusTooSmall { line, radius },
        }
    }
}

fn arc_center(
    line: &GCodeLine,
    start: &[f64; 3],
    end: &[f64; 3],
    clockwise: bool,
) -> Result<[f64; 2], CenterError> {
    let i = line.value('I');
    let j = line.value('J');
    if i.is_some() || j.is_some() {
        return Ok([start[0] + i.unwrap_or(0.0), start[1] + j.unwrap_or(0.0)]);
    }
    let Some(r) = line.value('R') else {
        return Err(CenterError::Missing);
    };
    let dx = end[0] - start[0];
    let dy = end[1] - start[1];
    let chord = dx.hypot(dy);
    if chord == 0.0 || r == 0.0 {
        return Err(CenterError::Missing);
    }
    let half = chord / 2.0;
    let h2 = r * r - half * half;
    let h = if h2 >= 0.0 {
        h2.sqrt()
    } else if h2 > -1e-9 * r * r {
        0.0
    } else {
        return Err(CenterError::RadiusTooSmall(r));
    };
    // left normal of the chord direction
    let (nx, ny) = (-dy / chord, dx / chord);
    let side = if clockwise { -1.0 } else { 1.0 } * r.signum();
    Ok([
        start[0] + dx / 2.0 + side * h * nx,
        start[1] + dy / 2.0 + side * h * ny,
    ])
}

/// Chord end points of an XY arc (helical in Z), last point == `end`.
pub(crate) fn linearize_arc(
    start: &[f64; 3],
    end: &[f64; 3],
    center: [f64; 2],
    clockwise: bool,
    tolerance: f64,
) -> Vec<[f64; 3]> {
    let r0 = (start[0] - center[0]).hypot(start[1] - center[1]);
    let r1 = (end[0] - center[0]).hypot(end[1] - center[1]);
    if r0 == 0.0 {
        return vec![*end];
    }
    let a0 = (start[1] - center[1]).atan2(start[0] - center[0]);
    let a1 = (end[1] - center[1]).atan2(end[0] - center[0]);
    let mut sweep = a1 - a0;
    if clockwise {
        if sweep >= 0.0 {
            sweep -= 2.0 * PI;
        }
    } else if sweep <= 0.0 {
        sweep += 2.0 * PI;
    }
    let r_max = r0.max(r1);
    let max_step = if tolerance < r_max {
        2.0 * (1.0 - tolerance / r_max).acos()
    } else {
        PI
    };
    let n = ((sweep.abs() / max_step).ceil() as usize).max(1);
    (1..=n)
        .map(|k| {
            if k == n {
                return *end;
            }
            let t = k as f64 / n as f64;
            let a = a0 + sweep * t;
            let r = r0 + (r1 - r0) * t;
            [
                center[0] + r * a.cos(),
                center[1] + r * a.sin(),
                start[2] + (end[2] - start[2]) * t,
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcode::parse_document;

    fn run(src: &str) -> Replay {
        let doc = parse_document(src.as_bytes()).unwrap();
        replay(&doc, MachineState::default()).unwrap()
    }

    #[test]
    fn relative_mode_accumulates() {
        let r = run("G91\nG1 X10 E1 F1200\nG1 X10 E1\n");
        assert_eq!(r.moves.len(), 2);
        assert!(r.moves.iter().all(|m| m.delta_e == 1.0));
        assert_eq!(r.final_state.position[0], 20.0);
    }

    #[test]
    fn e_reset_between_relative_and_absolute() {
        let r = run("G1 F600\nM83\nG1 X5 E0.2\nG92 E0\nG1 X5 E0.2\n");
        let deltas: Vec<f64> = r.moves.iter().map(|m| m.delta_e).collect();
        assert_eq!(deltas, vec![0.2, 0.2]);
    }

    #[test]
    fn absolute_e_after_g92() {
        let r = run("G1 F600\nG1 X1 E2\nG92 E0\nG1 X2 E0.5\n");
        let deltas: Vec<f64> = r.moves.iter().map(|m| m.delta_e).collect();
        assert_eq!(deltas, vec![2.0, 0.5]);
    }

    #[test]
    fn repeated_tool_select_is_recorded() {
        let r = run("T0\nG1 X1 F100\nT0\n");
        assert_eq!(r.final_state.active_tool, 0);
        assert_eq!(r.tool_changes.len(), 2);
        assert_eq!(r.tool_changes[1].line, 2);
    }

    #[test]
    fn motion_without_feedrate_fails() {
        let doc = parse_document(b"G1 X1\n").unwrap();
        let err = replay(&doc, MachineState::default()).unwrap_err();
        assert_eq!(err, ReplayError::MotionBeforeFeedrate { line: 1 });
    }

    #[test]
    fn arc_without_center_fails() {
        let doc = parse_document(b"G1 F100\nG2 X10 Y0\n").unwrap();
        let err = replay(&doc, MachineState::default()).unwrap_err();
        assert_eq!(err, ReplayError::ArcWithoutCenter { line: 2 });
    }

    #[test]
    fn half_circle_arc_chords_match_arc_length() {
        // CCW half circle of radius 5 around (5,0)
        let r = run("G1 F100\nG3 X10 Y0 I5 J0 E3\n");
        let chords: f64 = r.moves.iter().map(PrintMove::length).sum();
        let exact = PI * 5.0;
        assert!(exact - chords > 0.0);
        assert!(exact - chords < PI * DEFAULT_ARC_TOLERANCE);
        let e: f64 = r.moves.iter().map(|m| m.delta_e).sum();
        assert!((e - 3.0).abs() < 1e-12);
        // CCW from (0,0) around (5,0) passes through negative y
        assert!(r.moves.iter().all(|m| m.end[1] <= 1e-12));
        let last = r.moves.last().unwrap().end;
        assert_eq!(last, [10.0, 0.0, 0.0]);
    }

    #[test]
    fn radius_form_picks_minor_arc() {
        let r = run("G1 F100\nG2 X10 Y0 R5\n");
        // clockwise minor arc from (0,0) to (10,0) with radius 5 is a half circle through +y
        assert!(r.moves.iter().any(|m| m.end[1] > 4.9));
    }

    #[test]
    fn chordal_deviation_is_bounded() {
        let c = [0.0, 0.0];
        let pts = linearize_arc(&[3.0, 0.0, 0.0], &[0.0, 3.0, 0.0], c, false, 0.01);
        let mut prev = [3.0, 0.0, 0.0];
        for p in pts {
            let mid = [(prev[0] + p[0]) / 2.0, (prev[1] + p[1]) / 2.0];
            let sagitta = 3.0 - mid[0].hypot(mid[1]);
            assert!(sagitta <= 0.01 + 1e-12);
            prev = p;
        }
    }
}
