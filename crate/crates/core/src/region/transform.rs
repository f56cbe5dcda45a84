//! Flow rewriting inside regions.
//!
//! Every extruding move is clipped against the regions. Parts inside a
//! region get their filament feed multiplied by `target_gamma / source_gamma`;
//! everything else keeps its feed. Positions are never moved: a move that
//! crosses a boundary is split into collinear `G1` pieces tagged
//! `;porogen:<label>`.
//!
//! With absolute extrusion (`M82`) a rescaled move shifts every later `E`
//! value, so a running offset between the rewritten and the original
//! logical E axis is kept and applied to all later `E` words until the next
//! `G92` reset.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::flow::{self, FlowParams, Regime};
use crate::gcode::{
    format_axis, format_e, replay_with, AxisMode, GCodeDocument, GCodeLine, LineKind, MachineState,
    PrintMove, ReplayOptions, Word,
};

use super::clip::{inside_span, pieces_from_cuts, ClipPiece};
use super::{validate_regions, RegionError, RegionSpec};

/// Per-region totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionTally {
    pub label: String,
    pub target_gamma: f64,
    /// `target_gamma / source_gamma`.
    pub scale: f64,
    /// Model line width at the target flow, mm.
    pub predicted_width_mm: f64,
    pub regime: Regime,
    /// Filament fed inside the region before and after rewriting, mm.
    pub total_e_before: f64,
    pub total_e_after: f64,
    /// Extruding moves (or parts of moves) inside the region.
    pub moves_inside: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformReport {
    pub source_gamma: f64,
    pub moves_modified: usize,
    pub lines_split: usize,
    /// Lines whose bytes differ from the input, split lines included.
    pub lines_rewritten: usize,
    pub toolchanges_removed: usize,
    pub regions: Vec<RegionTally>,
    pub warnings: Vec<String>,
}

pub fn apply_regions(
    doc: &GCodeDocument,
    regions: &[RegionSpec],
    source_gamma: f64,
    params: &FlowParams,
) -> Result<(GCodeDocument, TransformReport), RegionError> {
    apply_regions_with(doc, regions, source_gamma, params, ReplayOptions::default())
}

pub fn apply_regions_with(
    doc: &GCodeDocument,
    regions: &[RegionSpec],
    source_gamma: f64,
    params: &FlowParams,
    options: ReplayOptions,
) -> Result<(GCodeDocument, TransformReport), RegionError> {
    flow::check_flow_fraction(source_gamma)?;
    validate_regions(regions)?;
    let replay = replay_with(doc, MachineState::default(), options)?;

    let mut tallies: Vec<RegionTally> = regions
        .iter()
        .map(|r| {
            let (w, regime) = flow::line_width(&params.with_flow(r.target_gamma));
            RegionTally {
                label: r.label.clone(),
                target_gamma: r.target_gamma,
                scale: r.target_gamma / source_gamma,
                predicted_width_mm: w,
                regime,
                total_e_before: 0.0,
                total_e_after: 0.0,
                moves_inside: 0,
            }
        })
        .collect();
    let active: Vec<bool> = regions
        .iter()
        .zip(&tallies)
        .map(|(r, t)| t.scale != 1.0 || r.feedrate_override.is_some())
        .collect();

    let mut rewriter = Rewriter {
        regions,
        active: &active,
        tallies: &mut tallies,
        state: EmitState::default(),
        out: Vec::with_capacity(doc.lines.len()),
        moves_modified: 0,
        lines_split: 0,
        lines_rewritten: 0,
    };

    let mut next_move = 0;
    for (index, line) in doc.lines.iter().enumerate() {
        let first = next_move;
        while next_move < replay.moves.len() && replay.moves[next_move].source_line == index {
            next_move += 1;
        }
        rewriter.line(line, &replay.moves[first..next_move]);
    }

    let Rewriter {
        out,
        moves_modified,
        lines_split,
        lines_rewritten,
        ..
    } = rewriter;

    let warnings = tallies
        .iter()
        .filter(|t| t.moves_inside == 0)
        .map(|t| format!("region `{}` intersects no extrusion", t.label))
        .collect();

    let report = TransformReport {
        source_gamma,
        moves_modified,
        lines_split,
        lines_rewritten,
        toolchanges_removed: 0,
        regions: tallies,
        warnings,
    };
    Ok((
        GCodeDocument {
            lines: out,
            dialect: doc.dialect,
        },
        report,
    ))
}

#[derive(Debug, Default)]
struct EmitState {
    e_mode: Option<AxisMode>,
    xyz_mode: Option<AxisMode>,
    /// Modal feedrate of the input program.
    true_feed: Option<f64>,
    /// Modal feedrate the rewritten program leaves the firmware in.
    emitted_feed: Option<f64>,
    /// Rewritten logical E minus original logical E.
    e_shift: f64,
    /// Rounding residue of relative E words, per region.
    carry: BTreeMap<usize, f64>,
}

impl EmitState {
    fn absolute_e(&self) -> bool {
        self.e_mode != Some(AxisMode::Relative)
    }

    fn absolute_xyz(&self) -> bool {
        self.xyz_mode != Some(AxisMode::Relative)
    }

    /// Canonical relative E text for `amount`, diffusing rounding error.
    fn relative_e(&mut self, region: usize, amount: f64) -> (String, f64) {
        let carry = self.carry.entry(region).or_insert(0.0);
        let wanted = amount + *carry;
        let text = format_e(wanted);
        let emitted: f64 = text.parse().unwrap_or(wanted);
        *carry = wanted - emitted;
        (text, emitted)
    }
}

/// Label of the region a piece belongs to, if any.
type Owner = Option<usize>;

struct Rewriter<'a> {
    regions: &'a [RegionSpec],
    active: &'a [bool],
    tallies: &'a mut [RegionTally],
    state: EmitState,
    out: Vec<GCodeLine>,
    moves_modified: usize,
    lines_split: usize,
    lines_rewritten: usize,
}

impl Rewriter<'_> {
    fn line(&mut self, line: &GCodeLine, moves: &[PrintMove]) {
        match line.kind {
            LineKind::Mode => {
                if let Some(cmd) = line.command() {
                    match (cmd.letter, cmd.value as u32) {
                        ('G', 90) => {
                            // Marlin: G90/G91 also switch the extruder; M82/M83 override it
                            self.state.xyz_mode = Some(AxisMode::Absolute);
                            self.state.e_mode = Some(AxisMode::Absolute);
                        }
                        ('G', 91) => {
                            // Marlin: G90/G91 also switch the extruder; M82/M83 override it
                            self.state.xyz_mode = Some(AxisMode::Relative);
                            self.state.e_mode = Some(AxisMode::Relative);
                        }
                        ('M', 82) => self.state.e_mode = Some(AxisMode::Absolute),
                        ('M', 83) => self.state.e_mode = Some(AxisMode::Relative),
                        _ => {}
                    }
                }
                self.keep(line);
            }
            LineKind::SetPosition => {
                let resets_e = line.word('E').is_some()
                    || !['X', 'Y', 'Z'].iter().any(|&a| line.word(a).is_some());
                if resets_e {
                    self.state.e_shift = 0.0;
                }
                self.keep(line);
            }
            LineKind::Motion => self.motion(line, moves),
            _ => self.keep(line),
        }
    }

    fn keep(&mut self, line: &GCodeLine) {
        self.out.push(line.clone());
    }

    fn push_rewritten(&mut self, line: GCodeLine, original: &GCodeLine) {
        if line.raw() != original.raw() {
            self.lines_rewritten += 1;
        }
        self.out.push(line);
    }

    /// Ordered pieces of a move labelled with their region.
    fn split(&mut self, mv: &PrintMove) -> Vec<(ClipPiece, Owner)> {
        if !mv.is_deposition() {
            let piece = ClipPiece {
                t0: 0.0,
                t1: 1.0,
                start: mv.start,
                end: mv.end,
                delta_e: mv.delta_e,
                inside: false,
            };
            return vec![(piece, None)];
        }
        let mut spans: Vec<(f64, f64, usize)> = self
            .regions
            .iter()
            .enumerate()
            .filter_map(|(i, r)| inside_span(&r.shape, mv).map(|(lo, hi)| (lo, hi, i)))
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut cuts: Vec<(f64, Owner)> = vec![(0.0, None)];
        fn mark(t: f64, owner: Owner, cuts: &mut Vec<(f64, Owner)>) {
            let last = cuts.last_mut().expect("cuts start non-empty");
            if last.0 >= t {
                last.1 = owner;
            } else {
                cuts.push((t, owner));
            }
        }
        for &(lo, hi, i) in &spans {
            mark(lo, Some(i), &mut cuts);
            if hi < 1.0 {
                mark(hi, None, &mut cuts);
            }
        }
        let owners: Vec<Owner> = cuts.iter().map(|c| c.1).collect();
        let pieces = pieces_from_cuts(mv, &cuts, |o: Owner| o.is_some());
        pieces.into_iter().zip(owners).collect()
    }

    fn effective(&self, owner: Owner) -> Owner {
        owner.filter(|&i| self.active[i])
    }

    fn motion(&mut self, line: &GCodeLine, moves: &[PrintMove]) {
        if let Some(f) = line.value('F').filter(|&f| f > 0.0) {
            self.state.true_feed = Some(f);
            self.state.emitted_feed = Some(f);
        }
        if moves.is_empty() {
            self.keep(line);
            return;
        }

        let mut split_moves = Vec::with_capacity(moves.len());
        for mv in moves {
            let pieces = self.split(mv);
            for (piece, owner) in &pieces {
                if let Some(i) = *owner {
                    let t = &mut self.tallies[i];
                    t.moves_inside += 1;
                    t.total_e_before += piece.delta_e;
                    t.total_e_after += piece.delta_e * t.scale;
                }
            }
            // pieces of inactive regions merge back with their neighbours
            let mut merged: Vec<(ClipPiece, Owner)> = Vec::with_capacity(pieces.len());
            for (piece, owner) in pieces {
                let owner = self.effective(owner);
                match merged.last_mut() {
                    Some((prev, prev_owner)) if *prev_owner == owner => {
                        prev.t1 = piece.t1;
                        prev.end = piece.end;
                        prev.delta_e += piece.delta_e;
                    }
                    _ => merged.push((piece, owner)),
                }
            }
            if merged.len() == 1 && merged[0].0.t1 == 1.0 {
                // restore exact totals after merging
                merged[0].0.delta_e = mv.delta_e;
            }
            split_moves.push((mv, merged));
        }

        let is_arc = moves.len() > 1
            || line
                .command()
                .is_some_and(|c| c.value == 2.0 || c.value == 3.0);
        let touches_active = split_moves
            .iter()
            .any(|(_, pieces)| pieces.iter().any(|(_, o)| o.is_some()));
        let needs_split = split_moves.iter().any(|(_, pieces)| pieces.len() > 1);

        if !touches_active {
            self.edit_in_place(line, moves, None);
        } else if !needs_split && !is_arc {
            let owner = split_moves[0].1[0].1;
            self.edit_in_place(line, moves, owner);
        } else {
            self.emit_pieces(line, &split_moves);
        }
    }

    /// Keeps the line's shape; adjusts E for scaling or accumulated offset,
    /// and F for overrides or restoring the modal feedrate.
    fn edit_in_place(&mut self, line: &GCodeLine, moves: &[PrintMove], owner: Owner) {
        let mut edited = line.clone();
        let original_delta: f64 = moves.iter().map(|m| m.delta_e).sum();

        if let Some(e_word) = line.word('E') {
            match owner {
                Some(i) => {
                    let new_delta = original_delta * self.tallies[i].scale;
                    if self.state.absolute_e() {
                        self.state.e_shift += new_delta - original_delta;
                        edited.set_value('E', e_word.value + self.state.e_shift);
                    } else {
                        let (_, emitted) = self.state.relative_e(i, new_delta);
                        self.state.e_shift += emitted - original_delta;
                        edited.set_value('E', emitted);
                    }
                    self.moves_modified += 1;
                }
                None => {
                    if self.state.absolute_e() && self.state.e_shift != 0.0 {
                        edited.set_value('E', e_word.value + self.state.e_shift);
                    }
                }
            }
        }

        let override_feed = owner.and_then(|i| self.regions[i].feedrate_override);
        match override_feed {
            Some(f) => {
                edited.set_value('F', f);
                self.state.emitted_feed = Some(f);
            }
            None => {
                if line.word('F').is_none() && self.state.emitted_feed != self.state.true_feed {
                    if let Some(f) = self.state.true_feed {
                        edited.set_value('F', f);
                    }
                    self.state.emitted_feed = self.state.true_feed;
                }
            }
        }
        self.push_rewritten(edited, line);
    }

    /// Replaces a motion line by one `G1` per piece.
    fn emit_pieces(
        &mut self,
        line: &GCodeLine,
        split_moves: &[(&PrintMove, Vec<(ClipPiece, Owner)>)],
    ) {
        let command = line
            .command()
            .cloned()
            .unwrap_or_else(|| Word::new('G', 1.0, "1".into()));
        let is_arc = command.value == 2.0 || command.value == 3.0;
        let command = if is_arc {
            Word::new('G', 1.0, "1".into())
        } else {
            command
        };
        let has_e = line.word('E').is_some();
        let axes: Vec<(usize, char)> = [(0, 'X'), (1, 'Y'), (2, 'Z')]
            .into_iter()
            .filter(|&(i, a)| line.word(a).is_some() || (is_arc && i < 2))
            .collect();

        let label = split_moves
            .iter()
            .flat_map(|(_, p)| p.iter())
            .find_map(|(_, o)| *o)
            .map(|i| self.regions[i].label.clone())
            .unwrap_or_default();
        let comment = Some(format!("porogen:{label}"));

        let total_pieces: usize = split_moves.iter().map(|(_, p)| p.len()).sum();
        let mut emitted_pos = split_moves[0].0.start;
        let mut e_logical = 0.0;
        let mut piece_index = 0;
        let mut touched = false;

        for (_, pieces) in split_moves {
            for (piece, owner) in pieces {
                piece_index += 1;
                let is_last = piece_index == total_pieces;
                let mut words = vec![command.clone()];

                for &(i, a) in &axes {
                    let target = piece.end[i];
                    let text = if !self.state.absolute_xyz() {
                        format_axis(target - emitted_pos[i])
                    } else if is_last {
                        // keep the original end point text bit-for-bit
                        line.word(a)
                            .map_or_else(|| format_axis(target), |w| w.text.clone())
                    } else {
                        format_axis(target)
                    };
                    let value: f64 = text.parse().unwrap_or(target);
                    emitted_pos[i] = if self.state.absolute_xyz() {
                        value
                    } else {
                        emitted_pos[i] + value
                    };
                    words.push(Word::new(a, value, text));
                }

                let scale = owner.map_or(1.0, |i| self.tallies[i].scale);
                let new_delta = piece.delta_e * scale;
                if owner.is_some() && piece.delta_e > 0.0 {
                    touched = true;
                }
                if has_e {
                    let text = if self.state.absolute_e() {
                        self.state.e_shift += new_delta - piece.delta_e;
                        e_logical += piece.delta_e;
                        let base = line.value('E').unwrap_or(0.0)
                            - (mv_total_delta(split_moves) - e_logical);
                        format_e(base + self.state.e_shift)
                    } else {
                        let key = owner.unwrap_or(usize::MAX);
                        let (text, emitted) = self.state.relative_e(key, new_delta);
                        self.state.e_shift += emitted - piece.delta_e;
                        text
                    };
                    let value = text.parse().unwrap_or(0.0);
                    words.push(Word::new('E', value, text));
                }

                let feed = owner.and_then(|i| self.regions[i].feedrate_override);
                match feed {
                    Some(f) if piece.delta_e > 0.0 => {
                        if self.state.emitted_feed != Some(f) {
                            let text = crate::gcode::format_feedrate(f);
                            words.push(Word::new('F', f, text));
                        }
                        self.state.emitted_feed = Some(f);
                    }
                    _ => {
                        if self.state.emitted_feed != self.state.true_feed {
                            if let Some(f) = self.state.true_feed {
                                words.push(Word::new('F', f, crate::gcode::format_feedrate(f)));
                            }
                            self.state.emitted_feed = self.state.true_feed;
                        }
                    }
                }

                self.out.push(GCodeLine::from_words(
                    words,
                    comment.clone(),
                    line.terminator,
                ));
                self.lines_rewritten += 1;
            }
        }
        if touched {
            self.moves_modified += 1;
        }
        self.lines_split += 1;
        // one input line became `total_pieces` lines; count it once
        self.lines_rewritten -= total_pieces - 1;
    }
}

fn mv_total_delta(split_moves: &[(&PrintMove, Vec<(ClipPiece, Owner)>)]) -> f64 {
    split_moves.iter().map(|(m, _)| m.delta_e).sum()
}
