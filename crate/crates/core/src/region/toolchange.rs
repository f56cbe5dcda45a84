//! Removal of tool changes that do not change the physical extruder.
//!
//! Multi-extruder slicer profiles on a single-extruder printer emit `T<n>`
//! switches (often wrapped in prime/wipe code) that only exist to give
//! each virtual tool its own flow setting. Once the flow has been baked
//! into the E values, switches between virtual tools sharing one extruder
//! are dead weight.

use std::collections::{BTreeMap, BTreeSet};

use crate::gcode::{GCodeDocument, GCodeLine, LineKind};

use super::RegionError;

/// Virtual tool index to physical extruder index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolAlias(pub BTreeMap<u32, u32>);

impl ToolAlias {
    /// Each tool used in `doc` maps to itself.
    pub fn identity_for(doc: &GCodeDocument) -> Self {
        let tools: BTreeSet<u32> = doc.lines.iter().filter_map(tool_of).collect();
        ToolAlias(tools.into_iter().map(|t| (t, t)).collect())
    }

    pub fn physical(&self, tool: u32) -> Option<u32> {
        self.0.get(&tool).copied()
    }
}

impl FromIterator<(u32, u32)> for ToolAlias {
    fn from_iter<I: IntoIterator<Item = (u32, u32)>>(iter: I) -> Self {
        ToolAlias(iter.into_iter().collect())
    }
}

/// Comment texts delimiting a prime/wipe block around a tool change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolchangeMarkers {
    pub begin: String,
    pub end: String,
}

impl Default for ToolchangeMarkers {
    fn default() -> Self {
        ToolchangeMarkers {
            begin: "TOOLCHANGE_START".into(),
            end: "TOOLCHANGE_END".into(),
        }
    }
}

impl ToolchangeMarkers {
    fn matches(line: &GCodeLine, marker: &str) -> bool {
        line.kind == LineKind::CommentOnly
            && line
                .comment
                .as_deref()
                .is_some_and(|c| c.trim().eq_ignore_ascii_case(marker))
    }
}

fn tool_of(line: &GCodeLine) -> Option<u32> {
    if line.kind != LineKind::ToolChange {
        return None;
    }
    let v = line.command()?.value;
    (v >= 0.0 && v.fract() == 0.0).then_some(v as u32)
}

/// Finds `[begin, end]` marker blocks (inclusive line indices).
fn marker_blocks(doc: &GCodeDocument, markers: &ToolchangeMarkers) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut open = None;
    for (i, line) in doc.lines.iter().enumerate() {
        if ToolchangeMarkers::matches(line, &markers.begin) {
            open = Some(i);
        } else if ToolchangeMarkers::matches(line, &markers.end) {
            if let Some(start) = open.take() {
                blocks.push((start, i));
            }
        }
    }
    blocks
}

/// Drops `T<n>` commands (and their marker-delimited block) that select the
/// physical extruder already in use. Returns the cleaned document and the
/// number of switches removed.
pub fn remove_redundant_toolchanges(
    doc: &GCodeDocument,
    alias: &ToolAlias,
    markers: &ToolchangeMarkers,
) -> Result<(GCodeDocument, usize), RegionError> {
    let blocks = marker_blocks(doc, markers);
    let mut removed = vec![false; doc.lines.len()];
    let mut current: Option<u32> = None;
    let mut count = 0;

    for (i, line) in doc.lines.iter().enumerate() {
        if removed[i] {
            continue;
        }
        let Some(tool) = tool_of(line) else {
            continue;
        };
        let physical = alias
            .physical(tool)
            .ok_or(RegionError::UnmappedTool { line: i + 1, tool })?;
        if current != Some(physical) {
            current = Some(physical);
            continue;
        }
        count += 1;
        removed[i] = true;
        let enclosing = blocks.iter().find(|&&(b, e)| b < i && i < e);
        let following = doc.lines[i + 1..]
            .iter()
            .position(|l| !(l.kind == LineKind::CommentOnly && l.comment.is_none()))
            .map(|offset| i + 1 + offset)
            .and_then(|next| blocks.iter().find(|&&(b, _)| b == next));
        if let Some(&(b, e)) = enclosing.or(following) {
            removed[b..=e].iter_mut().for_each(|r| *r = true);
        }
    }

    let lines = doc
        .lines
        .iter()
        .zip(&removed)
        .filter(|(_, &r)| !r)
        .map(|(l, _)| l.clone())
        .collect();
    Ok((
        GCodeDocument {
            lines,
            dialect: doc.dialect,
        },
        count,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcode::parse_document;

    fn clean(src: &str, alias: ToolAlias) -> (String, usize) {
        let doc = parse_document(src.as_bytes()).unwrap();
        let (out, n) =
            remove_redundant_toolchanges(&doc, &alias, &ToolchangeMarkers::default()).unwrap();
        (String::from_utf8(out.to_bytes()).unwrap(), n)
    }

    #[test]
    fn repeated_tool_is_removed() {
        let (out, n) = clean(
            "T0\nG1 X1 F100\nT0\nG1 X2\n",
            [(0, 0)].into_iter().collect(),
        );
        assert_eq!(n, 1);
        assert_eq!(out, "T0\nG1 X1 F100\nG1 X2\n");
    }

    #[test]
    fn aliased_virtual_tools_collapse() {
        let (out, n) = clean(
            "T0\nG1 X1 F100\nT1\nG1 X2\n",
            [(0, 0), (1, 0)].into_iter().collect(),
        );
        assert_eq!(n, 1);
        assert!(!out.contains("T1"));
    }

    #[test]
    fn distinct_tools_are_kept() {
        let src = "T0\nG1 X1 F100\nT1\nG1 X2\n";
        let (out, n) = clean(src, [(0, 0), (1, 1)].into_iter().collect());
        assert_eq!(n, 0);
        assert_eq!(out, src);
    }

    #[test]
    fn enclosing_and_following_blocks_go_with_the_switch() {
        let src = "T0\nG1 X1 F100\n;TOOLCHANGE_START\nG1 E-1\nT1\nG1 E1\n;TOOLCHANGE_END\nG1 X2\nT0\n\n;TOOLCHANGE_START\nG1 E-2\nG1 E2\n;TOOLCHANGE_END\nG1 X3\n";
        let (out, n) = clean(src, [(0, 0), (1, 0)].into_iter().collect());
        assert_eq!(n, 2);
        assert_eq!(out, "T0\nG1 X1 F100\nG1 X2\n\nG1 X3\n");
    }

    #[test]
    fn unmapped_tool_is_an_error() {
        let doc = parse_document(b"T0\nT3\n").unwrap();
        let alias: ToolAlias = [(0, 0)].into_iter().collect();
        let err =
            remove_redundant_toolchanges(&doc, &alias, &ToolchangeMarkers::default()).unwrap_err();
        assert_eq!(err, RegionError::UnmappedTool { line: 2, tool: 3 });
    }

    #[test]
    fn removal_is_idempotent() {
        let alias: ToolAlias = [(0, 0), (1, 0)].into_iter().collect();
        let (once, _) = clean("T0\nG1 X1 F100\nT1\nT0\n", alias.clone());
        let (twice, n) = clean(&once, alias);
        assert_eq!(n, 0);
        assert_eq!(once, twice);
    }
}
