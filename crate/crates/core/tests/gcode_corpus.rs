use std::fs;
use std::path::PathBuf;

use porogen_core::flow::FlowParams;
use porogen_core::gcode::{replay, GCodeDocument, MachineState};
use porogen_core::region::{
    apply_regions, remove_redundant_toolchanges, RegionShape, RegionSpec, ToolAlias, ToolchangeMarkers,
};

fn corpus() -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus");
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "gcode"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn corpus_is_large_enough() {
    assert!(corpus().len() >= 20);
}

#[test]
fn every_file_round_trips_and_replays() {
    for (name, bytes) in corpus() {
        let doc = GCodeDocument::parse(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(doc.to_bytes(), bytes, "{name}");
        replay(&doc, MachineState::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn unit_flow_region_changes_nothing() {
    let region = RegionSpec::new("all", RegionShape::ZSlab { z_min: -1e3, z_max: 1e3 }, 1.0);
    for (name, bytes) in corpus() {
        let doc = GCodeDocument::parse(&bytes).unwrap();
        let (out, report) = apply_regions(&doc, std::slice::from_ref(&region), 1.0, &FlowParams::default()).unwrap();
        assert_eq!(out.to_bytes(), bytes, "{name}");
        assert_eq!(report.lines_rewritten, 0, "{name}");
    }
}

#[test]
fn checksummed_lines_keep_their_numbers() {
    let bytes = fs::read(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus/06_checksums.gcode")).unwrap();
    let doc = GCodeDocument::parse(&bytes).unwrap();
    let moves = replay(&doc, MachineState::default()).unwrap().moves;
    let fed: f64 = moves.iter().map(|m| m.delta_e).sum();
    assert!((fed - 1.3304).abs() < 1e-9, "{fed}");
}

#[test]
fn shared_extruder_switches_are_dropped() {
    let bytes = fs::read(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus/05_toolchange_markers.gcode")).unwrap();
    let doc = GCodeDocument::parse(&bytes).unwrap();
    let alias: ToolAlias = [(0, 0), (1, 0)].into_iter().collect();
    let (out, removed) = remove_redundant_toolchanges(&doc, &alias, &ToolchangeMarkers::default()).unwrap();
    // Every switch after the first T0 lands on the same extruder.
    let switches = doc.lines.iter().filter(|l| l.raw().trim_start().starts_with('T')).count();
    assert_eq!(removed, switches - 1);
    let text = String::from_utf8(out.to_bytes()).unwrap();
    assert!(!text.contains("TOOLCHANGE_START"));
    let before = replay(&doc, MachineState::default()).unwrap();
    let after = replay(&out, MachineState::default()).unwrap();
    let printed = |r: &porogen_core::gcode::Replay| {
        r.moves.iter().filter(|m| m.is_deposition()).map(|m| (m.start, m.end, m.delta_e)).collect::<Vec<_>>()
    };
    assert_eq!(printed(&before), printed(&after));
}

#[test]
fn distinct_extruders_are_kept() {
    let bytes = fs::read(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus/20_multi_tool.gcode")).unwrap();
    let doc = GCodeDocument::parse(&bytes).unwrap();
    let (out, removed) =
        remove_redundant_toolchanges(&doc, &ToolAlias::identity_for(&doc), &ToolchangeMarkers::default()).unwrap();
    // Only the repeated T1 goes.
    assert_eq!(removed, 1);
    assert_eq!(out.len(), doc.len() - 1);
}
