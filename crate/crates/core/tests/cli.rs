use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_porogen"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sample(dir: &Path, gamma: &str) {
    let o = run(&["sample", "-o", "sample.gcode", "--gamma", gamma], dir);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn version_names_tool_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--version"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("porogen ") && text.contains("report schema 1"), "{text}");
}

#[test]
fn predict_reports_width_and_regime() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["predict", "--gamma", "30%"], dir.path());
    assert!(stdout(&o).contains("162.9 µm, fiber regime"), "{}", stdout(&o));
    let o = run(&["predict", "--gamma", "100%"], dir.path());
    assert!(stdout(&o).contains("442.9 µm, trace regime"), "{}", stdout(&o));
    let o = run(&["predict", "--gamma", "0.3", "--json"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn bad_flow_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for g in ["0", "30", "abc", "-5%"] {
        let o = run(&["predict", "--gamma", g], dir.path());
        assert_eq!(o.status.code(), Some(2), "gamma {g}: {}", stderr(&o));
    }
    assert_eq!(run(&["predict"], dir.path()).status.code(), Some(2));
}

#[test]
fn transform_without_regions_copies_input() {
    let dir = tempfile::tempdir().unwrap();
    sample(dir.path(), "30%");
    let o = run(
        &["transform", "sample.gcode", "-o", "copy.gcode", "--report", "r.json", "--fixed-timestamp", "T"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(dir.path().join("copy.gcode")).unwrap(),
        fs::read(dir.path().join("sample.gcode")).unwrap()
    );
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(v["transform"]["moves_modified"], 0);
    assert_eq!(v["transform"]["lines_rewritten"], 0);
    assert_eq!(v["generated_at"], "T");
    assert_eq!(v["inputs"][0]["sha256"], v["outputs"][0]["sha256"]);
}

#[test]
fn overlapping_regions_fail_without_output() {
    let dir = tempfile::tempdir().unwrap();
    sample(dir.path(), "100%");
    fs::write(
        dir.path().join("regions.toml"),
        "[[region]]\nlabel = \"upper\"\nshape = \"z_slab\"\nz_min = 1\nz_max = 3.1\ngamma = \"30%\"\n\
         [[region]]\nlabel = \"plug\"\nshape = \"cylinder\"\ncenter = [10, 10]\nradius = 2\nz_min = 0\nz_max = 2\ngamma = 0.5\n",
    )
    .unwrap();
    let o = run(
        &["transform", "sample.gcode", "-o", "out.gcode", "--regions", "regions.toml", "--report", "r.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4));
    let err = stderr(&o);
    assert!(err.contains("upper") && err.contains("plug"), "{err}");
    assert!(!dir.path().join("out.gcode").exists());
    assert!(!dir.path().join("r.json").exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn empty_region_is_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    sample(dir.path(), "100%");
    fs::write(
        dir.path().join("regions.toml"),
        "[[region]]\nlabel = \"air\"\nshape = \"z_slab\"\nz_min = 50\nz_max = 60\ngamma = \"30%\"\n",
    )
    .unwrap();
    let o = run(
        &["transform", "sample.gcode", "-o", "out.gcode", "--regions", "regions.toml", "--report", "r.json"],
        dir.path(),
    );
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(v["has_warnings"], true);
}

#[test]
fn unparseable_gcode_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.gcode"), "G1 X1\nG1 X=2\n").unwrap();
    let o = run(&["transform", "bad.gcode", "-o", "out.gcode"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert!(!dir.path().join("out.gcode").exists());
    assert_eq!(run(&["simulate", "missing.gcode"], dir.path()).status.code(), Some(3));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    sample(dir.path(), "100%");
    fs::write(
        dir.path().join("regions.toml"),
        "[[region]]\nlabel = \"porous\"\nshape = \"z_slab\"\nz_min = 1\nz_max = 3.1\ngamma = \"30%\"\n",
    )
    .unwrap();
    fs::write(dir.path().join("run.toml"), "[transform]\nregions = \"regions.toml\"\n").unwrap();
    let o = run(&["--config", "run.toml", "transform", "sample.gcode", "-o", "out.gcode"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("region porous"), "{}", stdout(&o));
    fs::write(dir.path().join("bad.toml"), "[transform]\nregion = \"x\"\n").unwrap();
    let o = run(&["--config", "bad.toml", "transform", "sample.gcode", "-o", "out2.gcode"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_errors_and_travel_only() {
    let dir = tempfile::tempdir().unwrap();
    sample(dir.path(), "10%");
    let o = run(&["simulate", "sample.gcode", "--resolution", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));

    fs::write(dir.path().join("travel.gcode"), "G90\nG0 X0 Y0 Z0.2 F6000\nG0 X10 Y10\nG0 X0 Y10\n").unwrap();
    let o = run(
        &["simulate", "travel.gcode", "--region", "0,0,10,10", "--report", "t.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("t.json")).unwrap()).unwrap();
    for layer in v["porosity"]["layers"].as_array().unwrap() {
        assert_eq!(layer["porosity"], 1.0);
    }
}

#[test]
fn raster_exports_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    sample(dir.path(), "30%");
    for fmt in ["pgm", "csv"] {
        let o = run(
            &["simulate", "sample.gcode", "--z-min", "2.9", "--raster-dir", fmt, "--raster-format", fmt],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let files: Vec<_> = fs::read_dir(dir.path().join(fmt)).unwrap().map(|e| e.unwrap().path()).collect();
        assert_eq!(files.len(), 1);
        let bytes = fs::read(&files[0]).unwrap();
        if fmt == "pgm" {
            assert!(bytes.starts_with(b"P5\n"));
        } else {
            assert!(bytes.starts_with(b"0,") || bytes.starts_with(b"1,"));
        }
    }
}

fn write_trace(dir: &Path, name: &str, method: &str, peak: f64) {
    let text = format!(
        "#kind=force_displacement\n#material=dragonskin\n#test=peel\n#method={method}\nabscissa,value\n0,0\n1,{}\n2,{peak}\n3,{}\n",
        peak / 2.0,
        peak / 4.0
    );
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn analyze_skips_corrupt_files() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    fs::create_dir(&traces).unwrap();
    write_trace(&traces, "a.csv", "30%", 12.0);
    write_trace(&traces, "b.csv", "30%", 16.0);
    write_trace(&traces, "c.csv", "silpoxy", 4.0);
    write_trace(&traces, "d.csv", "silpoxy", 3.5);
    fs::write(traces.join("broken.csv"), "abscissa,value\n0,1\n1,x\n").unwrap();
    let o = run(&["analyze", "traces", "--report", "bench.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("skipped") && text.contains("broken.csv"), "{text}");
    assert!(text.contains("4 traces analyzed, 1 skipped"), "{text}");
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("bench.json")).unwrap()).unwrap();
    assert_eq!(v["has_warnings"], true);
    assert_eq!(v["bench"]["groups"].as_array().unwrap().len(), 2);
}

#[test]
fn analyze_with_nothing_usable_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    assert_eq!(run(&["analyze", "empty"], dir.path()).status.code(), Some(6));
    fs::write(dir.path().join("empty/bad.csv"), "nonsense\n").unwrap();
    assert_eq!(run(&["analyze", "empty"], dir.path()).status.code(), Some(6));
}

#[test]
fn reference_tables_export() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reference", "export", "-o", "bonds.csv"], dir.path());
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("bonds.csv")).unwrap();
    assert!(text.starts_with("material,test,method,unit,kind,mean,std,quoted\n"));
    assert!(text.contains("dragonskin,balloon_pressure,silpoxy,kPa,upper_bound,8,,< 8"));
    let o = run(&["reference", "export", "--table", "microscopy"], dir.path());
    assert!(stdout(&o).lines().count() == 9, "{}", stdout(&o));
}
