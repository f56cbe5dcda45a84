use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bench::{self, AnalysisOptions, BenchReport};
use crate::flow::{self, parse_flow_fraction, FlowParams};
use crate::gcode::{GCodeDocument, ReplayOptions};
use crate::region::{self, RegionSpec, SampleSpec, ToolAlias, ToolchangeMarkers};
use crate::sim::{self, RasterFormat, Rect, SimConfig};

use super::config::parse_regions;
use super::report::{timestamp, write_atomic, InputDigest, Prediction, RunReport};
use super::{
    CliError, Cli, Command, ExitCode, PrinterArgs, RasterFormatArg, ReferenceAction, ReferenceTable, ReportArgs,
    RunConfig,
};

type Out<'a> = &'a mut dyn Write;

pub(super) fn dispatch(cli: Cli, out: Out) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::usage)?,
        None => RunConfig::default(),
    };
    let ctx = Context {
        config,
        config_path: cli.config,
    };
    match cli.command {
        Command::Predict {
            gamma,
            printer,
            table1,
            json,
            common,
        } => ctx.predict(gamma.as_deref(), &printer, table1, json, &common, out),
        Command::Transform {
            input,
            output,
            regions,
            source_gamma,
            tool_alias,
            remove_toolchanges,
            arc_tolerance,
            printer,
            common,
        } => ctx.transform(
            TransformArgs {
                input,
                output,
                regions,
                source_gamma,
                tool_alias,
                remove_toolchanges,
                arc_tolerance,
            },
            &printer,
            &common,
            out,
        ),
        Command::Simulate {
            input,
            resolution,
            z_min,
            z_max,
            region,
            raster_dir,
            raster_format,
            sequential,
            printer,
            common,
        } => ctx.simulate(
            SimulateArgs {
                input,
                resolution,
                z_min,
                z_max,
                region,
                raster_dir,
                raster_format,
                sequential,
            },
            &printer,
            &common,
            out,
        ),
        Command::Analyze {
            inputs,
            tolerance,
            onset_drop,
            common,
        } => ctx.analyze(&inputs, tolerance, onset_drop, &common, out),
        Command::Reference {
            action: ReferenceAction::Export { table, output },
        } => reference_export(table, output.as_deref(), out),
        Command::Sample {
            output,
            gamma,
            pitch,
            footprint,
            solid_height,
            porous_height,
            relative_e,
            printer,
        } => ctx.sample(
            &output,
            &gamma,
            pitch,
            &footprint,
            (solid_height, porous_height),
            relative_e,
            &printer,
            out,
        ),
    }
}

struct TransformArgs {
    input: PathBuf,
    output: PathBuf,
    regions: Option<PathBuf>,
    source_gamma: Option<String>,
    tool_alias: Vec<String>,
    remove_toolchanges: bool,
    arc_tolerance: Option<f64>,
}

struct SimulateArgs {
    input: PathBuf,
    resolution: Option<f64>,
    z_min: Option<f64>,
    z_max: Option<f64>,
    region: Option<String>,
    raster_dir: Option<PathBuf>,
    raster_format: RasterFormatArg,
    sequential: bool,
}

struct Context {
    config: RunConfig,
    config_path: Option<PathBuf>,
}

fn emit(out: Out, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::usage(format!("cannot write to standard output: {e}")))
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::new(ExitCode::Parse, format!("{}: {e}", path.display())))
}

fn parse_gcode(path: &Path, data: &[u8]) -> Result<GCodeDocument, CliError> {
    GCodeDocument::parse(data).map_err(|e| CliError::new(ExitCode::Parse, format!("{}: {e}", path.display())))
}

fn parse_gamma_flag(name: &str, text: &str) -> Result<f64, CliError> {
    parse_flow_fraction(text).map_err(|e| CliError::usage(format!("--{name}: {e}")))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::usage(format!("--{name} must be a positive number, got {v}")))
    }
}

fn parse_list<const N: usize>(name: &str, text: &str) -> Result<[f64; N], CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("--{name}: expected {N} comma-separated numbers, got `{text}`")))?;
    values
        .try_into()
        .map_err(|_| CliError::usage(format!("--{name}: expected {N} comma-separated numbers, got `{text}`")))
}

impl Context {
    fn params(&self, printer: &PrinterArgs) -> Result<FlowParams, CliError> {
        let base = self.config.flow_params();
        let p = FlowParams {
            filament_diameter: printer.filament_diameter.unwrap_or(base.filament_diameter),
            nominal_width: printer.nominal_width.unwrap_or(base.nominal_width),
            layer_height: printer.layer_height.unwrap_or(base.layer_height),
            flow_fraction: 1.0,
        };
        p.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(p)
    }

    fn report(&self, command: &str, common: &ReportArgs, params: FlowParams) -> Result<RunReport, CliError> {
        let mut report = RunReport::new(command, timestamp(common.fixed_timestamp.as_deref()), params);
        if let Some(path) = &self.config_path {
            let data = read_input(path)?;
            report.inputs.push(InputDigest::of(path, &data));
        }
        Ok(report)
    }

    fn report_path(&self, common: &ReportArgs) -> Option<PathBuf> {
        common.report.clone().or_else(|| self.config.report.output.clone())
    }

    fn predict(
        &self,
        gamma: Option<&str>,
        printer: &PrinterArgs,
        table1: bool,
        json: bool,
        common: &ReportArgs,
        out: Out,
    ) -> Result<(), CliError> {
        let base = self.params(printer)?;
        let prediction = match gamma {
            Some(g) => Some(Prediction::new("prediction", &base.with_flow(parse_gamma_flag("gamma", g)?))),
            None => None,
        };
        let table = table1.then(|| flow::table1_report(&base));
        let mut report = self.report("predict", common, base)?;
        report.predictions.extend(prediction.clone());
        report.microscopy = table.clone();
        if let Some(path) = self.report_path(common) {
            write_atomic(&[(path, report.to_json())])
                .map_err(|e| CliError::usage(format!("writing report: {e}")))?;
        }
        if json {
            return emit(out, &String::from_utf8_lossy(&report.to_json()));
        }
        let mut text = String::new();
        if let Some(p) = &prediction {
            let _ = writeln!(text, "flow {}% (gamma {})", fmt_num(p.gamma * 100.0), fmt_num(p.gamma));
            let _ = writeln!(text, "line width: {:.1} µm, {} regime", p.width_mm * 1000.0, p.regime.as_str());
            let section = match p.regime {
                flow::Regime::Trace => "stadium",
                flow::Regime::Fiber => "circular fiber",
            };
            let _ = writeln!(text, "cross-section: {:.6} mm² ({section})", p.area_mm2);
        }
        if let Some(t) = &table {
            if prediction.is_some() {
                text.push('\n');
            }
            let _ = writeln!(text, "flow_%  model_um  regime  table_pred_um  measured_um  model_err_um  table_err_um");
            for r in &t.rows {
                let _ = writeln!(
                    text,
                    "{:>6}  {:>8.1}  {:<6}  {:>13}  {:>11}  {:>12.1}  {:>12}",
                    r.flow_percent,
                    r.model_um,
                    r.regime.as_str(),
                    r.reference_predicted_um,
                    r.measured_um,
                    r.model_abs_error_um,
                    r.reference_abs_error_um
                );
            }
            let _ = writeln!(
                text,
                "mean absolute error: table {:.1} µm, model {:.1} µm (quoted in text: {} and {} µm)",
                t.reference_mae_um,
                t.model_mae_um,
                fmt_num(t.quoted_mae_um[0]),
                fmt_num(t.quoted_mae_um[1])
            );
        }
        emit(out, &text)
    }

    fn transform(&self, args: TransformArgs, printer: &PrinterArgs, common: &ReportArgs, out: Out) -> Result<(), CliError> {
        let params = self.params(printer)?;
        let source_gamma = match (&args.source_gamma, &self.config.transform.source_gamma) {
            (Some(g), _) => parse_gamma_flag("source-gamma", g)?,
            (None, Some(g)) => g.fraction().map_err(|e| CliError::usage(format!("source_gamma: {e}")))?,
            (None, None) => 1.0,
        };
        let arc_tolerance = positive(
            "arc-tolerance",
            args.arc_tolerance
                .or(self.config.transform.arc_tolerance)
                .unwrap_or(crate::gcode::DEFAULT_ARC_TOLERANCE),
        )?;
        let mut alias: Option<BTreeMap<u32, u32>> = self.config.tool_alias().map_err(CliError::usage)?;
        if !args.tool_alias.is_empty() {
            let mut map = alias.unwrap_or_default();
            for pair in &args.tool_alias {
                let (v, p) = pair
                    .split_once('=')
                    .and_then(|(v, p)| Some((v.trim().parse::<u32>().ok()?, p.trim().parse::<u32>().ok()?)))
                    .ok_or_else(|| CliError::usage(format!("--tool-alias expects T=P, got `{pair}`")))?;
                map.insert(v, p);
            }
            alias = Some(map);
        }
        let remove = args.remove_toolchanges || self.config.transform.remove_toolchanges.unwrap_or(false) || alias.is_some();

        let mut report = self.report("transform", common, params.with_flow(source_gamma))?;
        let data = read_input(&args.input)?;
        report.inputs.push(InputDigest::of(&args.input, &data));
        let doc = parse_gcode(&args.input, &data)?;

        let regions: Vec<RegionSpec> = match args.regions.as_ref().or(self.config.transform.regions.as_ref()) {
            Some(path) => {
                let bytes = read_input(path)?;
                report.inputs.push(InputDigest::of(path, &bytes));
                let text = String::from_utf8(bytes)
                    .map_err(|_| CliError::new(ExitCode::Parse, format!("{}: not UTF-8", path.display())))?;
                parse_regions(&text).map_err(|e| CliError::new(ExitCode::Parse, format!("{}: {e}", path.display())))?
            }
            None => Vec::new(),
        };

        let transform_err = |e: region::RegionError| CliError::new(ExitCode::Transform, e.to_string());
        let (doc, removed) = if remove {
            let mut map = ToolAlias::identity_for(&doc);
            if let Some(a) = &alias {
                map.0.extend(a.iter().map(|(&v, &p)| (v, p)));
            }
            region::remove_redundant_toolchanges(&doc, &map, &ToolchangeMarkers::default()).map_err(transform_err)?
        } else {
            (doc, 0)
        };
        let (out_doc, mut treport) = region::apply_regions_with(
            &doc,
            &regions,
            source_gamma,
            &params,
            ReplayOptions { arc_tolerance },
        )
        .map_err(transform_err)?;
        treport.toolchanges_removed = removed;

        report.predictions.push(Prediction::new("source", &params.with_flow(source_gamma)));
        for r in &regions {
            report.predictions.push(Prediction::new(r.label.clone(), &params.with_flow(r.target_gamma)));
        }
        for w in &treport.warnings {
            report.warn(w.clone());
        }
        let bytes = out_doc.to_bytes();
        report.outputs.push(InputDigest::of(&args.output, &bytes));

        let mut text = String::new();
        let _ = writeln!(
            text,
            "{}: {} moves rescaled, {} lines split, {} lines rewritten, {} tool changes removed",
            args.output.display(),
            treport.moves_modified,
            treport.lines_split,
            treport.lines_rewritten,
            removed
        );
        for t in &treport.regions {
            let _ = writeln!(
                text,
                "  region {}: flow {}% -> width {:.1} µm ({}), E {:.5} -> {:.5} mm",
                t.label,
                fmt_num(t.target_gamma * 100.0),
                t.predicted_width_mm * 1000.0,
                t.regime.as_str(),
                t.total_e_before,
                t.total_e_after
            );
        }
        for w in &treport.warnings {
            let _ = writeln!(text, "warning: {w}");
        }
        report.transform = Some(treport);

        let mut files = vec![(args.output.clone(), bytes)];
        if let Some(path) = self.report_path(common) {
            files.push((path, report.to_json()));
        }
        write_atomic(&files).map_err(|e| CliError::new(ExitCode::Transform, format!("writing output: {e}")))?;
        emit(out, &text)
    }

    fn simulate(&self, args: SimulateArgs, printer: &PrinterArgs, common: &ReportArgs, out: Out) -> Result<(), CliError> {
        let params = self.params(printer)?;
        let resolution = positive(
            "resolution",
            args.resolution
                .or(self.config.simulate.resolution)
                .unwrap_or(sim::DEFAULT_RESOLUTION),
        )?;
        let z_range = match (args.z_min, args.z_max) {
            (None, None) => None,
            (lo, hi) => Some((lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))),
        };
        let region = match &args.region {
            Some(text) => {
                let [x0, y0, x1, y1] = parse_list::<4>("region", text)?;
                Some(Rect::new(x0, y0, x1, y1))
            }
            None => None,
        };

        let mut report = self.report("simulate", common, params)?;
        let data = read_input(&args.input)?;
        report.inputs.push(InputDigest::of(&args.input, &data));
        let doc = parse_gcode(&args.input, &data)?;

        let sim_err = |e: sim::SimError| CliError::new(ExitCode::Simulation, e.to_string());
        let config = SimConfig {
            resolution,
            params,
            z_range,
            parallel: !args.sequential,
            replay: ReplayOptions::default(),
        };
        let layers = sim::simulate_document(&doc, &config).map_err(sim_err)?;
        let porosity = sim::porosity_report(&layers, region, params.layer_height, resolution).map_err(sim_err)?;

        let mut files = Vec::new();
        if let Some(dir) = &args.raster_dir {
            let format = match args.raster_format {
                RasterFormatArg::Pgm => RasterFormat::Pgm,
                RasterFormatArg::Csv => RasterFormat::Csv,
            };
            for (i, layer) in layers.iter().enumerate() {
                let path = dir.join(format!("layer_{i:04}_z{:.3}.{}", layer.raster.z, format.extension()));
                let bytes = sim::export_raster(&layer.raster, format);
                report.outputs.push(InputDigest::of(&path, &bytes));
                files.push((path, bytes));
            }
        }
        if layers.is_empty() {
            report.warn("no layers in the selected z range");
        }

        let mut text = String::from("z_mm    porosity  deposits  mean_width_um  gamma  regime\n");
        for l in &porosity.layers {
            let _ = writeln!(
                text,
                "{:<7.3} {:>8.4}  {:>8}  {:>13.1}  {:>5.2}  {}",
                l.z,
                l.porosity,
                l.deposits,
                l.mean_width_mm * 1000.0,
                l.effective_gamma,
                l.regime.map_or("-", |r| r.as_str())
            );
        }
        for g in &porosity.by_gamma {
            let _ = writeln!(
                text,
                "gamma {:.2}: {} layers, mean porosity {:.4}, mean width {:.1} µm",
                g.gamma,
                g.layers,
                g.mean_porosity,
                g.mean_width_mm * 1000.0
            );
        }
        for w in &report.warnings {
            let _ = writeln!(text, "warning: {w}");
        }
        report.porosity = Some(porosity);
        if let Some(path) = self.report_path(common) {
            files.push((path, report.to_json()));
        }
        write_atomic(&files).map_err(|e| CliError::new(ExitCode::Simulation, format!("writing output: {e}")))?;
        emit(out, &text)
    }

    fn analyze(
        &self,
        inputs: &[PathBuf],
        tolerance: Option<f64>,
        onset_drop: Option<f64>,
        common: &ReportArgs,
        out: Out,
    ) -> Result<(), CliError> {
        let defaults = AnalysisOptions::default();
        let options = AnalysisOptions {
            tolerance: positive(
                "tolerance",
                tolerance.or(self.config.tolerance.reference).unwrap_or(defaults.tolerance),
            )?,
            onset_drop: onset_drop.or(self.config.tolerance.onset_drop).unwrap_or(defaults.onset_drop),
        };
        if !(options.onset_drop > 0.0 && options.onset_drop < 1.0) {
            return Err(CliError::usage("--onset-drop must lie in (0, 1)"));
        }
        let analysis_err = |m: String| CliError::new(ExitCode::Analysis, m);
        let mut files = Vec::new();
        for input in inputs {
            if input.is_dir() {
                let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                    .map_err(|e| analysis_err(format!("{}: {e}", input.display())))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
                    .collect();
                found.sort();
                files.extend(found);
            } else {
                files.push(input.clone());
            }
        }
        if files.is_empty() {
            return Err(analysis_err("no trace files found".into()));
        }

        let mut report = self.report("analyze", common, FlowParams::default())?;
        let loaded: Vec<(String, Vec<u8>, Result<bench::MechTrace, bench::BenchError>)> = files
            .par_iter()
            .map(|path| {
                let data = std::fs::read(path).unwrap_or_default();
                (path.display().to_string(), data, bench::load_trace(path))
            })
            .collect();
        let mut batch = Vec::with_capacity(loaded.len());
        for (path, data, result) in loaded {
            report.inputs.push(InputDigest::of(Path::new(&path), &data));
            batch.push((path, result));
        }
        let bench_report = bench::analyze_traces(batch, &options).map_err(|e| analysis_err(e.to_string()))?;

        let text = format_bench(&bench_report);
        for f in &bench_report.files {
            if let Some(e) = &f.error {
                report.warn(format!("{}: {e}", f.source));
            }
        }
        for g in &bench_report.groups {
            for n in &g.notes {
                report.warn(format!("{}: {n}", g.group));
            }
        }
        report.bench = Some(bench_report);
        if let Some(path) = self.report_path(common) {
            write_atomic(&[(path, report.to_json())])
                .map_err(|e| analysis_err(format!("writing report: {e}")))?;
        }
        emit(out, &text)
    }

    #[allow(clippy::too_many_arguments)]
    fn sample(
        &self,
        output: &Path,
        gamma: &str,
        pitch: Option<f64>,
        footprint: &str,
        (solid_height, porous_height): (f64, f64),
        relative_e: bool,
        printer: &PrinterArgs,
        out: Out,
    ) -> Result<(), CliError> {
        let params = self.params(printer)?.with_flow(parse_gamma_flag("gamma", gamma)?);
        let footprint = parse_list::<2>("footprint", footprint)?;
        let spec = SampleSpec {
            footprint,
            solid_height,
            porous_height,
            params,
            solid_spacing: params.nominal_width,
            porous_pitch: pitch.unwrap_or(2.0 * params.nominal_width),
            relative_e,
            ..SampleSpec::default()
        };
        let doc = region::plan_porous_sample(&spec).map_err(|e| CliError::usage(e.to_string()))?;
        let bytes = doc.to_bytes();
        write_atomic(&[(output.to_path_buf(), bytes)])
            .map_err(|e| CliError::usage(format!("{}: {e}", output.display())))?;
        let (solid, porous) = spec.layers().map_err(|e| CliError::usage(e.to_string()))?;
        emit(
            out,
            &format!(
                "{}: {solid} solid + {porous} porous layers, porous section from z = {} mm\n",
                output.display(),
                fmt_num(spec.porous_start_z())
            ),
        )
    }
}

fn reference_export(table: ReferenceTable, output: Option<&Path>, out: Out) -> Result<(), CliError> {
    let csv = match table {
        ReferenceTable::Bonds => bench::reference_csv(),
        ReferenceTable::Microscopy => flow::microscopy_reference_csv(),
    };
    match output {
        Some(path) => write_atomic(&[(path.to_path_buf(), csv.into_bytes())])
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display()))),
        None => emit(out, &csv),
    }
}

fn format_bench(report: &BenchReport) -> String {
    let mut text = String::new();
    for f in &report.files {
        if let Some(e) = &f.error {
            let _ = writeln!(text, "skipped {}: {e}", f.source);
        }
    }
    for g in &report.groups {
        let unit = g.key.test.map_or("", |t| t.unit());
        match &g.summary {
            Some(s) => {
                let _ = write!(text, "{}: {:.2} ± {:.2} {unit} (n={})", g.group, s.mean, s.std, s.n);
            }
            None => {
                let _ = write!(text, "{}: no summary", g.group);
            }
        }
        if let Some(i) = &g.improvement_vs_silpoxy {
            let _ = write!(
                text,
                "; {:+.1}% vs silpoxy ({:.1}% of it)",
                i.percent, i.ratio_percent
            );
        }
        if let Some(c) = &g.reference {
            let _ = write!(
                text,
                "; reference {} -> {} (deviation {:.1}%)",
                c.reference,
                if c.pass { "pass" } else { "FLAGGED" },
                c.rel_deviation * 100.0
            );
        }
        for n in &g.notes {
            let _ = write!(text, "; {n}");
        }
        text.push('\n');
    }
    let _ = writeln!(text, "{} traces analyzed, {} skipped", report.loaded, report.failed);
    text
}

/// Shortest decimal text for a value, up to 6 places.
fn fmt_num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}
