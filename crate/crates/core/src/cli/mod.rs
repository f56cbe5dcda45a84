//! The `porogen` command line.
//!
//! Exit codes: 0 success (warnings included), 2 usage, 3 input parse,
//! 4 transform, 5 simulation, 6 analysis.

mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{parse_regions, RunConfig};
pub use report::{write_atomic, RunReport};

pub const VERSION_TEXT: &str = concat!(env!("CARGO_PKG_VERSION"), " (report schema 1)");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Usage = 2,
    Parse = 3,
    Transform = 4,
    Simulation = 5,
    Analysis = 6,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub(crate) fn usage(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Usage, message)
    }
}

#[derive(Debug, Parser)]
#[command(name = "porogen", version = VERSION_TEXT, about = "Region-selective underextrusion for FDM G-code")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct PrinterArgs {
    /// Filament diameter, mm.
    #[arg(long)]
    pub filament_diameter: Option<f64>,
    /// Nominal line width (nozzle diameter), mm.
    #[arg(long)]
    pub nominal_width: Option<f64>,
    /// Layer height, mm.
    #[arg(long)]
    pub layer_height: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predict line width, regime and cross-section for a flow setting.
    Predict {
        /// Flow as a percentage with `%` (`30%`) or a fraction (`0.3`).
        #[arg(long, required_unless_present = "table1")]
        gamma: Option<String>,
        #[command(flatten)]
        printer: PrinterArgs,
        /// Also print the microscopy comparison table.
        #[arg(long)]
        table1: bool,
        /// Print the JSON report instead of text.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        common: ReportArgs,
    },
    /// Rewrite flow inside regions and drop redundant tool changes.
    Transform {
        input: PathBuf,
        /// Output G-code file.
        #[arg(short, long)]
        output: PathBuf,
        /// Region file (TOML).
        #[arg(long)]
        regions: Option<PathBuf>,
        /// Flow the input was sliced with.
        #[arg(long)]
        source_gamma: Option<String>,
        /// Map a virtual tool to a physical extruder, e.g. `1=0`. Repeatable.
        #[arg(long = "tool-alias", value_name = "T=P")]
        tool_alias: Vec<String>,
        /// Remove tool changes that reselect the active physical extruder.
        #[arg(long)]
        remove_toolchanges: bool,
        /// Maximum chordal deviation when linearizing arcs, mm.
        #[arg(long)]
        arc_tolerance: Option<f64>,
        #[command(flatten)]
        printer: PrinterArgs,
        #[command(flatten)]
        common: ReportArgs,
    },
    /// Rasterize deposited layers and report porosity.
    Simulate {
        input: PathBuf,
        /// Cell size, mm.
        #[arg(long)]
        resolution: Option<f64>,
        #[arg(long)]
        z_min: Option<f64>,
        #[arg(long)]
        z_max: Option<f64>,
        /// Query rectangle `x0,y0,x1,y1` in mm.
        #[arg(long, value_name = "X0,Y0,X1,Y1")]
        region: Option<String>,
        /// Write one raster image per layer into this directory.
        #[arg(long)]
        raster_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = RasterFormatArg::Pgm)]
        raster_format: RasterFormatArg,
        /// Process layers on one thread.
        #[arg(long)]
        sequential: bool,
        #[command(flatten)]
        printer: PrinterArgs,
        #[command(flatten)]
        common: ReportArgs,
    },
    /// Summarize mechanical test traces and compare with reference values.
    Analyze {
        /// Trace CSV files or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Relative tolerance for reference comparisons.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Drop fraction for the onset estimate.
        #[arg(long)]
        onset_drop: Option<f64>,
        #[command(flatten)]
        common: ReportArgs,
    },
    /// Embedded reference data.
    Reference {
        #[command(subcommand)]
        action: ReferenceAction,
    },
    /// Generate the rectilinear porous test sample.
    Sample {
        #[arg(short, long)]
        output: PathBuf,
        /// Flow of the porous section.
        #[arg(long, default_value = "30%")]
        gamma: String,
        /// Line pitch of the porous section, mm.
        #[arg(long)]
        pitch: Option<f64>,
        /// Footprint `X,Y` in mm.
        #[arg(long, default_value = "20,20")]
        footprint: String,
        #[arg(long, default_value_t = 1.0)]
        solid_height: f64,
        #[arg(long, default_value_t = 2.0)]
        porous_height: f64,
        /// Use relative extrusion (M83).
        #[arg(long)]
        relative_e: bool,
        #[command(flatten)]
        printer: PrinterArgs,
    },
}

#[derive(Debug, Args, Clone, Default)]
pub struct ReportArgs {
    /// JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Timestamp written into the report instead of the current time.
    #[arg(long)]
    pub fixed_timestamp: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum ReferenceAction {
    /// Write reference data as CSV.
    Export {
        #[arg(long, value_enum, default_value_t = ReferenceTable::Bonds)]
        table: ReferenceTable,
        /// Output file; standard output when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReferenceTable {
    /// Bond, pressure and deflection values.
    Bonds,
    /// Predicted and measured fiber widths.
    Microscopy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RasterFormatArg {
    Pgm,
    Csv,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    ExitCode::Usage as i32
                }
            };
        }
    };
    match commands::dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code as i32
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_names_schema() {
        assert!(VERSION_TEXT.ends_with(&format!("(report schema {})", crate::REPORT_SCHEMA_VERSION)));
        let mut out = Vec::new();
        let code = run(["porogen", "--version"], &mut out, &mut Vec::new());
        assert_eq!(code, 0);
        assert!(String::from_utf8(out).unwrap().contains("report schema"));
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run(["porogen", "frobnicate"], &mut Vec::new(), &mut Vec::new()), 2);
    }
}
