//! Python bindings: `import porogen`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use porogen_core::bench;
use porogen_core::cli::parse_regions;
use porogen_core::flow::{self, FlowParams};
use porogen_core::gcode::{self, MachineState};
use porogen_core::region::{self, SampleSpec};
use porogen_core::sim::{self, Rect, SimConfig};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn params(gamma: f64, nominal_width: f64, layer_height: f64, filament_diameter: f64) -> PyResult<FlowParams> {
    FlowParams::new(filament_diameter, nominal_width, layer_height, gamma).map_err(err)
}

/// Reads `"30%"` or `"0.3"` as a flow fraction.
#[pyfunction]
fn parse_flow(text: &str) -> PyResult<f64> {
    flow::parse_flow_fraction(text).map_err(err)
}

/// Line width in mm and regime (`"trace"` or `"fiber"`).
#[pyfunction]
#[pyo3(signature = (gamma, nominal_width=0.4, layer_height=0.2, filament_diameter=1.75))]
fn line_width(gamma: f64, nominal_width: f64, layer_height: f64, filament_diameter: f64) -> PyResult<(f64, &'static str)> {
    let (w, regime) = flow::line_width(&params(gamma, nominal_width, layer_height, filament_diameter)?);
    Ok((w, regime.as_str()))
}

#[pyfunction]
#[pyo3(signature = (width, nominal_width=0.4, layer_height=0.2))]
fn gamma_for_width(width: f64, nominal_width: f64, layer_height: f64) -> PyResult<f64> {
    flow::gamma_for_width(width, nominal_width, layer_height).map_err(err)
}

/// Filament length fed for a path, mm.
#[pyfunction]
#[pyo3(signature = (gamma, path_length, nominal_width=0.4, layer_height=0.2, filament_diameter=1.75))]
fn filament_feed(
    gamma: f64,
    path_length: f64,
    nominal_width: f64,
    layer_height: f64,
    filament_diameter: f64,
) -> PyResult<f64> {
    Ok(flow::filament_feed(
        &params(gamma, nominal_width, layer_height, filament_diameter)?,
        path_length,
    ))
}

#[pyfunction]
#[pyo3(signature = (feed, path_length, filament_diameter=1.75, layer_height=0.2))]
fn width_from_feed(feed: f64, path_length: f64, filament_diameter: f64, layer_height: f64) -> PyResult<f64> {
    flow::width_from_feed(feed, path_length, filament_diameter, layer_height).map_err(err)
}

/// Microscopy comparison rows: (flow %, model µm, table prediction µm, measured µm).
#[pyfunction]
fn table1() -> Vec<(u32, f64, f64, f64)> {
    flow::table1_report(&FlowParams::default())
        .rows
        .iter()
        .map(|r| (r.flow_percent, r.model_um, r.reference_predicted_um, r.measured_um))
        .collect()
}

/// A parsed G-code file that serializes back to its original bytes.
#[pyclass(name = "GCodeDocument")]
struct PyDocument {
    doc: gcode::GCodeDocument,
}

#[pymethods]
impl PyDocument {
    #[staticmethod]
    fn parse(data: &[u8]) -> PyResult<Self> {
        Ok(PyDocument {
            doc: gcode::GCodeDocument::parse(data).map_err(err)?,
        })
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.doc.to_bytes())
    }

    fn __len__(&self) -> usize {
        self.doc.len()
    }

    /// Moves as `(start, end, delta_e, feedrate)` tuples.
    #[allow(clippy::type_complexity)]
    fn moves(&self) -> PyResult<Vec<([f64; 3], [f64; 3], f64, f64)>> {
        let replay = gcode::replay(&self.doc, MachineState::default()).map_err(err)?;
        Ok(replay
            .moves
            .iter()
            .map(|m| (m.start, m.end, m.delta_e, m.feedrate))
            .collect())
    }
}

/// Applies a TOML region file to G-code. Returns the new G-code and a
/// JSON transform report.
#[pyfunction]
#[pyo3(signature = (data, regions_toml, source_gamma=1.0))]
fn transform<'py>(
    py: Python<'py>,
    data: &[u8],
    regions_toml: &str,
    source_gamma: f64,
) -> PyResult<(Bound<'py, PyBytes>, String)> {
    let doc = gcode::GCodeDocument::parse(data).map_err(err)?;
    let regions = parse_regions(regions_toml).map_err(err)?;
    let (out, report) = region::apply_regions(&doc, &regions, source_gamma, &FlowParams::default()).map_err(err)?;
    let json = serde_json::to_string(&report).map_err(err)?;
    Ok((PyBytes::new(py, &out.to_bytes()), json))
}

/// G-code for the rectilinear porous sample.
#[pyfunction]
#[pyo3(signature = (gamma=0.3, pitch=0.8, relative_e=false))]
fn plan_sample<'py>(py: Python<'py>, gamma: f64, pitch: f64, relative_e: bool) -> PyResult<Bound<'py, PyBytes>> {
    let spec = SampleSpec {
        porous_pitch: pitch,
        relative_e,
        ..SampleSpec::default().with_porous_gamma(gamma)
    };
    let doc = region::plan_porous_sample(&spec).map_err(err)?;
    Ok(PyBytes::new(py, &doc.to_bytes()))
}

/// Per-layer `(z, porosity)` inside an optional `(x0, y0, x1, y1)` rectangle.
#[pyfunction]
#[pyo3(signature = (data, resolution=0.01, region=None))]
fn simulate(data: &[u8], resolution: f64, region: Option<(f64, f64, f64, f64)>) -> PyResult<Vec<(f64, f64)>> {
    let doc = gcode::GCodeDocument::parse(data).map_err(err)?;
    let config = SimConfig {
        resolution,
        ..SimConfig::default()
    };
    let layers = sim::simulate_document(&doc, &config).map_err(err)?;
    let rect = region.map(|(x0, y0, x1, y1)| Rect::new(x0, y0, x1, y1));
    let report = sim::porosity_report(&layers, rect, config.params.layer_height, resolution).map_err(err)?;
    Ok(report.layers.iter().map(|l| (l.z, l.porosity)).collect())
}

/// Peak `(abscissa, value)` of a trace CSV.
#[pyfunction]
fn failure_point(csv_text: &str) -> PyResult<(f64, f64)> {
    let trace = bench::parse_trace(csv_text, "trace").map_err(err)?;
    let p = bench::failure_point(&trace).map_err(err)?;
    Ok((p.abscissa, p.value))
}

/// Groups, summarizes and compares trace CSV texts; returns a JSON report.
#[pyfunction]
fn analyze(csv_texts: Vec<String>) -> PyResult<String> {
    let inputs = csv_texts
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("trace{i}"), bench::parse_trace(t, &format!("trace{i}"))))
        .collect();
    let report = bench::analyze_traces(inputs, &bench::AnalysisOptions::default()).map_err(err)?;
    serde_json::to_string(&report).map_err(err)
}

/// `(a - b) / b * 100`.
#[pyfunction]
fn improvement(mean_a: f64, mean_b: f64) -> PyResult<f64> {
    Ok(bench::improvement(mean_a, mean_b).map_err(err)?.percent)
}

#[pyfunction]
fn reference_csv() -> String {
    bench::reference_csv()
}

#[pymodule]
pub fn porogen(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDocument>()?;
    m.add_function(wrap_pyfunction!(parse_flow, m)?)?;
    m.add_function(wrap_pyfunction!(line_width, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_for_width, m)?)?;
    m.add_function(wrap_pyfunction!(filament_feed, m)?)?;
    m.add_function(wrap_pyfunction!(width_from_feed, m)?)?;
    m.add_function(wrap_pyfunction!(table1, m)?)?;
    m.add_function(wrap_pyfunction!(transform, m)?)?;
    m.add_function(wrap_pyfunction!(plan_sample, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(failure_point, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(improvement, m)?)?;
    m.add_function(wrap_pyfunction!(reference_csv, m)?)?;
    Ok(())
}
